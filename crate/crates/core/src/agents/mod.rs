//! Offloading policies: tabular Q-learning, DQN, double DQN and a uniform
//! random baseline, with the shared episode loop.

mod deep;
mod explore;
mod qtable;
mod replay;

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionIndex, EnvState, OffloadEnv, StepOutcome};
use crate::error::{Error, Result};
use crate::rng::{self, EnvRng};

pub use deep::{ddqn_target, dqn_target, DeepQAgent, TargetRule};
pub use explore::{select_action, ExplorationSchedule};
pub use qtable::{Discretizer, QTable, StateKey};
pub use replay::{ReplayMemory, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ql,
    Dqn,
    Ddqn,
    Rm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ddqn, Algorithm::Dqn, Algorithm::Ql, Algorithm::Rm];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ql => "ql",
            Algorithm::Dqn => "dqn",
            Algorithm::Ddqn => "ddqn",
            Algorithm::Rm => "rm",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Ql => "QL",
            Algorithm::Dqn => "DQN",
            Algorithm::Ddqn => "DDQN",
            Algorithm::Rm => "RM",
        }
    }

    /// Stable small integer used when deriving per-algorithm seeds.
    pub fn code(self) -> u64 {
        match self {
            Algorithm::Ql => 1,
            Algorithm::Dqn => 2,
            Algorithm::Ddqn => 3,
            Algorithm::Rm => 4,
        }
    }

    pub fn learns(self) -> bool {
        self != Algorithm::Rm
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ql" => Ok(Algorithm::Ql),
            "dqn" => Ok(Algorithm::Dqn),
            "ddqn" => Ok(Algorithm::Ddqn),
            "rm" => Ok(Algorithm::Rm),
            other => Err(Error::config("algorithm", format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub discount: f64,
    pub replay_capacity: usize,
    /// Soft target update every this many environment steps.
    pub target_update_period: usize,
    pub tau: f64,
    /// Gradients with a larger L2 norm are rescaled to this norm; 0 disables.
    pub max_grad_norm: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    /// Per-episode multiplier. When unset it is derived so that ε reaches
    /// `epsilon_min` after `epsilon_decay_fraction` of the episodes.
    pub epsilon_decay: Option<f64>,
    pub epsilon_decay_fraction: f64,
    pub ql_alpha: f64,
    pub ql_b_total_bins: usize,
    pub ql_t_prev_bins: usize,
    pub ql_t_prev_max_s: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 10,
            discount: 0.9985,
            replay_capacity: 10_000,
            target_update_period: 10,
            tau: 0.001,
            max_grad_norm: 10.0,
            epsilon_start: 1.0,
            epsilon_min: 0.001,
            epsilon_decay: None,
            epsilon_decay_fraction: 0.8,
            ql_alpha: 0.1,
            ql_b_total_bins: 8,
            ql_t_prev_bins: 6,
            ql_t_prev_max_s: 3.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be finite and >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::invalid("discount", "must be in [0, 1]"));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::invalid("replay_capacity", "must be >= batch_size"));
        }
        if self.target_update_period == 0 {
            return Err(Error::invalid("target_update_period", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::invalid("tau", "must be in [0, 1]"));
        }
        if !(self.max_grad_norm >= 0.0 && self.max_grad_norm.is_finite()) {
            return Err(Error::invalid("max_grad_norm", "must be finite and >= 0"));
        }
        if !(self.epsilon_decay_fraction > 0.0 && self.epsilon_decay_fraction <= 1.0) {
            return Err(Error::invalid("epsilon_decay_fraction", "must be in (0, 1]"));
        }
        ExplorationSchedule::new(self.epsilon_start, self.epsilon_decay.unwrap_or(0.5), self.epsilon_min)?;
        if !(0.0..=1.0).contains(&self.ql_alpha) {
            return Err(Error::invalid("ql_alpha", "must be in [0, 1]"));
        }
        if self.ql_b_total_bins == 0 || self.ql_t_prev_bins == 0 || self.ql_b_total_bins > 255 || self.ql_t_prev_bins > 255 {
            return Err(Error::invalid("ql_b_total_bins", "bin counts must be in 1..=255"));
        }
        if !(self.ql_t_prev_max_s > 0.0) {
            return Err(Error::invalid("ql_t_prev_max_s", "must be > 0"));
        }
        Ok(())
    }

    pub fn schedule(&self, episodes: usize) -> Result<ExplorationSchedule> {
        let decay = self.epsilon_decay.unwrap_or_else(|| {
            ExplorationSchedule::decay_to_reach(
                self.epsilon_start,
                self.epsilon_min,
                episodes,
                self.epsilon_decay_fraction,
            )
        });
        ExplorationSchedule::new(self.epsilon_start, decay.min(1.0 - 1e-12), self.epsilon_min)
    }
}

/// Random streams owned by an agent.
#[derive(Debug, Clone)]
pub struct AgentRng {
    pub explore: ChaCha8Rng,
    pub minibatch: ChaCha8Rng,
    pub init: ChaCha8Rng,
}

impl AgentRng {
    pub fn from_seed(master_seed: u64) -> Self {
        Self {
            explore: rng::stream(master_seed, "explore"),
            minibatch: rng::stream(master_seed, "minibatch"),
            init: rng::stream(master_seed, "init"),
        }
    }
}

pub trait Agent {
    fn act(&mut self, env: &OffloadEnv, state: &EnvState, rng: &mut AgentRng) -> ActionIndex;

    /// Learns from the step just taken from `state` with `action`.
    fn observe(
        &mut self,
        env: &OffloadEnv,
        state: &EnvState,
        action: ActionIndex,
        outcome: &StepOutcome,
        rng: &mut AgentRng,
    ) -> Result<()>;

    fn end_episode(&mut self);

    fn epsilon(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub reward_total: f64,
    pub reward_mean: f64,
    pub violations: usize,
    pub mean_t_total: f64,
    pub epsilon: f64,
}

/// Runs one episode: act, step, learn, then decay exploration.
pub fn train_episode(
    agent: &mut dyn Agent,
    env: &mut OffloadEnv,
    env_rng: &mut EnvRng,
    agent_rng: &mut AgentRng,
    episode: usize,
) -> Result<EpisodeRecord> {
    let epsilon = agent.epsilon();
    let mut state = env.reset(env_rng);
    let mut total = 0.0;
    let mut violations = 0;
    let mut t_sum = 0.0;
    let mut steps = 0usize;
    loop {
        let action = agent.act(env, &state, agent_rng);
        let out = env.step(action, env_rng)?;
        agent.observe(env, &state, action, &out, agent_rng)?;
        total += out.reward;
        violations += usize::from(out.violated);
        t_sum += out.breakdown.t_total_s;
        steps += 1;
        state = out.next_state;
        if out.terminal {
            break;
        }
    }
    agent.end_episode();
    Ok(EpisodeRecord {
        episode,
        reward_total: total,
        reward_mean: total / steps as f64,
        violations,
        mean_t_total: t_sum / steps as f64,
        epsilon,
    })
}

/// Uniformly random offloading choice, no learning.
#[derive(Debug, Clone, Default)]
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn act(&mut self, env: &OffloadEnv, _state: &EnvState, rng: &mut AgentRng) -> ActionIndex {
        ActionIndex(select_action(1.0, env.action_count(), &mut rng.explore, Vec::new))
    }

    fn observe(&mut self, _: &OffloadEnv, _: &EnvState, _: ActionIndex, _: &StepOutcome, _: &mut AgentRng) -> Result<()> {
        Ok(())
    }

    fn end_episode(&mut self) {}

    fn epsilon(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct QLearningAgent {
    table: QTable,
    discretizer: Discretizer,
    schedule: ExplorationSchedule,
    alpha: f64,
    gamma: f64,
}

impl QLearningAgent {
    pub fn new(env: &OffloadEnv, cfg: &AgentConfig, schedule: ExplorationSchedule) -> Self {
        Self {
            table: QTable::new(env.action_count()),
            discretizer: Discretizer::new(env.config(), cfg.ql_b_total_bins, cfg.ql_t_prev_bins, cfg.ql_t_prev_max_s),
            schedule,
            alpha: cfg.ql_alpha,
            gamma: cfg.discount,
        }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }
}

impl Agent for QLearningAgent {
    fn act(&mut self, env: &OffloadEnv, state: &EnvState, rng: &mut AgentRng) -> ActionIndex {
        let key = self.discretizer.key(state);
        ActionIndex(select_action(self.schedule.epsilon(), env.action_count(), &mut rng.explore, || {
            self.table.row(&key)
        }))
    }

    fn observe(
        &mut self,
        _env: &OffloadEnv,
        state: &EnvState,
        action: ActionIndex,
        outcome: &StepOutcome,
        _rng: &mut AgentRng,
    ) -> Result<()> {
        let key = self.discretizer.key(state);
        let next = (!outcome.terminal).then(|| self.discretizer.key(&outcome.next_state));
        self.table
            .update(key, action.0, outcome.reward, next.as_ref(), self.alpha, self.gamma);
        Ok(())
    }

    fn end_episode(&mut self) {
        self.schedule.advance();
    }

    fn epsilon(&self) -> f64 {
        self.schedule.epsilon()
    }
}

/// Builds the agent for `algorithm`, drawing any initial weights from `rng.init`.
pub fn build_agent(
    algorithm: Algorithm,
    env: &OffloadEnv,
    cfg: &AgentConfig,
    episodes: usize,
    rng: &mut AgentRng,
) -> Result<Box<dyn Agent + Send>> {
    cfg.validate()?;
    let schedule = cfg.schedule(episodes)?;
    Ok(match algorithm {
        Algorithm::Rm => Box::new(RandomAgent),
        Algorithm::Ql => Box::new(QLearningAgent::new(env, cfg, schedule)),
        Algorithm::Dqn => Box::new(DeepQAgent::new(TargetRule::Dqn, env.action_count(), cfg, schedule, &mut rng.init)),
        Algorithm::Ddqn => Box::new(DeepQAgent::new(TargetRule::Ddqn, env.action_count(), cfg, schedule, &mut rng.init)),
    })
}
