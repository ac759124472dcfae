//! DQN and double DQN with experience replay and a soft-updated target network.

use rand::Rng;

use super::explore::{select_action, ExplorationSchedule};
use super::replay::{ReplayMemory, Transition};
use super::{Agent, AgentConfig, AgentRng};
use crate::env::{ActionIndex, EnvState, OffloadEnv, StepOutcome, FEATURES};
use crate::error::Result;
use crate::nn::{argmax, GradientSet, QNetwork, Sample};

/// How the bootstrap value of the next state is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetRule {
    /// `max_a' Q_target(s', a')`
    Dqn,
    /// `Q_target(s', argmax_a Q_primary(s', a))`
    Ddqn,
}

fn bootstrap(reward: f64, terminal: bool, gamma: f64, next_value: impl FnOnce() -> f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * next_value()
    }
}

pub fn dqn_target(reward: f64, next_state: &[f64], target_net: &QNetwork, gamma: f64, terminal: bool) -> Result<f64> {
    if terminal {
        return Ok(reward);
    }
    let q = target_net.forward(next_state)?;
    Ok(bootstrap(reward, false, gamma, || q[argmax(&q)]))
}

pub fn ddqn_target(
    reward: f64,
    next_state: &[f64],
    primary_net: &QNetwork,
    target_net: &QNetwork,
    gamma: f64,
    terminal: bool,
) -> Result<f64> {
    if terminal {
        return Ok(reward);
    }
    let a = argmax(&primary_net.forward(next_state)?);
    let q = target_net.forward(next_state)?;
    Ok(bootstrap(reward, false, gamma, || q[a]))
}

/// Targets for a whole minibatch, evaluated with batched forward passes.
pub(crate) fn batch_targets(
    rule: TargetRule,
    batch: &[&Transition],
    primary: &QNetwork,
    target: &QNetwork,
    gamma: f64,
) -> Result<Vec<f64>> {
    let live: Vec<usize> = (0..batch.len()).filter(|i| !batch[*i].terminal).collect();
    let mut ys: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    if live.is_empty() {
        return Ok(ys);
    }
    let mut xs = Vec::with_capacity(live.len() * FEATURES);
    for i in &live {
        xs.extend_from_slice(&batch[*i].next_state);
    }
    let width = target.output_dim();
    let q_target = target.forward_batch(&xs, live.len())?;
    let q_primary = match rule {
        TargetRule::Dqn => None,
        TargetRule::Ddqn => Some(primary.forward_batch(&xs, live.len())?),
    };
    for (row, i) in live.iter().enumerate() {
        let qt = &q_target[row * width..(row + 1) * width];
        let pick = match &q_primary {
            None => argmax(qt),
            Some(qp) => argmax(&qp[row * width..(row + 1) * width]),
        };
        ys[*i] = bootstrap(batch[*i].reward, false, gamma, || qt[pick]);
    }
    Ok(ys)
}

#[derive(Debug, Clone)]
pub struct DeepQAgent {
    rule: TargetRule,
    primary: QNetwork,
    target: QNetwork,
    memory: ReplayMemory,
    schedule: ExplorationSchedule,
    grads: GradientSet,
    learning_rate: f64,
    gamma: f64,
    batch_size: usize,
    target_update_period: usize,
    tau: f64,
    max_grad_norm: f64,
    steps: usize,
    updates: usize,
}

impl DeepQAgent {
    pub fn new<R: Rng + ?Sized>(
        rule: TargetRule,
        actions: usize,
        cfg: &AgentConfig,
        schedule: ExplorationSchedule,
        rng: &mut R,
    ) -> Self {
        let primary = QNetwork::for_actions(FEATURES, actions, rng);
        Self::with_network(rule, primary, cfg, schedule)
    }

    /// Starts from the given primary weights; the target begins as a copy.
    pub fn with_network(rule: TargetRule, primary: QNetwork, cfg: &AgentConfig, schedule: ExplorationSchedule) -> Self {
        Self {
            rule,
            target: primary.clone(),
            grads: GradientSet::zeros_like(&primary),
            primary,
            memory: ReplayMemory::new(cfg.replay_capacity),
            schedule,
            learning_rate: cfg.learning_rate,
            gamma: cfg.discount,
            batch_size: cfg.batch_size,
            target_update_period: cfg.target_update_period,
            tau: cfg.tau,
            max_grad_norm: cfg.max_grad_norm,
            steps: 0,
            updates: 0,
        }
    }

    pub fn rule(&self) -> TargetRule {
        self.rule
    }

    pub fn primary(&self) -> &QNetwork {
        &self.primary
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    /// Gradient steps taken so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Stores a transition and, once the memory holds a full minibatch, takes
    /// one gradient step. Every `target_update_period` calls the target is
    /// soft-updated. Returns the minibatch loss when a step was taken.
    pub fn learn<R: Rng + ?Sized>(&mut self, t: Transition, rng: &mut R) -> Result<Option<f64>> {
        self.memory.push(t);
        self.steps += 1;
        let mut loss = None;
        if let Some(batch) = self.memory.sample(self.batch_size, rng) {
            let ys = batch_targets(self.rule, &batch, &self.primary, &self.target, self.gamma)?;
            let samples: Vec<Sample> = batch
                .iter()
                .zip(&ys)
                .map(|(t, y)| Sample {
                    state: &t.state,
                    action: t.action,
                    target: *y,
                })
                .collect();
            loss = Some(self.primary.backward_into(&samples, &mut self.grads)?);
            let norm = self.grads.norm();
            if self.max_grad_norm > 0.0 && norm > self.max_grad_norm {
                self.grads.scale(self.max_grad_norm / norm);
            }
            self.primary.sgd_update(&self.grads, self.learning_rate)?;
            self.updates += 1;
        }
        if self.steps % self.target_update_period == 0 {
            self.target.soft_update(&self.primary, self.tau)?;
        }
        Ok(loss)
    }
}

impl Agent for DeepQAgent {
    fn act(&mut self, env: &OffloadEnv, state: &EnvState, rng: &mut AgentRng) -> ActionIndex {
        let x = env.features(state);
        let primary = &self.primary;
        ActionIndex(select_action(self.schedule.epsilon(), env.action_count(), &mut rng.explore, || {
            primary.forward(&x).expect("features are finite")
        }))
    }

    fn observe(
        &mut self,
        env: &OffloadEnv,
        state: &EnvState,
        action: ActionIndex,
        outcome: &StepOutcome,
        rng: &mut AgentRng,
    ) -> Result<()> {
        let t = Transition {
            state: env.features(state),
            action: action.0,
            reward: outcome.reward,
            next_state: env.features(&outcome.next_state),
            terminal: outcome.terminal,
        };
        self.learn(t, &mut rng.minibatch)?;
        Ok(())
    }

    fn end_episode(&mut self) {
        self.schedule.advance();
    }

    fn epsilon(&self) -> f64 {
        self.schedule.epsilon()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Single linear layer whose outputs are exactly `values` for any input.
    fn constant_net(values: &[f64]) -> QNetwork {
        let layer = Dense::from_parts(FEATURES, values.len(), vec![0.0; FEATURES * values.len()], values.to_vec()).unwrap();
        QNetwork::from_layers(vec![layer]).unwrap()
    }

    #[test]
    fn dqn_target_examples() {
        let s = [0.1; FEATURES];
        let net = constant_net(&[1.0, 5.0, 3.0]);
        assert_eq!(dqn_target(20.0, &s, &net, 0.9985, true).unwrap(), 20.0);
        assert_eq!(dqn_target(-1.0, &s, &net, 0.0, false).unwrap(), -1.0);
        let y = dqn_target(-1.0, &s, &net, 0.9985, false).unwrap();
        assert!((y - 3.9925).abs() < 1e-12);
    }

    #[test]
    fn ddqn_uses_primary_argmax() {
        let s = [0.1; FEATURES];
        let primary = constant_net(&[0.0, 0.0, 1.0]);
        let target = constant_net(&[9.0, 0.0, 4.0]);
        let y = ddqn_target(0.0, &s, &primary, &target, 1.0, false).unwrap();
        assert_eq!(y, 4.0);
        assert_eq!(ddqn_target(7.0, &s, &primary, &target, 1.0, true).unwrap(), 7.0);
    }

    #[test]
    fn batch_targets_match_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let primary = QNetwork::new(&[FEATURES, 16, 9], &mut rng).unwrap();
        let target = QNetwork::new(&[FEATURES, 16, 9], &mut rng).unwrap();
        let ts: Vec<Transition> = (0..6)
            .map(|i| Transition {
                state: [0.0; FEATURES],
                action: 0,
                reward: if i % 2 == 0 { 20.0 } else { -1.0 },
                next_state: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                terminal: i == 3,
            })
            .collect();
        let refs: Vec<&Transition> = ts.iter().collect();
        for rule in [TargetRule::Dqn, TargetRule::Ddqn] {
            let ys = batch_targets(rule, &refs, &primary, &target, 0.9).unwrap();
            for (t, y) in ts.iter().zip(&ys) {
                let single = match rule {
                    TargetRule::Dqn => dqn_target(t.reward, &t.next_state, &target, 0.9, t.terminal),
                    TargetRule::Ddqn => ddqn_target(t.reward, &t.next_state, &primary, &target, 0.9, t.terminal),
                }
                .unwrap();
                assert!((single - y).abs() < 1e-12);
            }
        }
    }

    fn small_agent(rule: TargetRule, cfg: &AgentConfig) -> DeepQAgent {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = QNetwork::new(&[FEATURES, 8, 4], &mut rng).unwrap();
        let schedule = ExplorationSchedule::new(1.0, 0.9, 0.01).unwrap();
        DeepQAgent::with_network(rule, net, cfg, schedule)
    }

    fn transition(i: usize) -> Transition {
        Transition {
            state: [i as f64 * 0.1; FEATURES],
            action: i % 4,
            reward: 20.0,
            next_state: [0.2; FEATURES],
            terminal: false,
        }
    }

    #[test]
    fn no_update_before_full_batch() {
        let cfg = AgentConfig::default();
        let mut agent = small_agent(TargetRule::Dqn, &cfg);
        let before = agent.primary().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..cfg.batch_size - 1 {
            assert!(agent.learn(transition(i), &mut rng).unwrap().is_none());
        }
        assert_eq!(agent.primary(), &before);
        assert!(agent.learn(transition(99), &mut rng).unwrap().is_some());
        assert_ne!(agent.primary(), &before);
    }

    #[test]
    fn target_changes_only_on_soft_updates() {
        let cfg = AgentConfig {
            batch_size: 2,
            target_update_period: 5,
            ..AgentConfig::default()
        };
        let mut agent = small_agent(TargetRule::Ddqn, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut last_target = agent.target().clone();
        for step in 1..=20 {
            agent.learn(transition(step), &mut rng).unwrap();
            if step % 5 == 0 {
                assert_ne!(agent.target(), &last_target);
                last_target = agent.target().clone();
            } else {
                assert_eq!(agent.target(), &last_target);
            }
        }
    }

    fn step_length(clip: f64) -> f64 {
        let cfg = AgentConfig {
            batch_size: 1,
            learning_rate: 1.0,
            max_grad_norm: clip,
            ..AgentConfig::default()
        };
        let mut agent = small_agent(TargetRule::Dqn, &cfg);
        let before = agent.primary().clone();
        agent.learn(transition(0), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        before
            .layers()
            .iter()
            .zip(agent.primary().layers())
            .flat_map(|(a, b)| {
                let w = a.weights().iter().zip(b.weights());
                w.chain(a.bias().iter().zip(b.bias())).map(|(x, y)| (x - y) * (x - y))
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn gradient_clip_bounds_the_step() {
        assert!(step_length(0.0) > 1.0);
        assert!((step_length(0.5) - 0.5).abs() < 1e-9);
    }
}
