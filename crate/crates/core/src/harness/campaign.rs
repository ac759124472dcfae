use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics;
use crate::agents::{build_agent, train_episode, AgentRng, Algorithm, EpisodeRecord};
use crate::env::{EnvConfig, OffloadEnv};
use crate::error::{Error, Result};
use crate::rng::EnvRng;

/// One training run.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// `Some` for sweep cells.
    pub t_require_s: Option<f64>,
    pub records: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    /// Per-step mean reward per episode, averaged over seeds.
    pub mean_reward: Vec<f64>,
    /// Moving average of `mean_reward`; entry `i` belongs to episode `i + window`.
    pub moving_average: Vec<f64>,
    /// 1-based episode at which the seed-mean curve converged.
    pub convergence_episode: usize,
    pub plateau: f64,
    /// Mean per-step reward over the final window of episodes.
    pub final_average: f64,
    /// Mean per-step reward over the whole run.
    pub overall_average: f64,
    pub per_seed_convergence: Vec<(u64, usize)>,
    pub per_seed_plateau: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSummary {
    pub episodes: usize,
    pub window: usize,
    pub convergence_fraction: f64,
    pub final_window: usize,
    pub algorithms: Vec<AlgorithmSummary>,
}

impl CampaignSummary {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub cells: Vec<CellResult>,
    pub summary: CampaignSummary,
}

/// Trains `algorithm` on a fresh environment. Environment streams depend on
/// the seed only, so every algorithm faces the same packet sizes, channels
/// and requirements for a given seed.
pub fn run_cell(env_cfg: &EnvConfig, cfg: &ExperimentConfig, algorithm: Algorithm, seed: u64) -> Result<Vec<EpisodeRecord>> {
    let episodes = cfg.run.episodes;
    let mut env = OffloadEnv::new(env_cfg.clone())?;
    let mut env_rng = EnvRng::from_seed(seed);
    let mut agent_rng = AgentRng::from_seed(seed);
    let mut agent = build_agent(algorithm, &env, &cfg.agent, episodes, &mut agent_rng)?;
    (0..episodes)
        .map(|ep| train_episode(agent.as_mut(), &mut env, &mut env_rng, &mut agent_rng, ep + 1))
        .collect()
}

fn per_step(records: &[EpisodeRecord]) -> Vec<f64> {
    records.iter().map(|r| r.reward_mean).collect()
}

fn summarize(cfg: &ExperimentConfig, cells: &[CellResult]) -> Result<CampaignSummary> {
    let run = &cfg.run;
    let mut algorithms = Vec::new();
    for &algorithm in &run.algorithms {
        let mine: Vec<&CellResult> = cells.iter().filter(|c| c.algorithm == algorithm).collect();
        if mine.iter().any(|c| c.records.is_empty()) || mine.is_empty() {
            return Err(Error::NoRecords);
        }
        let curves: Vec<Vec<f64>> = mine.iter().map(|c| per_step(&c.records)).collect();
        let mean_reward = metrics::pointwise_mean(&curves);
        let moving_average = metrics::moving_average(&mean_reward, run.moving_average_window);
        let n = mean_reward.len();
        let convergence_episode =
            metrics::convergence_episode(&moving_average, n, run.convergence_fraction).ok_or(Error::NoRecords)?;
        let mut per_seed_convergence = Vec::new();
        let mut per_seed_plateau = Vec::new();
        for (cell, curve) in mine.iter().zip(&curves) {
            let ma = metrics::moving_average(curve, run.moving_average_window);
            let ep = metrics::convergence_episode(&ma, curve.len(), run.convergence_fraction).ok_or(Error::NoRecords)?;
            per_seed_convergence.push((cell.seed, ep));
            per_seed_plateau.push((cell.seed, metrics::plateau(&ma).unwrap_or(f64::NAN)));
        }
        algorithms.push(AlgorithmSummary {
            algorithm,
            plateau: metrics::plateau(&moving_average).unwrap_or(f64::NAN),
            final_average: metrics::tail_mean(&mean_reward, run.final_window).unwrap_or(f64::NAN),
            overall_average: metrics::tail_mean(&mean_reward, n).unwrap_or(f64::NAN),
            mean_reward,
            moving_average,
            convergence_episode,
            per_seed_convergence,
            per_seed_plateau,
        });
    }
    Ok(CampaignSummary {
        episodes: run.episodes,
        window: run.moving_average_window,
        convergence_fraction: run.convergence_fraction,
        final_window: run.final_window,
        algorithms,
    })
}

/// Trains every selected algorithm once per seed. Cells run on the rayon
/// pool; results are collected in (algorithm, seed) order so the outcome does
/// not depend on scheduling.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<Campaign> {
    cfg.validate()?;
    let jobs: Vec<(Algorithm, u64)> = cfg
        .run
        .algorithms
        .iter()
        .flat_map(|a| cfg.run.seeds.iter().map(move |s| (*a, *s)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(algorithm, seed)| {
            Ok(CellResult {
                algorithm,
                seed,
                t_require_s: None,
                records: run_cell(&cfg.env, cfg, algorithm, seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(cfg, &cells)?;
    Ok(Campaign { cells, summary })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t_require_s: f64,
    /// Final average per-step reward, seed mean, in `SweepTable::algorithms` order.
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub algorithms: Vec<Algorithm>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Column of final rewards for `algorithm`, one per sweep point.
    pub fn column(&self, algorithm: Algorithm) -> Option<Vec<f64>> {
        let i = self.algorithms.iter().position(|a| *a == algorithm)?;
        Some(self.rows.iter().map(|r| r.rewards[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub cells: Vec<CellResult>,
    pub table: SweepTable,
}

/// Trains every selected algorithm at each fixed requirement in `t_values`.
pub fn sweep_requirement(cfg: &ExperimentConfig, t_values: &[f64]) -> Result<Sweep> {
    cfg.validate()?;
    if t_values.is_empty() {
        return Err(Error::config("run.sweep_t_require_s", "need at least one value"));
    }
    if let Some(t) = t_values.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::config("run.sweep_t_require_s", format!("values must be > 0, got {t}")));
    }
    let mut jobs = Vec::new();
    for &t in t_values {
        for &a in &cfg.run.algorithms {
            for &s in &cfg.run.seeds {
                jobs.push((t, a, s));
            }
        }
    }
    let cells = jobs
        .par_iter()
        .map(|&(t, algorithm, seed)| {
            let env_cfg = EnvConfig {
                t_require_fixed_s: Some(t),
                ..cfg.env.clone()
            };
            Ok(CellResult {
                algorithm,
                seed,
                t_require_s: Some(t),
                records: run_cell(&env_cfg, cfg, algorithm, seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for &t in t_values {
        let mut rewards = Vec::new();
        for &a in &cfg.run.algorithms {
            let finals: Vec<f64> = cells
                .iter()
                .filter(|c| c.algorithm == a && c.t_require_s == Some(t))
                .map(|c| metrics::tail_mean(&per_step(&c.records), cfg.run.final_window).unwrap_or(f64::NAN))
                .collect();
            rewards.push(finals.iter().sum::<f64>() / finals.len() as f64);
        }
        rows.push(SweepRow { t_require_s: t, rewards });
    }
    Ok(Sweep {
        cells,
        table: SweepTable {
            algorithms: cfg.run.algorithms.clone(),
            rows,
        },
    })
}
