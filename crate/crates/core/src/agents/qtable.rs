//! Tabular Q-learning over a discretized state.

use std::collections::HashMap;

use crate::env::{EnvConfig, EnvState};

/// Maps a raw [`EnvState`] to a table key.
///
/// Bins: total bits uniform over the configured range, SINR by chain state,
/// previous latency uniform over `[0, t_prev_max_s]`, and each CPU frequency
/// split at `mean ± std`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    b_range: (f64, f64),
    b_bins: usize,
    sinr_states_db: Vec<f64>,
    t_prev_max_s: f64,
    t_prev_bins: usize,
    f_mvap: (f64, f64),
    f_ecs: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey {
    pub b_total: u8,
    pub sinr: u8,
    pub t_prev: u8,
    pub f_mvap: u8,
    pub f_ecs: u8,
}

impl Discretizer {
    pub fn new(cfg: &EnvConfig, b_bins: usize, t_prev_bins: usize, t_prev_max_s: f64) -> Self {
        let band = |mean: f64| (mean * (1.0 - cfg.cpu_rel_std), mean * (1.0 + cfg.cpu_rel_std));
        Self {
            b_range: cfg.b_total_range(),
            b_bins: b_bins.max(1),
            sinr_states_db: cfg.sinr_states_db.clone(),
            t_prev_max_s,
            t_prev_bins: t_prev_bins.max(1),
            f_mvap: band(cfg.compute.f_mvap_hz),
            f_ecs: band(cfg.compute.f_ecs_hz),
        }
    }

    /// Number of distinct keys this discretizer can produce.
    pub fn key_count(&self) -> usize {
        self.b_bins * self.sinr_states_db.len() * self.t_prev_bins * 9
    }

    pub fn key(&self, s: &EnvState) -> StateKey {
        let (lo, hi) = self.b_range;
        let b = if hi > lo {
            uniform_bin((s.b_total_bits - lo) / (hi - lo), self.b_bins)
        } else {
            0
        };
        let sinr = self
            .sinr_states_db
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (*a - s.sinr_db)
                    .abs()
                    .partial_cmp(&(*b - s.sinr_db).abs())
                    .expect("finite SINR")
            })
            .map_or(0, |(i, _)| i);
        let t = uniform_bin(s.t_total_prev_s / self.t_prev_max_s, self.t_prev_bins);
        StateKey {
            b_total: b as u8,
            sinr: sinr as u8,
            t_prev: t as u8,
            f_mvap: band_bin(s.f_mvap_hz, self.f_mvap),
            f_ecs: band_bin(s.f_ecs_hz, self.f_ecs),
        }
    }
}

fn uniform_bin(frac: f64, bins: usize) -> usize {
    if frac.is_nan() || frac <= 0.0 {
        return 0;
    }
    ((frac * bins as f64) as usize).min(bins - 1)
}

fn band_bin(v: f64, (lo, hi): (f64, f64)) -> u8 {
    if v < lo {
        0
    } else if v > hi {
        2
    } else {
        1
    }
}

/// Q-values per visited key; unseen keys read as all zeros.
#[derive(Debug, Clone)]
pub struct QTable {
    actions: usize,
    values: HashMap<StateKey, Vec<f64>>,
}

impl QTable {
    pub fn new(actions: usize) -> Self {
        Self {
            actions,
            values: HashMap::new(),
        }
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, key: &StateKey, action: usize) -> f64 {
        self.values.get(key).map_or(0.0, |q| q[action])
    }

    pub fn row(&self, key: &StateKey) -> Vec<f64> {
        self.values
            .get(key)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.actions])
    }

    pub fn max(&self, key: &StateKey) -> f64 {
        self.values
            .get(key)
            .map_or(0.0, |q| q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`. A `None`
    /// next key marks a terminal step and drops the bootstrap term.
    pub fn update(
        &mut self,
        key: StateKey,
        action: usize,
        reward: f64,
        next: Option<&StateKey>,
        alpha: f64,
        gamma: f64,
    ) {
        let future = next.map_or(0.0, |k| self.max(k));
        let actions = self.actions;
        let q = &mut self.values.entry(key).or_insert_with(|| vec![0.0; actions])[action];
        *q += alpha * (reward + gamma * future - *q);
    }
}
