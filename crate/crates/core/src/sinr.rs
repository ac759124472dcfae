//! Finite-state Markov chain for the access point to edge server SINR.

use rand::Rng;

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-9;

/// SINR levels in dB used by default.
pub const DEFAULT_STATES_DB: [f64; 5] = [-5.0, -3.0, 0.0, 3.0, 5.0];

/// Transition matrix as printed in the reference model. Rows 2-4 do not sum
/// to one; use [`default_transition`] for the normalized version.
pub const RAW_TRANSITION: [[f64; 5]; 5] = [
    [0.600, 0.250, 0.100, 0.040, 0.010],
    [0.250, 0.300, 0.250, 0.100, 0.040],
    [0.100, 0.250, 0.320, 0.250, 0.100],
    [0.040, 0.100, 0.250, 0.300, 0.250],
    [0.010, 0.040, 0.100, 0.250, 0.600],
];

/// [`RAW_TRANSITION`] with each row divided by its sum.
pub fn default_transition() -> Vec<Vec<f64>> {
    normalize_rows(&RAW_TRANSITION.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

pub fn normalize_rows(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    m.iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.iter().map(|p| p / s).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrChain {
    states_db: Vec<f64>,
    transition: Vec<Vec<f64>>,
    current: usize,
}

impl SinrChain {
    pub fn new(states_db: Vec<f64>, transition: Vec<Vec<f64>>, seed_index: usize) -> Result<Self> {
        validate(&states_db, &transition)?;
        if seed_index >= states_db.len() {
            return Err(Error::ShapeMismatch(format!(
                "seed index {seed_index} out of {} states",
                states_db.len()
            )));
        }
        Ok(Self {
            states_db,
            transition,
            current: seed_index,
        })
    }

    pub fn states_db(&self) -> &[f64] {
        &self.states_db
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn len(&self) -> usize {
        self.states_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states_db.is_empty()
    }

    pub fn current_index(&self) -> usize {
        self.current
    }

    pub fn current_db(&self) -> f64 {
        self.states_db[self.current]
    }

    pub fn set_index(&mut self, index: usize) {
        assert!(index < self.states_db.len(), "state index out of range");
        self.current = index;
    }

    /// Uniformly random starting state.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        self.current = rng.random_range(0..self.states_db.len());
        self.current_db()
    }

    /// Moves one step along the chain and returns the new SINR in dB.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let row = &self.transition[self.current];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        // fall back to the last state with nonzero mass if rounding leaves u above the cumulative sum
        let mut next = row.iter().rposition(|p| *p > 0.0).unwrap_or(self.current);
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = j;
                break;
            }
        }
        self.current = next;
        self.current_db()
    }

    /// Stationary distribution by power iteration.
    pub fn stationary(&self, tol: f64) -> Vec<f64> {
        let n = self.len();
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..1_000_000 {
            let mut next = vec![0.0; n];
            for (i, row) in self.transition.iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    next[j] += pi[i] * p;
                }
            }
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < tol {
                break;
            }
        }
        pi
    }
}

pub fn validate(states_db: &[f64], transition: &[Vec<f64>]) -> Result<()> {
    let n = states_db.len();
    if n == 0 {
        return Err(Error::ShapeMismatch("no SINR states".into()));
    }
    if transition.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} transition rows for {n} states",
            transition.len()
        )));
    }
    for (i, row) in transition.iter().enumerate() {
        if row.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::NonStochasticRow {
                row: i,
                sum: row.iter().sum(),
            });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NonStochasticRow { row: i, sum });
        }
    }
    Ok(())
}
