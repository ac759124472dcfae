use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::argmax;

/// Multiplicative ε decay applied once per episode, floored at `epsilon_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationSchedule {
    epsilon: f64,
    decay: f64,
    min: f64,
}

impl ExplorationSchedule {
    pub fn new(epsilon: f64, decay: f64, min: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&min) || !(min..=1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon", "need 0 <= epsilon_min <= epsilon <= 1"));
        }
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::invalid("epsilon_decay", "must be in (0, 1)"));
        }
        Ok(Self {
            epsilon,
            decay,
            min,
        })
    }

    /// Decay that takes `start` down to `min` after `fraction * episodes` episodes.
    pub fn decay_to_reach(start: f64, min: f64, episodes: usize, fraction: f64) -> f64 {
        let n = (fraction * episodes as f64).max(1.0);
        (min / start).powf(1.0 / n)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn epsilon_min(&self) -> f64 {
        self.min
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn advance(&mut self) {
        self.epsilon = (self.epsilon * self.decay).max(self.min);
    }
}

/// ε-greedy choice. `q_values` is only evaluated when the draw exploits.
pub fn select_action<R, F>(epsilon: f64, actions: usize, rng: &mut R, q_values: F) -> usize
where
    R: Rng + ?Sized,
    F: FnOnce() -> Vec<f64>,
{
    let u: f64 = rng.random();
    if u < epsilon {
        rng.random_range(0..actions)
    } else {
        argmax(&q_values())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let actions = 1001;
        let draws = 100_000;
        let mut counts = vec![0usize; actions];
        for _ in 0..draws {
            counts[select_action(1.0, actions, &mut rng, || unreachable!())] += 1;
        }
        let e = draws as f64 / actions as f64;
        let chi2: f64 = counts.iter().map(|c| (*c as f64 - e).powi(2) / e).sum();
        // chi-square with 1000 dof: mean 1000, sd ~44.7; 1200 is ~4.5 sd
        assert!(chi2 < 1200.0, "chi2 = {chi2}");
    }

    #[test]
    fn greedy_picks_max_and_lowest_tie() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut q = vec![0.0; 12];
        q[7] = 1.0;
        for _ in 0..100 {
            assert_eq!(select_action(0.0, 12, &mut rng, || q.clone()), 7);
        }
        let mut q = vec![0.0; 12];
        q[3] = 2.0;
        q[9] = 2.0;
        for _ in 0..100 {
            assert_eq!(select_action(0.0, 12, &mut rng, || q.clone()), 3);
        }
    }

    #[test]
    fn epsilon_monotone_and_floored() {
        let d = ExplorationSchedule::decay_to_reach(1.0, 0.001, 1000, 0.8);
        let mut s = ExplorationSchedule::new(1.0, d, 0.001).unwrap();
        let mut prev = s.epsilon();
        for ep in 1..=1000 {
            s.advance();
            assert!(s.epsilon() <= prev);
            assert!(s.epsilon() >= 0.001);
            if ep == 800 {
                assert!((s.epsilon() - 0.001).abs() < 1e-9);
            }
            prev = s.epsilon();
        }
        assert_eq!(s.epsilon(), 0.001);
    }

    #[test]
    fn invalid_schedules() {
        assert!(ExplorationSchedule::new(0.5, 0.9, 0.6).is_err());
        assert!(ExplorationSchedule::new(1.0, 1.0, 0.0).is_err());
        assert!(ExplorationSchedule::new(1.2, 0.9, 0.0).is_err());
    }
}
