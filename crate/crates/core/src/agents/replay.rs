use std::collections::VecDeque;

use rand::Rng;

use crate::env::FEATURES;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Normalized features of the state the action was taken in.
    pub state: [f64; FEATURES],
    pub action: usize,
    pub reward: f64,
    pub next_state: [f64; FEATURES],
    pub terminal: bool,
}

/// Bounded FIFO of transitions; the oldest entry is evicted once full.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    buffer: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be > 0");
        Self {
            capacity,
            buffer: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buffer.iter()
    }

    /// `n` distinct transitions drawn uniformly, or `None` while fewer than
    /// `n` are stored.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if self.buffer.len() < n {
            return None;
        }
        let idx = rand::seq::index::sample(rng, self.buffer.len(), n);
        Some(idx.iter().map(|i| &self.buffer[i]).collect())
    }
}
