//! Fixed-capacity experience replay over joint transitions.

use crate::{Error, Result};
use crossway_sim::world::Observation;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One joint decision step: everything the critics and actors need to
/// relearn from it later.
#[derive(Clone, Debug)]
pub struct Transition {
    /// Per-agent observation before the step.
    pub obs: Vec<Observation>,
    /// Per-agent executed action index.
    pub actions: Vec<usize>,
    /// Per-agent reward over the decision window.
    pub rewards: Vec<f64>,
    /// Per-agent observation after the step.
    pub next_obs: Vec<Observation>,
    /// Per-agent terminal flag after the step.
    pub done: Vec<bool>,
}

/// Ring buffer: once full, each push overwrites the oldest transition.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    head: usize,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            items: Vec::new(),
            head: 0,
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.items[index]
    }

    /// Uniform minibatch indices, drawn with replacement. Errs when the
    /// buffer holds fewer transitions than one batch.
    pub fn sample_indices(&self, rng: &mut ChaCha8Rng, batch: usize) -> Result<Vec<usize>> {
        if self.items.len() < batch {
            return Err(Error::BufferUnderflow {
                have: self.items.len(),
                need: batch,
            });
        }
        Ok((0..batch)
            .map(|_| rng.gen_range(0..self.items.len()))
            .collect())
    }
}
