//! Fixed-capacity ring buffer with uniform without-replacement sampling.

use rand::Rng;

use super::{AgentError, Transition};

#[derive(Debug, Clone)]
pub struct ReplayBuffer<A> {
    capacity: usize,
    items: Vec<Transition<A>>,
    next: usize,
    inserted: u64,
}

impl<A> ReplayBuffer<A> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay capacity must be >= 1");
        ReplayBuffer {
            capacity,
            items: Vec::new(),
            next: 0,
            inserted: 0,
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

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Appends a transition, evicting the oldest once at capacity.
    pub fn push(&mut self, t: Transition<A>) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    /// Uniform sample of `m` distinct transitions.
    pub fn sample(&self, m: usize, rng: &mut impl Rng) -> Result<Vec<&Transition<A>>, AgentError> {
        if m > self.items.len() {
            return Err(AgentError::InsufficientSamples {
                have: self.items.len(),
                want: m,
            });
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), m)
            .iter()
            .map(|i| &self.items[i])
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<A>> {
        self.items.iter()
    }
}
