use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Direction, ShapeGraph};
use crate::obs::LocalObservation;

/// State reached after a cut, as used for bootstrapping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NextState {
    pub graph: Arc<ShapeGraph>,
    pub candidate_obs: Vec<LocalObservation>,
    /// Target-network value of the state, evaluated when the transition was
    /// recorded.
    pub target_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state_graph: Arc<ShapeGraph>,
    /// Polygon vertex index of the cut site.
    pub chosen_vertex: usize,
    /// Graph node of the cut site.
    pub chosen_node: usize,
    pub local_obs: LocalObservation,
    pub action: Direction,
    pub reward: f64,
    /// `None` for terminal transitions.
    pub next: Option<NextState>,
}

/// Fixed-capacity ring buffer with uniform sampling with replacement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot the next push overwrites once full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            head: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        assert!(t.reward.is_finite(), "non-finite reward");
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn sample<'a>(&'a self, n: usize, rng: &mut impl Rng) -> Vec<&'a Transition> {
        assert!(!self.items.is_empty(), "sampling from an empty buffer");
        (0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect()
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }
}
