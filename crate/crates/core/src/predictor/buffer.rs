//! Replay buffer: a bounded ring of transitions in episode order, with the
//! slot measurements they came from.

use std::collections::VecDeque;

use crate::env::SlotMeasurement;
use crate::error::{Error, Result};

/// One observed step: `(state, action, next_state)` in an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub episode: u64,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Entry {
    transition: Transition,
    measurement: Option<SlotMeasurement>,
}

/// Bounded transition store. Insertions past capacity evict the oldest entry.
#[derive(Debug, Clone)]
pub struct TrajectoryBuffer {
    capacity: usize,
    entries: VecDeque<Entry>,
    state_dim: usize,
    action_dim: usize,
}

impl TrajectoryBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        Self { capacity, entries: VecDeque::with_capacity(capacity.min(1 << 20)), state_dim, action_dim }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn record(&mut self, transition: Transition) -> Result<()> {
        self.record_with(transition, None)
    }

    pub fn record_with(
        &mut self,
        transition: Transition,
        measurement: Option<SlotMeasurement>,
    ) -> Result<()> {
        if transition.state.len() != self.state_dim || transition.next_state.len() != self.state_dim {
            return Err(Error::Shape { expected: self.state_dim, got: transition.state.len() });
        }
        if transition.action.len() != self.action_dim {
            return Err(Error::Shape { expected: self.action_dim, got: transition.action.len() });
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(Entry { transition, measurement });
        Ok(())
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.entries[i].transition
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter().map(|e| &e.transition)
    }

    pub fn measurements(&self) -> impl Iterator<Item = &SlotMeasurement> {
        self.entries.iter().filter_map(|e| e.measurement.as_ref())
    }

    /// Start indices of every length-`len` run of consecutive entries from a
    /// single episode. Entries are inserted in slot order, so consecutive
    /// same-episode entries form a contiguous trajectory piece.
    pub fn window_starts(&self, len: usize) -> Vec<usize> {
        if len == 0 || self.entries.len() < len {
            return Vec::new();
        }
        let mut starts = Vec::new();
        'outer: for start in 0..=(self.entries.len() - len) {
            let episode = self.entries[start].transition.episode;
            for i in start + 1..start + len {
                if self.entries[i].transition.episode != episode {
                    continue 'outer;
                }
            }
            starts.push(start);
        }
        starts
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }
}
