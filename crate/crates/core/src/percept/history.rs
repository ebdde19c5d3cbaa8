use super::sensors::NEIGHBORS;
use crate::trafficsim::WorldState;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Steps of position history kept per neighbor.
pub const HISTORY_LEN: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryStep {
    pub time_step: u64,
    pub ids: [Option<usize>; NEIGHBORS],
    pub positions: [[f64; 2]; NEIGHBORS],
    pub mask: [bool; NEIGHBORS],
}

/// Rolling window of neighbor positions. Each tracked id owns one slot for
/// as long as it stays among the nearest neighbors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryBuffer {
    steps: VecDeque<HistoryStep>,
    slots: [Option<usize>; NEIGHBORS],
}

impl HistoryBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> impl Iterator<Item = &HistoryStep> {
        self.steps.iter()
    }

    pub fn slot_of(&self, id: usize) -> Option<usize> {
        self.slots.iter().position(|s| *s == Some(id))
    }

    /// Appends the positions of `neighbor_ids` at the current time step.
    pub fn push(&mut self, world: &WorldState, neighbor_ids: &[usize]) {
        for slot in self.slots.iter_mut() {
            if slot.is_some_and(|id| !neighbor_ids.contains(&id)) {
                *slot = None;
            }
        }
        for &id in neighbor_ids.iter().take(NEIGHBORS) {
            if self.slot_of(id).is_some() {
                continue;
            }
            let free = self.slots.iter().position(Option::is_none).expect("at most NEIGHBORS ids");
            self.slots[free] = Some(id);
            // A newly tracked id starts with no past.
            for step in self.steps.iter_mut() {
                step.mask[free] = false;
                step.positions[free] = [0.0, 0.0];
                step.ids[free] = None;
            }
        }
        let mut step = HistoryStep {
            time_step: world.time_step,
            ids: self.slots,
            positions: [[0.0; 2]; NEIGHBORS],
            mask: [false; NEIGHBORS],
        };
        for (k, slot) in self.slots.iter().enumerate() {
            if let Some(v) = slot.and_then(|id| world.vehicle(id)) {
                step.positions[k] = [v.x, v.y];
                step.mask[k] = true;
            }
        }
        self.steps.push_back(step);
        if self.steps.len() > HISTORY_LEN {
            self.steps.pop_front();
        }
    }

    /// Positions and validity of one slot, oldest first, front-padded with
    /// masked zeros to exactly [`HISTORY_LEN`] entries.
    pub fn slot_history(&self, slot: usize) -> ([[f64; 2]; HISTORY_LEN], [bool; HISTORY_LEN]) {
        let mut pos = [[0.0; 2]; HISTORY_LEN];
        let mut mask = [false; HISTORY_LEN];
        let pad = HISTORY_LEN - self.steps.len();
        for (i, step) in self.steps.iter().enumerate() {
            pos[pad + i] = step.positions[slot];
            mask[pad + i] = step.mask[slot];
        }
        (pos, mask)
    }

    /// History of vehicle `id`, if it is currently tracked.
    pub fn history_of(&self, id: usize) -> Option<([[f64; 2]; HISTORY_LEN], [bool; HISTORY_LEN])> {
        self.slot_of(id).map(|s| self.slot_history(s))
    }
}

/// Functional form of [`HistoryBuffer::push`].
pub fn push_history(mut buffer: HistoryBuffer, world: &WorldState, neighbor_ids: &[usize]) -> HistoryBuffer {
    buffer.push(world, neighbor_ids);
    buffer
}
