//! Fixed-capacity ring of transitions with uniform sampling (with replacement).

use rand::Rng;

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// 1.0 for a true terminal state, 0.0 otherwise (including truncation).
    pub done_mask: f64,
}

/// A mini-batch in row-major flat arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub done_masks: Vec<f64>,
}

impl Batch {
    pub fn from_transitions(transitions: &[Transition]) -> Result<Self> {
        let first = transitions
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
        let (state_dim, action_dim) = (first.state.len(), first.action.len());
        let mut batch = Batch::with_capacity(transitions.len(), state_dim, action_dim);
        for t in transitions {
            check_dim("batch state", state_dim, t.state.len())?;
            check_dim("batch next state", state_dim, t.next_state.len())?;
            check_dim("batch action", action_dim, t.action.len())?;
            batch.states.extend_from_slice(&t.state);
            batch.actions.extend_from_slice(&t.action);
            batch.rewards.push(t.reward);
            batch.next_states.extend_from_slice(&t.next_state);
            batch.done_masks.push(t.done_mask);
        }
        batch.len = transitions.len();
        Ok(batch)
    }

    fn with_capacity(n: usize, state_dim: usize, action_dim: usize) -> Self {
        Self {
            len: 0,
            state_dim,
            action_dim,
            states: Vec::with_capacity(n * state_dim),
            actions: Vec::with_capacity(n * action_dim),
            rewards: Vec::with_capacity(n),
            next_states: Vec::with_capacity(n * state_dim),
            done_masks: Vec::with_capacity(n),
        }
    }

    pub fn transition(&self, i: usize) -> Transition {
        let (sd, ad) = (self.state_dim, self.action_dim);
        Transition {
            state: self.states[i * sd..(i + 1) * sd].to_vec(),
            action: self.actions[i * ad..(i + 1) * ad].to_vec(),
            reward: self.rewards[i],
            next_state: self.next_states[i * sd..(i + 1) * sd].to_vec(),
            done_mask: self.done_masks[i],
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    done_masks: Vec<f64>,
    size: usize,
    write_cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            done_masks: Vec::new(),
            size: 0,
            write_cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn write_cursor(&self) -> usize {
        self.write_cursor
    }

    /// Stores `t`, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        check_dim("transition state", self.state_dim, t.state.len())?;
        check_dim("transition next state", self.state_dim, t.next_state.len())?;
        check_dim("transition action", self.action_dim, t.action.len())?;
        if t.done_mask != 0.0 && t.done_mask != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "done_mask must be 0 or 1, got {}",
                t.done_mask
            )));
        }
        let (sd, ad, slot) = (self.state_dim, self.action_dim, self.write_cursor);
        if self.size < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_states.extend_from_slice(&t.next_state);
            self.done_masks.push(t.done_mask);
            self.size += 1;
        } else {
            self.states[slot * sd..(slot + 1) * sd].copy_from_slice(&t.state);
            self.actions[slot * ad..(slot + 1) * ad].copy_from_slice(&t.action);
            self.rewards[slot] = t.reward;
            self.next_states[slot * sd..(slot + 1) * sd].copy_from_slice(&t.next_state);
            self.done_masks[slot] = t.done_mask;
        }
        self.write_cursor = (slot + 1) % self.capacity;
        Ok(())
    }

    /// The transition in storage slot `slot` (not age order).
    pub fn get(&self, slot: usize) -> Option<Transition> {
        (slot < self.size).then(|| {
            let (sd, ad) = (self.state_dim, self.action_dim);
            Transition {
                state: self.states[slot * sd..(slot + 1) * sd].to_vec(),
                action: self.actions[slot * ad..(slot + 1) * ad].to_vec(),
                reward: self.rewards[slot],
                next_state: self.next_states[slot * sd..(slot + 1) * sd].to_vec(),
                done_mask: self.done_masks[slot],
            }
        })
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = Transition> + '_ {
        let start = if self.size < self.capacity { 0 } else { self.write_cursor };
        (0..self.size).filter_map(move |k| self.get((start + k) % self.size))
    }

    /// Slot indices drawn uniformly with replacement from `[0, len)`.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if self.size < batch_size {
            return Err(Error::NotEnoughData {
                needed: batch_size,
                available: self.size,
            });
        }
        Ok((0..batch_size).map(|_| rng.random_range(0..self.size)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        let indices = self.sample_indices(batch_size, rng)?;
        let (sd, ad) = (self.state_dim, self.action_dim);
        let mut batch = Batch::with_capacity(batch_size, sd, ad);
        for &i in &indices {
            batch.states.extend_from_slice(&self.states[i * sd..(i + 1) * sd]);
            batch.actions.extend_from_slice(&self.actions[i * ad..(i + 1) * ad]);
            batch.rewards.push(self.rewards[i]);
            batch.next_states.extend_from_slice(&self.next_states[i * sd..(i + 1) * sd]);
            batch.done_masks.push(self.done_masks[i]);
        }
        batch.len = batch_size;
        Ok(batch)
    }
}
