//! Online replay ring plus symmetric demo/online minibatch sampling.
//!
//! Demonstrations stay in their own immutable store and are never evicted.

use crate::demos::DemoDataset;
use crate::envs::Transition;
use crate::error::{Error, Result};
use crate::numcore::{RealMatrix, SeededRng};

/// Default online capacity in transitions.
pub const DEFAULT_CAPACITY: usize = 200_000;

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    items: Vec<Transition>,
    write_index: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            obs_dim,
            act_dim,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            write_index: 0,
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

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.obs.len() != self.obs_dim
            || t.next_obs.len() != self.obs_dim
            || t.action.len() != self.act_dim
        {
            return Err(Error::contract(format!(
                "transition dims ({}, {}) do not match buffer ({}, {})",
                t.obs.len(),
                t.action.len(),
                self.obs_dim,
                self.act_dim
            )));
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.write_index] = t;
        }
        self.write_index = (self.write_index + 1) % self.capacity;
        Ok(())
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Stored transitions, oldest first.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.write_index
        };
        self.items[split..].iter().chain(self.items[..split].iter())
    }
}

/// Flat view of a demo dataset for uniform sampling.
#[derive(Debug, Clone)]
pub struct DemoStore {
    items: Vec<Transition>,
}

impl DemoStore {
    pub fn new(demos: &DemoDataset) -> Self {
        Self {
            items: demos.transitions().cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Online(usize),
    Demo(usize),
}

/// Struct-of-arrays minibatch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: RealMatrix,
    pub actions: RealMatrix,
    pub rewards: Vec<f64>,
    pub next_obs: RealMatrix,
    pub dones: Vec<bool>,
    pub sources: Vec<Source>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions<'a>(items: impl IntoIterator<Item = (&'a Transition, Source)>) -> Self {
        let mut obs = Vec::new();
        let mut actions = Vec::new();
        let mut next_obs = Vec::new();
        let mut rewards = Vec::new();
        let mut dones = Vec::new();
        let mut sources = Vec::new();
        let mut dims = (0, 0);
        for (t, s) in items {
            dims = (t.obs.len(), t.action.len());
            obs.extend_from_slice(&t.obs);
            actions.extend_from_slice(&t.action);
            next_obs.extend_from_slice(&t.next_obs);
            rewards.push(t.reward);
            dones.push(t.done);
            sources.push(s);
        }
        let n = rewards.len();
        Self {
            obs: RealMatrix::from_vec(n, dims.0, obs).expect("consistent dims"),
            actions: RealMatrix::from_vec(n, dims.1, actions).expect("consistent dims"),
            rewards,
            next_obs: RealMatrix::from_vec(n, dims.0, next_obs).expect("consistent dims"),
            dones,
            sources,
        }
    }

    pub fn demo_count(&self) -> usize {
        self.sources
            .iter()
            .filter(|s| matches!(s, Source::Demo(_)))
            .count()
    }
}

/// Draws `batch/2` uniform samples (with replacement) from each source, then
/// shuffles. With an empty online buffer the whole batch comes from demos.
pub fn sample_symmetric(
    online: &ReplayBuffer,
    demos: &DemoStore,
    batch: usize,
    rng: &mut SeededRng,
) -> Result<Batch> {
    if batch == 0 || batch % 2 != 0 {
        return Err(Error::contract(format!("batch size {batch} must be even and positive")));
    }
    let mut picks = Vec::with_capacity(batch);
    match (online.is_empty(), demos.is_empty()) {
        (true, true) => return Err(Error::contract("both replay sources are empty")),
        (true, false) => {
            picks.extend((0..batch).map(|_| Source::Demo(rng.below(demos.len()))));
        }
        (false, true) => {
            picks.extend((0..batch).map(|_| Source::Online(rng.below(online.len()))));
        }
        (false, false) => {
            picks.extend((0..batch / 2).map(|_| Source::Online(rng.below(online.len()))));
            picks.extend((0..batch / 2).map(|_| Source::Demo(rng.below(demos.len()))));
        }
    }
    rng.shuffle(&mut picks);
    Ok(Batch::from_transitions(picks.into_iter().map(|s| {
        let t = match s {
            Source::Online(i) => online.get(i),
            Source::Demo(i) => demos.get(i),
        };
        (t, s)
    })))
}
