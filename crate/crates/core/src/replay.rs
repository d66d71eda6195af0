//! Two-store episodic experience replay.
//!
//! Every step goes to the worker's episode cache and to `memory`. When an
//! episode ends, its undiscounted return is compared against the best return
//! seen so far; an episode that matches or beats it is copied whole into
//! `hmemory`. Sampling draws each transition from `hmemory` with probability
//! `rho` and from `memory` otherwise. Both stores are bounded FIFO queues.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use rand_core::RngCore;

use crate::agent::Batch;
use crate::error::{check_len, Error, Result};
use crate::net::unit_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only for a genuine terminal state; horizon truncation stays false.
    pub terminal: bool,
}

/// `worker_id` in the high 24 bits, per-worker episode index in the low 40.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EpisodeId(pub u64);

impl EpisodeId {
    pub fn new(worker_id: u32, episode_index: u64) -> Self {
        Self(((worker_id as u64) << 40) | (episode_index & ((1 << 40) - 1)))
    }

    pub fn worker_id(self) -> u32 {
        (self.0 >> 40) as u32
    }

    pub fn episode_index(self) -> u64 {
        self.0 & ((1 << 40) - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTransition {
    pub episode: EpisodeId,
    pub transition: Transition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Memory,
    HMemory,
}

/// Bounded queue that evicts its oldest entry on overflow.
#[derive(Debug, Clone)]
pub struct FifoStore<T> {
    capacity: usize,
    entries: VecDeque<T>,
    insert_count: u64,
}

impl<T> FifoStore<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("store capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
            insert_count: 0,
        })
    }

    pub fn push(&mut self, item: T) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(item);
        self.insert_count += 1;
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert_count(&self) -> u64 {
        self.insert_count
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.entries.get(i)
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.entries.iter()
    }
}

/// Per-worker buffer for the episode in progress.
#[derive(Debug, Clone)]
pub struct EpisodeCache {
    worker_id: u32,
    episode_index: u64,
    transitions: Vec<Transition>,
}

impl EpisodeCache {
    pub fn new(worker_id: u32) -> Self {
        Self {
            worker_id,
            episode_index: 0,
            transitions: Vec::new(),
        }
    }

    pub fn worker_id(&self) -> u32 {
        self.worker_id
    }

    pub fn episode_id(&self) -> EpisodeId {
        EpisodeId::new(self.worker_id, self.episode_index)
    }

    pub fn episode_index(&self) -> u64 {
        self.episode_index
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn episode_return(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn push(&mut self, t: Transition) {
        self.transitions.push(t);
    }

    /// Empties the cache and advances to the next episode id.
    pub fn take(&mut self) -> (EpisodeId, Vec<Transition>) {
        let id = self.episode_id();
        self.episode_index += 1;
        (id, core::mem::take(&mut self.transitions))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    pub episode: EpisodeId,
    pub episode_return: f64,
    pub length: usize,
    pub admitted: bool,
    /// Best return after this episode was accounted.
    pub r_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayStats {
    pub memory_len: usize,
    pub hmemory_len: usize,
    pub memory_inserts: u64,
    pub hmemory_inserts: u64,
    pub episodes_finalized: u64,
    pub episodes_admitted: u64,
    pub r_max: f64,
}

#[derive(Debug, Clone)]
pub struct ReplayStore {
    state_dim: usize,
    action_dim: usize,
    memory: FifoStore<StoredTransition>,
    hmemory: FifoStore<StoredTransition>,
    r_max: f64,
    episodes_finalized: u64,
    episodes_admitted: u64,
}

impl ReplayStore {
    pub fn new(state_dim: usize, action_dim: usize, memory_capacity: usize, hmemory_capacity: usize) -> Result<Self> {
        if hmemory_capacity >= memory_capacity {
            return Err(Error::InvalidArgument(alloc::format!(
                "hmemory capacity ({hmemory_capacity}) must be smaller than memory capacity ({memory_capacity})"
            )));
        }
        Ok(Self {
            state_dim,
            action_dim,
            memory: FifoStore::new(memory_capacity)?,
            hmemory: FifoStore::new(hmemory_capacity)?,
            r_max: f64::NEG_INFINITY,
            episodes_finalized: 0,
            episodes_admitted: 0,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn memory(&self) -> &FifoStore<StoredTransition> {
        &self.memory
    }

    pub fn hmemory(&self) -> &FifoStore<StoredTransition> {
        &self.hmemory
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn check_transition(&self, t: &Transition) -> Result<()> {
        check_len("transition state", self.state_dim, t.state.len())?;
        check_len("transition action", self.action_dim, t.action.len())?;
        check_len("transition next state", self.state_dim, t.next_state.len())?;
        if !t.reward.is_finite() {
            return Err(Error::InvalidArgument("transition reward is not finite".into()));
        }
        Ok(())
    }

    /// Appends `t` to the cache and copies it into `memory`.
    pub fn store_step(&mut self, cache: &mut EpisodeCache, t: Transition) -> Result<()> {
        self.check_transition(&t)?;
        self.memory.push(StoredTransition {
            episode: cache.episode_id(),
            transition: t.clone(),
        });
        cache.push(t);
        Ok(())
    }

    /// Ends the cached episode: computes its return, admits it to `hmemory`
    /// when the return is at least the best so far, and raises the record.
    pub fn finalize_episode(&mut self, cache: &mut EpisodeCache) -> Result<EpisodeOutcome> {
        if cache.is_empty() {
            return Err(Error::EmptyEpisode);
        }
        let episode_return = cache.episode_return();
        let (episode, transitions) = cache.take();
        Ok(self.admit(episode, transitions, episode_return))
    }

    /// Admission step on an already-detached episode. `transitions` must be
    /// the episode's steps in time order, each previously passed through
    /// [`ReplayStore::store_step`] or [`ReplayStore::push_memory`].
    pub fn admit(&mut self, episode: EpisodeId, transitions: Vec<Transition>, episode_return: f64) -> EpisodeOutcome {
        let length = transitions.len();
        let admitted = episode_return >= self.r_max;
        if admitted {
            for transition in transitions {
                self.hmemory.push(StoredTransition { episode, transition });
            }
            self.episodes_admitted += 1;
        }
        if episode_return > self.r_max {
            self.r_max = episode_return;
        }
        self.episodes_finalized += 1;
        EpisodeOutcome {
            episode,
            episode_return,
            length,
            admitted,
            r_max: self.r_max,
        }
    }

    /// The `memory` half of `store_step`, for callers that keep their own cache.
    pub fn push_memory(&mut self, episode: EpisodeId, t: Transition) -> Result<()> {
        self.check_transition(&t)?;
        self.memory.push(StoredTransition { episode, transition: t });
        Ok(())
    }

    /// Drops a cached episode without admission, e.g. after an environment fault.
    pub fn abandon_episode(&mut self, cache: &mut EpisodeCache) {
        cache.take();
    }

    /// Draws `n` entries independently with replacement. While `hmemory` is
    /// empty, draws that select it fall back to `memory`.
    pub fn sample_entries<R: RngCore>(&self, n: usize, rho: f64, rng: &mut R) -> Result<Vec<(Source, &StoredTransition)>> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidArgument(alloc::format!("rho must lie in [0, 1], got {rho}")));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if self.memory.is_empty() {
            return Err(Error::NotReady);
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let m = unit_f64(rng);
            let (source, store) = if m <= rho && !self.hmemory.is_empty() {
                (Source::HMemory, &self.hmemory)
            } else {
                (Source::Memory, &self.memory)
            };
            let i = uniform_index(rng, store.len());
            out.push((source, store.get(i).expect("index below length")));
        }
        Ok(out)
    }

    pub fn sample_batch<R: RngCore>(&self, n: usize, rho: f64, rng: &mut R) -> Result<Batch> {
        let entries = self.sample_entries(n, rho, rng)?;
        Ok(Batch::from_transitions(
            self.state_dim,
            self.action_dim,
            entries.iter().map(|(_, e)| &e.transition),
        ))
    }

    pub fn stats(&self) -> ReplayStats {
        ReplayStats {
            memory_len: self.memory.len(),
            hmemory_len: self.hmemory.len(),
            memory_inserts: self.memory.insert_count(),
            hmemory_inserts: self.hmemory.insert_count(),
            episodes_finalized: self.episodes_finalized,
            episodes_admitted: self.episodes_admitted,
            r_max: self.r_max,
        }
    }
}

/// Unbiased index in `0..len` by rejection on the top bits.
fn uniform_index<R: RngCore>(rng: &mut R, len: usize) -> usize {
    debug_assert!(len > 0);
    let len = len as u64;
    let zone = u64::MAX - (u64::MAX % len);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % len) as usize;
        }
    }
}
