//! Replay store shared between workers and the learner.

use std::sync::{Mutex, MutexGuard};

use aeddpg_core::{
    Batch, EpisodeCache, EpisodeOutcome, ReplayStats, ReplayStore, Result, RngState, Transition,
};
use aeddpg_core::rng::Rng;

/// Workers keep their episode cache locally; only the per-step copy into
/// `memory` and the admission decision at episode end touch the lock.
#[derive(Debug)]
pub struct SharedReplay {
    store: Mutex<ReplayStore>,
}

impl SharedReplay {
    pub fn new(store: ReplayStore) -> Self {
        Self {
            store: Mutex::new(store),
        }
    }

    fn lock(&self) -> MutexGuard<'_, ReplayStore> {
        self.store.lock().expect("replay lock poisoned")
    }

    pub fn store_step(&self, cache: &mut EpisodeCache, t: Transition) -> Result<()> {
        self.lock().push_memory(cache.episode_id(), t.clone())?;
        cache.push(t);
        Ok(())
    }

    /// Detaches the cached episode, sums its return outside the lock, then
    /// applies the admission rule atomically.
    pub fn finalize_episode(&self, cache: &mut EpisodeCache) -> Result<EpisodeOutcome> {
        if cache.is_empty() {
            return Err(aeddpg_core::Error::EmptyEpisode);
        }
        let episode_return = cache.episode_return();
        let (episode, transitions) = cache.take();
        Ok(self.lock().admit(episode, transitions, episode_return))
    }

    pub fn abandon_episode(&self, cache: &mut EpisodeCache) {
        cache.take();
    }

    pub fn sample_batch(&self, n: usize, rho: f64, rng: &mut Rng) -> Result<Batch> {
        self.lock().sample_batch(n, rho, rng)
    }

    pub fn stats(&self) -> ReplayStats {
        self.lock().stats()
    }

    pub fn inspect<T>(&self, f: impl FnOnce(&ReplayStore) -> T) -> T {
        f(&self.lock())
    }

    pub fn into_inner(self) -> ReplayStore {
        self.store.into_inner().expect("replay lock poisoned")
    }
}

/// Named generator positions collected at the end of a run.
pub type NamedRngStates = Vec<(String, RngState)>;
