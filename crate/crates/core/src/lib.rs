//! Allocation-only core of the asynchronous episodic DDPG engine.
//!
//! Everything here is deterministic and free of IO: dense networks with exact
//! backpropagation, the Adam optimizer, the actor-critic update rules, the
//! two-store episodic replay, exploration noise processes and the toy
//! continuous-control environments. Threads, clocks, files and the CLI live in
//! the `aeddpg` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod adam;
pub mod agent;
pub mod env;
mod error;
pub mod net;
pub mod noise;
pub mod replay;
pub mod rng;

pub use adam::{AdamConfig, OptimizerState};
pub use agent::{act, policy, ActionBounds, Agent, AgentConfig, Batch};
pub use env::{Corridor, CorridorConfig, EnvSpec, Environment, Pendulum, PendulumConfig, StepResult};
pub use error::{Error, Result};
pub use net::{max_relative_error, Activation, DenseNet, BatchTrace, Gradients, Trace};
pub use noise::{NoiseConfig, NoiseKind, NoiseProcess};
pub use replay::{
    EpisodeCache, EpisodeId, EpisodeOutcome, FifoStore, ReplayStats, ReplayStore, Source, StoredTransition,
    Transition,
};
pub use rng::{derive_seed, Rng, RngState};

/// FNV-1a over the bit patterns of a parameter vector.
///
/// Used as a snapshot checksum and to detect unintended parameter mutation.
pub fn param_hash(params: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in params {
        for b in p.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
