//! Seeded generators and the episode seed derivation scheme.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

pub type Rng = ChaCha8Rng;

/// Reserved stream ids for non-worker consumers of the global seed.
pub const INIT_STREAM: u64 = u64::MAX;
pub const LEARNER_STREAM: u64 = u64::MAX - 1;
pub const NOISE_EPISODE: u64 = u64::MAX;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `hash(global_seed, worker_id, episode_index)`.
///
/// Workers use their id and the episode index; the learner and the parameter
/// initializer use the reserved stream ids above.
pub fn derive_seed(global_seed: u64, worker_id: u64, episode_index: u64) -> u64 {
    let a = splitmix64(global_seed ^ 0x5851_f42d_4c95_7f2d);
    let b = splitmix64(a ^ worker_id.rotate_left(17));
    splitmix64(b ^ episode_index.rotate_left(41))
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Complete, restorable position of a [`Rng`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> Rng {
        let mut rng = Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}
