//! Counter-indexed random substreams.
//!
//! Every stream is a function of the master seed, a stream tag and its
//! indices, never of the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Geometry and fading, indexed by trial only.
    Scenario = 1,
    /// Noise, interference and symbols, indexed by grid point and trial.
    Noise = 2,
    /// Perturbation-theory draws, indexed by grid point.
    Theory = 3,
}

/// One round of the splitmix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, stream: Stream, indices: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(seed ^ splitmix64(stream as u64));
    for &i in indices {
        state = splitmix64(state ^ splitmix64(i.wrapping_add(0xA076_1D64_78BD_642F)));
    }
    let mut key = [0u8; 32];
    for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
        state = splitmix64(state.wrapping_add(k as u64));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

pub fn scenario_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    substream(seed, Stream::Scenario, &[trial])
}

pub fn noise_rng(seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    substream(seed, Stream::Noise, &[point, trial])
}
