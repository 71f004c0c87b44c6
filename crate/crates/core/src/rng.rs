//! Independent random streams keyed by `(seed, purpose, replication)`.
//!
//! The ChaCha key is derived from the seed and purpose with splitmix64; the
//! replication index selects the ChaCha stream, so any replication can be
//! generated on any worker without coordination.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Omega,
    Panel,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Omega => 0x6f6d_6567_6100_0001,
            Purpose::Panel => 0x7061_6e65_6c00_0002,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for replication `rep` of `purpose` under `seed`.
pub fn stream(seed: u64, purpose: Purpose, rep: u64) -> ChaCha8Rng {
    let mut state = seed ^ purpose.tag();
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(rep);
    rng
}
