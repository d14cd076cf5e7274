//! Order-independent random substreams.
//!
//! Every random draw in a run comes from a ChaCha8 stream whose 256-bit key
//! is the tuple `(master_seed, purpose, device, round)`, each word stored as a
//! little-endian `u64`. Two draws share a stream only if all four words agree,
//! so results do not depend on the order in which devices or rounds are
//! processed. Draws that are not tied to a device use [`NO_DEVICE`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Device word for streams that belong to the whole system.
pub const NO_DEVICE: u64 = u64::MAX;

/// What a stream is used for. The discriminant is the second key word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Topology = 1,
    Dataset = 2,
    Phase = 3,
    Energy = 4,
    Batch = 5,
    Fading = 6,
    Noise = 7,
    Init = 8,
    Participation = 9,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStreams {
    master: u64,
}

impl SeedStreams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, purpose: Purpose, device: u64, round: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        for (chunk, word) in key
            .chunks_exact_mut(8)
            .zip([self.master, purpose as u64, device, round])
        {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}
