use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

static GLOBAL_SEED: AtomicU64 = AtomicU64::new(0);
static GLOBAL_SET: AtomicBool = AtomicBool::new(false);

/// Records the process-wide seed that [`SeedStreams::global`] derives from.
pub fn set_global_seed(seed: u64) {
    GLOBAL_SEED.store(seed, Ordering::SeqCst);
    GLOBAL_SET.store(true, Ordering::SeqCst);
}

pub fn global_seed() -> Option<u64> {
    GLOBAL_SET
        .load(Ordering::SeqCst)
        .then(|| GLOBAL_SEED.load(Ordering::SeqCst))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Init,
    Dropout,
    Shuffle,
    Hash,
    Bootstrap,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Dropout => 2,
            Stream::Shuffle => 3,
            Stream::Hash => 4,
            Stream::Bootstrap => 5,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent random streams derived from one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStreams {
    seed: u64,
}

impl SeedStreams {
    pub fn new(seed: u64) -> SeedStreams {
        SeedStreams { seed }
    }

    /// Streams from the global seed, or seed 0 if none was set.
    pub fn global() -> SeedStreams {
        SeedStreams::new(global_seed().unwrap_or(0))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream.id());
        rng
    }

    pub fn derive_u64(&self, stream: Stream) -> u64 {
        self.rng(stream).next_u64()
    }

    /// A distinct, reproducible family for sub-job `k`.
    pub fn child(&self, k: u64) -> SeedStreams {
        SeedStreams::new(splitmix(self.seed ^ splitmix(k.wrapping_add(1))))
    }
}
