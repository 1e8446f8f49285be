//! Seeded random streams and the chunk layout shared by all samplers.
//!
//! A job of `n` draws is cut into at most [`MAX_CHUNKS`] contiguous chunks.
//! Chunk `c` draws from ChaCha8 keyed by the job seed on stream `c`, so the
//! draws depend only on `(seed, n)` and not on the number of workers.

use core::ops::Range;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

pub type StreamRng = ChaCha8Rng;

/// Upper bound on the number of chunks, and hence on the number of batch
/// means behind a standard error.
pub const MAX_CHUNKS: usize = 128;

/// Independent generator for substream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `(seed, tag, index)`.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ index)
}

/// Contiguous split of `n` items into chunks; the first `n % chunks` chunks
/// carry one extra item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkPlan {
    n: usize,
    chunks: usize,
}

impl ChunkPlan {
    pub fn new(n: usize) -> Self {
        Self { n, chunks: n.min(MAX_CHUNKS) }
    }

    pub fn total(&self) -> usize {
        self.n
    }

    pub fn chunks(&self) -> usize {
        self.chunks
    }

    pub fn range(&self, c: usize) -> Range<usize> {
        let base = self.n / self.chunks;
        let extra = self.n % self.chunks;
        let start = c * base + c.min(extra);
        let len = base + usize::from(c < extra);
        start..start + len
    }
}
