//! Seedable, splittable random streams.
//!
//! Every sampler and model operation takes an explicit [`RngStream`]. A stream
//! is identified by a `(seed, stream_id)` pair; identical pairs yield
//! bit-identical draw sequences, and distinct stream ids are independent by
//! construction (ChaCha counter streams). Splitting derives child stream ids
//! from the parent id, so per-replicate / per-block streams can be laid out
//! deterministically regardless of execution order or worker count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reproducible random stream: `(seed, stream_id)` fully determines output.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derive an independent child stream. The child id depends only on the
    /// parent's identity and `child`, not on how much the parent has drawn.
    pub fn substream(&self, child: u64) -> RngStream {
        let id = splitmix64(self.stream_id ^ splitmix64(child.wrapping_add(1)));
        RngStream::new(self.seed, id)
    }

    /// Uniform draw on [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64) / DEN
    }

    /// Uniform draw on [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}
