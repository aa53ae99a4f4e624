use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Named, seeded random stream.
///
/// Every consumer gets its own stream id so extra draws in one module never shift
/// the sequence seen by another. ChaCha output is platform independent.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: impl Into<String>) -> Self {
        let stream_id = stream_id.into();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(fnv1a(stream_id.as_bytes()));
        RngStream { seed, stream_id, rng }
    }

    /// Independent child stream, e.g. one per vehicle.
    pub fn substream(&self, label: impl AsRef<str>) -> RngStream {
        RngStream::new(self.seed, format!("{}/{}", self.stream_id, label.as_ref()))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
