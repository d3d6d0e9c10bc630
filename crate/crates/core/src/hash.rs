//! Fixed, seeded 64-bit mixing hash. The output is part of persisted file
//! formats (fingerprint bits, random stream derivation), so it must never change.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
pub struct SeededHasher {
    state: u64,
}

impl SeededHasher {
    pub fn new(seed: u64) -> Self {
        SeededHasher { state: mix64(seed ^ GOLDEN) }
    }

    #[inline]
    pub fn write_u64(&mut self, value: u64) {
        self.state = mix64(self.state.wrapping_add(GOLDEN) ^ mix64(value));
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for chunk in bytes.chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            self.write_u64(u64::from_le_bytes(word));
        }
        self.write_u64(bytes.len() as u64);
    }

    pub fn finish(&self) -> u64 {
        mix64(self.state)
    }
}

pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let mut h = SeededHasher::new(seed);
    for &w in words {
        h.write_u64(w);
    }
    h.finish()
}

pub fn hash_str(seed: u64, text: &str) -> u64 {
    let mut h = SeededHasher::new(seed);
    h.write_bytes(text.as_bytes());
    h.finish()
}

/// Seed for an independent random stream identified by `parts` under `seed`.
pub fn stream_seed(seed: u64, parts: &[u64]) -> u64 {
    hash_words(seed, parts)
}
