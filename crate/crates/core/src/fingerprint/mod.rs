//! Fixed-width bit fingerprints and Tanimoto similarity.

mod ecfp;
mod store;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ecfp::{atom_invariants, ecfp, ecfp_with};
pub use store::{read_fingerprints, write_fingerprints, FP_MAGIC, FP_VERSION};

pub const DEFAULT_WIDTH: usize = 2048;
pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_HASH_SEED: u64 = 0x00EC_F4A5_2048_0002;

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("fingerprint widths differ ({0} vs {1})")]
    WidthMismatch(usize, usize),
    #[error("fingerprint width must be positive")]
    ZeroWidth,
    #[error("empty fingerprint set")]
    EmptySet,
    #[error("molecule has no heavy atoms")]
    NoHeavyAtoms,
    #[error("fingerprint file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Width, radius and hash seed; stored in every fingerprint database header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintConfig {
    pub width: usize,
    pub radius: u32,
    pub seed: u64,
}

impl Default for FingerprintConfig {
    fn default() -> Self {
        FingerprintConfig { width: DEFAULT_WIDTH, radius: DEFAULT_RADIUS, seed: DEFAULT_HASH_SEED }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
    popcount: u32,
}

impl Fingerprint {
    pub fn empty(width: usize) -> Fingerprint {
        Fingerprint { words: vec![0; width.div_ceil(64)], width, popcount: 0 }
    }

    /// Bits past `width` are ignored.
    pub fn from_bits<I: IntoIterator<Item = usize>>(width: usize, bits: I) -> Fingerprint {
        let mut fp = Fingerprint::empty(width);
        for b in bits {
            if b < width {
                fp.words[b / 64] |= 1u64 << (b % 64);
            }
        }
        fp.recount();
        fp
    }

    pub(crate) fn from_words(width: usize, mut words: Vec<u64>) -> Fingerprint {
        words.resize(width.div_ceil(64), 0);
        if width % 64 != 0 {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (width % 64)) - 1;
            }
        }
        let mut fp = Fingerprint { words, width, popcount: 0 };
        fp.recount();
        fp
    }

    fn recount(&mut self) {
        self.popcount = self.words.iter().map(|w| w.count_ones()).sum();
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn popcount(&self) -> u32 {
        self.popcount
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn contains(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] & (1u64 << (bit % 64)) != 0
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            (0..64).filter(move |b| w & (1u64 << b) != 0).map(move |b| i * 64 + b)
        })
    }
}

/// |a ∧ b| / |a ∨ b|; zero when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.width != b.width {
        return Err(FingerprintError::WidthMismatch(a.width, b.width));
    }
    Ok(tanimoto_unchecked(a, b))
}

/// Tanimoto for fingerprints already known to share a width.
#[inline]
pub fn tanimoto_unchecked(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let common: u32 = a.words.iter().zip(&b.words).map(|(x, y)| (x & y).count_ones()).sum();
    let union = a.popcount + b.popcount - common;
    if union == 0 {
        0.0
    } else {
        common as f64 / union as f64
    }
}

const BULK_CHUNK: usize = 4096;

/// Highest similarity in `set` and its index; ties go to the lowest index.
pub fn bulk_max_similarity(query: &Fingerprint, set: &[Fingerprint]) -> Result<(f64, usize), FingerprintError> {
    if set.is_empty() {
        return Err(FingerprintError::EmptySet);
    }
    if let Some(bad) = set.iter().find(|fp| fp.width != query.width) {
        return Err(FingerprintError::WidthMismatch(query.width, bad.width));
    }
    let best = set
        .par_chunks(BULK_CHUNK)
        .enumerate()
        .map(|(chunk, fps)| {
            let mut best = (f64::NEG_INFINITY, 0usize);
            for (k, fp) in fps.iter().enumerate() {
                let s = tanimoto_unchecked(query, fp);
                if s > best.0 {
                    best = (s, chunk * BULK_CHUNK + k);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x },
        );
    Ok(best)
}
