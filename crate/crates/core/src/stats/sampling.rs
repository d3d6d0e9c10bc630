//! Background raw-score sampling. Every task draws from its own ChaCha stream
//! keyed by (seed, task coordinates), so output is independent of scheduling.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::Subset;
use super::score::grid_unchecked;
use super::StatError;
use crate::fingerprint::Fingerprint;
use crate::hash::stream_seed;
use crate::scaffold::{dedupe_keys, ScaffoldKey};

const TAG_S_VALUES: u64 = 1;
const TAG_SHAPE: u64 = 2;
const TAG_DRAW: u64 = 3;
const TAG_GRID: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledPoint {
    /// Pair count `i × j`.
    pub s: u64,
    pub raw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Protocol {
    /// `s_values` integers S drawn uniformly from `[side_min², side_max²]`;
    /// per S one shape `i × j ≈ S` with both sides in `[side_min, side_max]`,
    /// repeated `repetitions` times.
    Product { side_min: usize, side_max: usize, s_values: usize, repetitions: usize },
    /// Every `(i, j)` in `1..=side_max` squared, repeated `repetitions` times.
    Grid { side_max: usize, repetitions: usize },
}

impl Protocol {
    pub fn for_subset(subset: Subset) -> Protocol {
        match subset {
            Subset::One => Protocol::Product { side_min: 10, side_max: 300, s_values: 1000, repetitions: 30 },
            Subset::Two => Protocol::Product { side_min: 100, side_max: 2000, s_values: 1000, repetitions: 30 },
            Subset::Three => Protocol::Grid { side_max: 50, repetitions: 100 },
        }
    }

    /// Shrinks the S count (product) or the repetition count (grid) by
    /// `scale`, keeping at least 3 S values and 2 repetitions.
    pub fn scaled(self, scale: f64) -> Result<Protocol, StatError> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(StatError::InvalidProtocol(format!("scale factor {scale} outside (0, 1]")));
        }
        let shrink = |n: usize, floor: usize| ((n as f64 * scale).round() as usize).max(floor);
        Ok(match self {
            Protocol::Product { side_min, side_max, s_values, repetitions } => {
                Protocol::Product { side_min, side_max, s_values: shrink(s_values, 3), repetitions }
            }
            Protocol::Grid { side_max, repetitions } => Protocol::Grid { side_max, repetitions: shrink(repetitions, 2) },
        })
    }

    /// Lowers the largest set size to `pool` compounds.
    pub fn capped(self, pool: usize) -> Protocol {
        match self {
            Protocol::Product { side_min, side_max, s_values, repetitions } => {
                let side_max = side_max.min(pool).max(1);
                Protocol::Product { side_min: side_min.min(side_max), side_max, s_values, repetitions }
            }
            Protocol::Grid { side_max, repetitions } => Protocol::Grid { side_max: side_max.min(pool).max(1), repetitions },
        }
    }

    pub fn min_pool(&self) -> usize {
        match *self {
            Protocol::Product { side_max, .. } | Protocol::Grid { side_max, .. } => side_max,
        }
    }

    pub fn point_count(&self) -> usize {
        match *self {
            Protocol::Product { s_values, repetitions, .. } => s_values * repetitions,
            Protocol::Grid { side_max, repetitions } => side_max * side_max * repetitions,
        }
    }

    fn validate(&self) -> Result<(), StatError> {
        let ok = match *self {
            Protocol::Product { side_min, side_max, s_values, repetitions } => {
                side_min >= 1 && side_min <= side_max && s_values >= 1 && repetitions >= 1
            }
            Protocol::Grid { side_max, repetitions } => side_max >= 1 && repetitions >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(StatError::InvalidProtocol(format!("{self:?}")))
        }
    }

    /// Set shapes `(i, j)` and repetition counts, in output order.
    fn shapes(&self, seed: u64) -> Vec<(usize, usize, u64)> {
        match *self {
            Protocol::Product { side_min, side_max, s_values, repetitions } => {
                let (lo, hi) = (side_min as u64, side_max as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[TAG_S_VALUES]));
                let targets: Vec<u64> = (0..s_values).map(|_| rng.random_range(lo * lo..=hi * hi)).collect();
                targets
                    .iter()
                    .enumerate()
                    .map(|(k, &s)| {
                        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[TAG_SHAPE, k as u64]));
                        let i_lo = lo.max(s.div_ceil(hi));
                        let i_hi = hi.min(s / lo).max(i_lo);
                        let i = rng.random_range(i_lo..=i_hi);
                        let j = ((s as f64 / i as f64).round() as u64).clamp(lo, hi);
                        (i as usize, j as usize, k as u64)
                    })
                    .flat_map(|(i, j, k)| (0..repetitions as u64).map(move |rep| (i, j, k << 32 | rep)))
                    .collect()
            }
            Protocol::Grid { side_max, repetitions } => (1..=side_max)
                .flat_map(|i| (1..=side_max).map(move |j| (i, j)))
                .flat_map(|(i, j)| (0..repetitions as u64).map(move |rep| (i, j, rep)))
                .collect(),
        }
    }
}

/// A pool holding at most one compound per scaffold within each source group.
#[derive(Debug, Clone, PartialEq)]
pub struct DedupedPool {
    fps: Vec<Fingerprint>,
}

impl DedupedPool {
    pub fn from_keyed(fps: &[Fingerprint], keys: &[ScaffoldKey]) -> DedupedPool {
        DedupedPool::from_groups([(fps, keys)])
    }

    /// Deduplicates within each `(fingerprints, keys)` group, then concatenates.
    pub fn from_groups<'a, I>(groups: I) -> DedupedPool
    where
        I: IntoIterator<Item = (&'a [Fingerprint], &'a [ScaffoldKey])>,
    {
        let mut fps = Vec::new();
        for (g_fps, keys) in groups {
            assert_eq!(g_fps.len(), keys.len(), "one scaffold key per fingerprint");
            fps.extend(dedupe_keys(keys).into_iter().map(|i| g_fps[i].clone()));
        }
        DedupedPool { fps }
    }

    pub fn fingerprints(&self) -> &[Fingerprint] {
        &self.fps
    }
}

/// Background points at one threshold.
pub fn sample_background(pool: &[Fingerprint], protocol: &Protocol, ts: f64, seed: u64) -> Result<Vec<SampledPoint>, StatError> {
    Ok(sample_background_grid(pool, protocol, &[ts], seed)?.pop().expect("one threshold"))
}

/// Background points for every threshold of an ascending `grid`, sharing the
/// same draws. Output `[k]` holds the points at `grid[k]` in task order.
pub fn sample_background_grid(
    pool: &[Fingerprint],
    protocol: &Protocol,
    grid: &[f64],
    seed: u64,
) -> Result<Vec<Vec<SampledPoint>>, StatError> {
    protocol.validate()?;
    if grid.is_empty() {
        return Err(StatError::EmptyGrid);
    }
    if let Some(&bad) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(StatError::InvalidThreshold(bad));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(StatError::InvalidProtocol("threshold grid must be ascending".into()));
    }
    if pool.len() < protocol.min_pool() {
        return Err(StatError::PoolTooSmall { need: protocol.min_pool(), have: pool.len() });
    }
    let width = pool[0].width();
    if let Some(bad) = pool.iter().find(|fp| fp.width() != width) {
        return Err(StatError::WidthMismatch(width, bad.width()));
    }
    let tag = match protocol {
        Protocol::Product { .. } => TAG_DRAW,
        Protocol::Grid { .. } => TAG_GRID,
    };
    let shapes = protocol.shapes(seed);
    let per_task: Vec<(u64, Vec<f64>)> = shapes
        .par_iter()
        .map(|&(i, j, task)| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[tag, i as u64, j as u64, task]));
            let a: Vec<Fingerprint> = sample_indices(&mut rng, pool.len(), i).iter().map(|k| pool[k].clone()).collect();
            let b: Vec<Fingerprint> = sample_indices(&mut rng, pool.len(), j).iter().map(|k| pool[k].clone()).collect();
            ((i * j) as u64, grid_unchecked(&a, &b, grid))
        })
        .collect();
    Ok((0..grid.len())
        .map(|k| per_task.iter().map(|(s, raws)| SampledPoint { s: *s, raw: raws[k] }).collect())
        .collect())
}

pub fn sample_background_subset1(pool: &[Fingerprint], ts: f64, seed: u64, scale: f64) -> Result<Vec<SampledPoint>, StatError> {
    sample_background(pool, &Protocol::for_subset(Subset::One).scaled(scale)?, ts, seed)
}

pub fn sample_background_subset2(pool: &DedupedPool, ts: f64, seed: u64, scale: f64) -> Result<Vec<SampledPoint>, StatError> {
    sample_background(pool.fingerprints(), &Protocol::for_subset(Subset::Two).scaled(scale)?, ts, seed)
}

pub fn sample_background_subset3(pool: &[Fingerprint], ts: f64, seed: u64, scale: f64) -> Result<Vec<SampledPoint>, StatError> {
    sample_background(pool, &Protocol::for_subset(Subset::Three).scaled(scale)?, ts, seed)
}
