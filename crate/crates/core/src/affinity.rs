//! Pocket-level affinity evidence behind a provider trait. Scores are
//! pKd-like: higher means stronger binding.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::canonical_compound;
use crate::hash::hash_str;
use crate::screening::TargetRecord;

pub const SYNTHETIC_MIN: f64 = 3.0;
pub const SYNTHETIC_MAX: f64 = 9.0;
pub const DEFAULT_POCKET: &str = "p1";

#[derive(Debug, Error)]
pub enum AffinityError {
    #[error("no affinity for compound {compound} at any pocket of target {target_id}")]
    Coverage { compound: String, target_id: String },
    #[error("target {0} has no pockets")]
    NoPockets(String),
    #[error("empty {0} compound set")]
    EmptyReference(&'static str),
    #[error("affinity table line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PocketRef {
    pub target_id: String,
    pub pocket_id: String,
}

impl PocketRef {
    pub fn new(target_id: impl Into<String>, pocket_id: impl Into<String>) -> PocketRef {
        PocketRef { target_id: target_id.into(), pocket_id: pocket_id.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityTriple {
    pub query_affinity: f64,
    pub positive_mean: f64,
    pub background_mean: f64,
    pub best_pocket: PocketRef,
}

/// `compound` is always a canonical compound string.
pub trait AffinityProvider: Send + Sync {
    fn score(&self, compound: &str, pocket: &PocketRef) -> Option<f64>;
}

/// Best score over `pockets`; ties go to the smallest pocket id. Pockets the
/// provider does not cover are skipped.
pub fn predict_affinity(
    provider: &dyn AffinityProvider,
    compound: &str,
    pockets: &[PocketRef],
) -> Result<(f64, PocketRef), AffinityError> {
    let first = pockets.first().ok_or_else(|| AffinityError::NoPockets(String::new()))?;
    let mut best: Option<(f64, &PocketRef)> = None;
    for pocket in pockets {
        let Some(s) = provider.score(compound, pocket) else { continue };
        let better = match best {
            None => true,
            Some((b, bp)) => s > b || (s == b && pocket.pocket_id < bp.pocket_id),
        };
        if better {
            best = Some((s, pocket));
        }
    }
    best.map(|(s, p)| (s, p.clone()))
        .ok_or_else(|| AffinityError::Coverage { compound: compound.to_string(), target_id: first.target_id.clone() })
}

fn mean_best(provider: &dyn AffinityProvider, compounds: &[String], pockets: &[PocketRef]) -> Result<f64, AffinityError> {
    let mut total = 0.0;
    for c in compounds {
        total += predict_affinity(provider, c, pockets)?.0;
    }
    Ok(total / compounds.len() as f64)
}

/// Mean best-pocket score over the target's actives and over `background`.
pub fn reference_stats(
    provider: &dyn AffinityProvider,
    target: &TargetRecord,
    pockets: &[PocketRef],
    background: &[String],
) -> Result<(f64, f64), AffinityError> {
    if pockets.is_empty() {
        return Err(AffinityError::NoPockets(target.target_id.clone()));
    }
    if target.active_smiles.is_empty() {
        return Err(AffinityError::EmptyReference("positive"));
    }
    if background.is_empty() {
        return Err(AffinityError::EmptyReference("background"));
    }
    Ok((mean_best(provider, &target.active_smiles, pockets)?, mean_best(provider, background, pockets)?))
}

/// Per-target reference statistics computed at most once.
#[derive(Debug, Default)]
pub struct ReferenceCache {
    entries: Mutex<BTreeMap<String, (f64, f64)>>,
}

impl ReferenceCache {
    pub fn new() -> ReferenceCache {
        ReferenceCache::default()
    }

    pub fn from_entries(entries: BTreeMap<String, (f64, f64)>) -> ReferenceCache {
        ReferenceCache { entries: Mutex::new(entries) }
    }

    pub fn get_or_compute(
        &self,
        provider: &dyn AffinityProvider,
        target: &TargetRecord,
        pockets: &[PocketRef],
        background: &[String],
    ) -> Result<(f64, f64), AffinityError> {
        if let Some(&v) = self.entries.lock().expect("cache lock").get(&target.target_id) {
            return Ok(v);
        }
        let v = reference_stats(provider, target, pockets, background)?;
        self.entries.lock().expect("cache lock").insert(target.target_id.clone(), v);
        Ok(v)
    }

    pub fn get(&self, target_id: &str) -> Option<(f64, f64)> {
        self.entries.lock().expect("cache lock").get(target_id).copied()
    }

    pub fn snapshot(&self) -> BTreeMap<String, (f64, f64)> {
        self.entries.lock().expect("cache lock").clone()
    }
}

/// Pockets per target; targets without an entry get one default pocket.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PocketTable {
    pockets: BTreeMap<String, Vec<PocketRef>>,
}

impl PocketTable {
    /// TSV with header `target_id<TAB>pocket_id`.
    pub fn read<R: BufRead>(input: R) -> Result<PocketTable, AffinityError> {
        let mut pockets: BTreeMap<String, Vec<PocketRef>> = BTreeMap::new();
        for (n, cols) in tsv_rows(input, &["target_id", "pocket_id"])? {
            let list = pockets.entry(cols[0].clone()).or_default();
            if list.iter().any(|p| p.pocket_id == cols[1]) {
                return Err(AffinityError::Format { line: n, message: format!("duplicate pocket {}", cols[1]) });
            }
            list.push(PocketRef::new(&cols[0], &cols[1]));
        }
        for list in pockets.values_mut() {
            list.sort();
        }
        Ok(PocketTable { pockets })
    }

    pub fn for_target(&self, target_id: &str) -> Vec<PocketRef> {
        self.pockets.get(target_id).cloned().unwrap_or_else(|| vec![PocketRef::new(target_id, DEFAULT_POCKET)])
    }
}

fn tsv_rows<R: BufRead>(input: R, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>, AffinityError> {
    let mut rows = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let cols: Vec<String> = line.split('\t').map(|c| c.trim().to_string()).collect();
        if n == 0 {
            if cols != header {
                return Err(AffinityError::Format { line: 1, message: format!("expected header {}", header.join("\\t")) });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if cols.len() != header.len() {
            return Err(AffinityError::Format {
                line: lineno,
                message: format!("expected {} columns, found {}", header.len(), cols.len()),
            });
        }
        rows.push((lineno, cols));
    }
    Ok(rows)
}

/// Lookup table keyed on (canonical compound, target, pocket).
#[derive(Debug, Clone, Default)]
pub struct TableProvider {
    scores: HashMap<(String, String, String), f64>,
    default_score: Option<f64>,
}

impl TableProvider {
    /// TSV with header `compound, target_id, pocket_id, score`; compounds are
    /// canonicalized on load and duplicate keys are an error.
    pub fn read<R: BufRead>(input: R) -> Result<TableProvider, AffinityError> {
        let mut scores = HashMap::new();
        for (n, cols) in tsv_rows(input, &["compound", "target_id", "pocket_id", "score"])? {
            let err = |message: String| AffinityError::Format { line: n, message };
            let compound = canonical_compound(&cols[0]).map_err(|e| err(format!("compound: {e}")))?;
            let score: f64 = cols[3].parse().map_err(|_| err(format!("bad score {:?}", cols[3])))?;
            if !score.is_finite() {
                return Err(err("non-finite score".into()));
            }
            let key = (compound, cols[1].clone(), cols[2].clone());
            if scores.insert(key.clone(), score).is_some() {
                return Err(err(format!("duplicate key ({}, {}, {})", key.0, key.1, key.2)));
            }
        }
        Ok(TableProvider { scores, default_score: None })
    }

    /// Score returned for keys absent from the table.
    pub fn with_default(mut self, default_score: Option<f64>) -> TableProvider {
        self.default_score = default_score;
        self
    }

    pub fn insert(&mut self, compound: &str, pocket: &PocketRef, score: f64) {
        self.scores.insert((compound.to_string(), pocket.target_id.clone(), pocket.pocket_id.clone()), score);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl AffinityProvider for TableProvider {
    fn score(&self, compound: &str, pocket: &PocketRef) -> Option<f64> {
        self.scores
            .get(&(compound.to_string(), pocket.target_id.clone(), pocket.pocket_id.clone()))
            .copied()
            .or(self.default_score)
    }
}

/// Deterministic stand-in: a seeded hash of the key mapped into [3, 9].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticProvider {
    pub seed: u64,
}

impl AffinityProvider for SyntheticProvider {
    fn score(&self, compound: &str, pocket: &PocketRef) -> Option<f64> {
        let key = format!("{compound}\t{}\t{}", pocket.target_id, pocket.pocket_id);
        let unit = (hash_str(self.seed, &key) >> 11) as f64 / (1u64 << 53) as f64;
        Some(SYNTHETIC_MIN + (SYNTHETIC_MAX - SYNTHETIC_MIN) * unit)
    }
}
