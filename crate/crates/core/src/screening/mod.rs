//! Ligand-based candidate screening: cumulative set similarity, association
//! expansion and maximum similarity, merged into one candidate list.

mod association;

use std::borrow::Cow;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use association::{
    associate_targets, build_association_graph, read_association_tsv, write_association_tsv, AssociationGraph, Edge,
    EDGE_CUTOFFS,
};
pub use crate::stats::Subset;
use crate::fingerprint::{tanimoto_unchecked, Fingerprint};
use crate::scaffold::{dedupe_keys, ScaffoldKey};
use crate::stats::{raw_score_unchecked, ModelSet, Purpose, StatError};

pub const SIGNIFICANCE: f64 = 0.05;
pub const MAX_SIM_THRESHOLD: f64 = 0.4;

#[derive(Debug, Error)]
pub enum ScreeningError {
    #[error("no {purpose} model for populated subset {subset}")]
    MissingModel { subset: Subset, purpose: Purpose },
    #[error("target {0} has no actives")]
    NoActives(String),
    #[error("target {0}: active lists have different lengths")]
    RaggedActives(String),
    #[error("fingerprint width {got} differs from {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error("association table line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeningConfig {
    /// Cumulative hits need `p` strictly below this.
    pub significance: f64,
    /// Max-similarity hits need similarity strictly above this.
    pub max_sim_threshold: f64,
    /// Also expand max-similarity hits through the association graph.
    pub expand_max_sim_hits: bool,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig { significance: SIGNIFICANCE, max_sim_threshold: MAX_SIM_THRESHOLD, expand_max_sim_hits: false }
    }
}

/// A target with its deduplicated actives. The parallel vectors share indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetRecord {
    pub target_id: String,
    pub name: String,
    pub organism: String,
    pub active_ids: Vec<String>,
    pub active_smiles: Vec<String>,
    pub active_fps: Vec<Fingerprint>,
    pub scaffold_keys: Vec<ScaffoldKey>,
    pub subset: Subset,
    /// First active of each distinct scaffold, ascending.
    pub representatives: Vec<usize>,
}

impl TargetRecord {
    pub fn new(
        target_id: impl Into<String>,
        name: impl Into<String>,
        organism: impl Into<String>,
        active_ids: Vec<String>,
        active_smiles: Vec<String>,
        active_fps: Vec<Fingerprint>,
        scaffold_keys: Vec<ScaffoldKey>,
    ) -> Result<TargetRecord, ScreeningError> {
        let target_id = target_id.into();
        let n = active_fps.len();
        if n == 0 {
            return Err(ScreeningError::NoActives(target_id));
        }
        if active_ids.len() != n || active_smiles.len() != n || scaffold_keys.len() != n {
            return Err(ScreeningError::RaggedActives(target_id));
        }
        let representatives = dedupe_keys(&scaffold_keys);
        Ok(TargetRecord {
            target_id,
            name: name.into(),
            organism: organism.into(),
            active_ids,
            active_smiles,
            active_fps,
            scaffold_keys,
            subset: Subset::for_active_count(n),
            representatives,
        })
    }

    /// Actives used for set scoring: scaffold representatives for subset 2,
    /// all actives otherwise.
    pub fn screening_fps(&self) -> Cow<'_, [Fingerprint]> {
        match self.subset {
            Subset::Two => Cow::Owned(self.representatives.iter().map(|&i| self.active_fps[i].clone()).collect()),
            _ => Cow::Borrowed(&self.active_fps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningHit {
    pub target_id: String,
    pub subset: Subset,
    pub z: f64,
    pub p: f64,
    pub e: f64,
    pub max_sim: f64,
    pub max_sim_compound: Option<String>,
    /// Significant in the cumulative screen; otherwise z, p, e are neutral.
    pub cumulative_hit: bool,
    pub via_association: bool,
    pub association_parent: Option<String>,
    pub parent_e: Option<f64>,
}

impl ScreeningHit {
    /// A record with neutral statistical evidence: z = 0, p = 1, e = `n_db`.
    pub fn neutral(target: &TargetRecord, n_db: u64) -> ScreeningHit {
        ScreeningHit {
            target_id: target.target_id.clone(),
            subset: target.subset,
            z: 0.0,
            p: 1.0,
            e: n_db as f64,
            max_sim: 0.0,
            max_sim_compound: None,
            cumulative_hit: false,
            via_association: false,
            association_parent: None,
            parent_e: None,
        }
    }
}

pub(crate) fn neutral_n_db(models: &ModelSet, subset: Subset) -> u64 {
    models.get(subset, Purpose::Cumulative).map_or(1, |m| m.n_db)
}

/// Targets grouped by subset, each group in input order.
pub fn partition_subsets(targets: &[TargetRecord]) -> BTreeMap<Subset, Vec<&TargetRecord>> {
    let mut out: BTreeMap<Subset, Vec<&TargetRecord>> = Subset::ALL.iter().map(|&s| (s, Vec::new())).collect();
    for t in targets {
        out.get_mut(&Subset::for_active_count(t.active_fps.len())).expect("all subsets present").push(t);
    }
    out
}

fn check_width(query: &Fingerprint, targets: &[TargetRecord]) -> Result<(), ScreeningError> {
    for t in targets {
        if let Some(fp) = t.active_fps.iter().find(|fp| fp.width() != query.width()) {
            return Err(ScreeningError::WidthMismatch { expected: query.width(), got: fp.width() });
        }
    }
    Ok(())
}

fn best_active(query: &Fingerprint, target: &TargetRecord) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, fp) in target.active_fps.iter().enumerate() {
        let s = tanimoto_unchecked(query, fp);
        if s > best.0 {
            best = (s, i);
        }
    }
    best
}

/// Targets whose actives are significantly similar to `query` as a set:
/// a singleton query against the target's screening set, `S = |set|`,
/// retained when `p < config.significance`. Sorted by target id.
pub fn cumulative_screen(
    query: &Fingerprint,
    targets: &[TargetRecord],
    models: &ModelSet,
    config: &ScreeningConfig,
) -> Result<Vec<ScreeningHit>, ScreeningError> {
    check_width(query, targets)?;
    for (subset, group) in partition_subsets(targets) {
        if !group.is_empty() && models.get(subset, Purpose::Cumulative).is_none() {
            return Err(ScreeningError::MissingModel { subset, purpose: Purpose::Cumulative });
        }
    }
    let single = std::slice::from_ref(query);
    let mut hits: Vec<ScreeningHit> = targets
        .par_iter()
        .map(|t| -> Result<Option<ScreeningHit>, ScreeningError> {
            let model = models.get(t.subset, Purpose::Cumulative).expect("checked above");
            let set = t.screening_fps();
            let raw = raw_score_unchecked(single, &set, model.ts);
            let sig = model.significance(raw, set.len() as f64)?;
            if !(sig.p < config.significance) {
                return Ok(None);
            }
            let (max_sim, idx) = best_active(query, t);
            Ok(Some(ScreeningHit {
                z: sig.z,
                p: sig.p,
                e: sig.e,
                max_sim,
                max_sim_compound: Some(t.active_ids[idx].clone()),
                cumulative_hit: true,
                ..ScreeningHit::neutral(t, model.n_db)
            }))
        })
        .filter_map(Result::transpose)
        .collect::<Result<_, _>>()?;
    hits.sort_by(|a, b| a.target_id.cmp(&b.target_id));
    Ok(hits)
}

/// Targets with an active more similar than `config.max_sim_threshold`,
/// carrying neutral statistical evidence. Sorted by target id.
pub fn max_sim_screen(
    query: &Fingerprint,
    targets: &[TargetRecord],
    models: &ModelSet,
    config: &ScreeningConfig,
) -> Result<Vec<ScreeningHit>, ScreeningError> {
    check_width(query, targets)?;
    let mut hits: Vec<ScreeningHit> = targets
        .par_iter()
        .filter_map(|t| {
            let (max_sim, idx) = best_active(query, t);
            (max_sim > config.max_sim_threshold).then(|| ScreeningHit {
                max_sim,
                max_sim_compound: Some(t.active_ids[idx].clone()),
                ..ScreeningHit::neutral(t, neutral_n_db(models, t.subset))
            })
        })
        .collect();
    hits.sort_by(|a, b| a.target_id.cmp(&b.target_id));
    Ok(hits)
}

/// Per-target maximum similarity and the achieving compound for every target.
pub fn max_similarities(query: &Fingerprint, targets: &[TargetRecord]) -> BTreeMap<String, (f64, String)> {
    targets
        .par_iter()
        .map(|t| {
            let (s, i) = best_active(query, t);
            (t.target_id.clone(), (s, t.active_ids[i].clone()))
        })
        .collect()
}

fn combine(into: &mut ScreeningHit, other: &ScreeningHit) {
    if other.cumulative_hit && (!into.cumulative_hit || other.e < into.e) {
        into.z = other.z;
        into.p = other.p;
        into.e = other.e;
        into.cumulative_hit = true;
    }
    let key = |h: &ScreeningHit| (h.max_sim, std::cmp::Reverse(h.max_sim_compound.clone()));
    if other.max_sim_compound.is_some() && (into.max_sim_compound.is_none() || key(other) > key(into)) {
        into.max_sim = other.max_sim;
        into.max_sim_compound = other.max_sim_compound.clone();
    }
    if other.via_association {
        let better = match (into.parent_e, other.parent_e) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(a), Some(b)) => b < a || (b == a && other.association_parent < into.association_parent),
        };
        into.via_association = true;
        if better || into.association_parent.is_none() {
            into.association_parent = other.association_parent.clone();
            into.parent_e = other.parent_e;
        }
    }
}

/// Union by target id. Flags are OR-ed; statistics come from the lowest-E
/// cumulative record; similarity from the highest; the association parent
/// from the lowest parent E. Sorted by target id.
pub fn merge_candidates(
    cumulative: &[ScreeningHit],
    associated: &[ScreeningHit],
    max_sim: &[ScreeningHit],
) -> Vec<ScreeningHit> {
    let mut merged: BTreeMap<String, ScreeningHit> = BTreeMap::new();
    for hit in cumulative.iter().chain(associated).chain(max_sim) {
        match merged.get_mut(&hit.target_id) {
            Some(existing) => combine(existing, hit),
            None => {
                merged.insert(hit.target_id.clone(), hit.clone());
            }
        }
    }
    merged.into_values().collect()
}

/// Full ligand-module screen for one query.
pub fn screen(
    query: &Fingerprint,
    targets: &[TargetRecord],
    models: &ModelSet,
    graph: &AssociationGraph,
    config: &ScreeningConfig,
) -> Result<Vec<ScreeningHit>, ScreeningError> {
    let cumulative = cumulative_screen(query, targets, models, config)?;
    let by_sim = max_sim_screen(query, targets, models, config)?;
    let mut seeds = cumulative.clone();
    if config.expand_max_sim_hits {
        seeds = merge_candidates(&seeds, &[], &by_sim);
    }
    let associated = associate_targets(&seeds, graph, targets, models);
    let mut merged = merge_candidates(&cumulative, &associated, &by_sim);
    let sims = max_similarities(query, targets);
    for hit in &mut merged {
        if hit.max_sim_compound.is_none() {
            if let Some((s, id)) = sims.get(&hit.target_id) {
                hit.max_sim = *s;
                hit.max_sim_compound = Some(id.clone());
            }
        }
    }
    Ok(merged)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::scaffold::ScaffoldKey;

    pub fn key(i: usize) -> ScaffoldKey {
        ScaffoldKey { canonical_string: format!("s{i}"), ring_count: 1 }
    }

    pub fn target(id: &str, fps: Vec<Fingerprint>) -> TargetRecord {
        let n = fps.len();
        TargetRecord::new(
            id,
            id,
            "human",
            (0..n).map(|i| format!("{id}_c{i}")).collect(),
            (0..n).map(|_| "C".to_string()).collect(),
            fps,
            (0..n).map(key).collect(),
        )
        .unwrap()
    }

    pub fn fp(bits: &[usize]) -> Fingerprint {
        Fingerprint::from_bits(256, bits.iter().copied())
    }
}
