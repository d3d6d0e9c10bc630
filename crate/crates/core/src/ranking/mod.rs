//! Candidate features, random-forest probabilities and the final ranking.

mod forest;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{train_forest, ForestParams, MaxFeatures, Node, RankForest, SearchSpace, Tree, FOREST_FORMAT_VERSION};

use crate::affinity::AffinityTriple;
use crate::eval::{EvalCase, EvalError, MetricsReport};
use crate::hash::stream_seed;
use crate::screening::ScreeningHit;

pub const FEATURE_COUNT: usize = 8;

/// Column order of [`FeatureVector::to_array`]. Persisted models record it.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "max_sim",
    "neg_log10_p",
    "z",
    "association_strength",
    "direct_hit",
    "query_affinity",
    "positive_mean",
    "background_mean",
];

/// Upper bound for `-log10` of P-values and parent E-values.
pub const NEG_LOG10_CAP: f64 = 300.0;

/// Length of the returned ranking.
pub const TOP_TARGETS: usize = 100;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("{0} rows but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("non-finite feature in row {0}")]
    NonFinite(usize),
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
    #[error("no ranking model available")]
    NoModel,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub max_sim: f64,
    pub neg_log10_p: f64,
    pub z: f64,
    pub association_strength: f64,
    pub direct_hit: f64,
    pub query_affinity: f64,
    pub positive_mean: f64,
    pub background_mean: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.max_sim,
            self.neg_log10_p,
            self.z,
            self.association_strength,
            self.direct_hit,
            self.query_affinity,
            self.positive_mean,
            self.background_mean,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> FeatureVector {
        FeatureVector {
            max_sim: a[0],
            neg_log10_p: a[1],
            z: a[2],
            association_strength: a[3],
            direct_hit: a[4],
            query_affinity: a[5],
            positive_mean: a[6],
            background_mean: a[7],
        }
    }
}

/// `-log10(x)` clamped to `[0, NEG_LOG10_CAP]`; zero maps to the cap.
pub fn capped_neg_log10(x: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else if x <= 0.0 {
        NEG_LOG10_CAP
    } else {
        (-x.log10()).min(NEG_LOG10_CAP)
    }
}

pub fn assemble_features(hit: &ScreeningHit, aff: &AffinityTriple) -> FeatureVector {
    FeatureVector {
        max_sim: hit.max_sim,
        neg_log10_p: capped_neg_log10(hit.p),
        z: hit.z,
        association_strength: hit.parent_e.map_or(0.0, capped_neg_log10),
        direct_hit: if hit.cumulative_hit { 1.0 } else { 0.0 },
        query_affinity: aff.query_affinity,
        positive_mean: aff.positive_mean,
        background_mean: aff.background_mean,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub target_id: String,
    pub probability: f64,
    pub rank: usize,
    pub hit: ScreeningHit,
    pub affinity: AffinityTriple,
}

/// Sorts by probability, then max similarity (both descending), then target
/// id, and keeps the first `limit`.
pub fn rank_candidates_top(candidates: Vec<(ScreeningHit, AffinityTriple, f64)>, limit: usize) -> Vec<RankedPrediction> {
    let mut c = candidates;
    c.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(b.0.max_sim.total_cmp(&a.0.max_sim))
            .then_with(|| a.0.target_id.cmp(&b.0.target_id))
    });
    c.truncate(limit);
    c.into_iter()
        .enumerate()
        .map(|(i, (hit, affinity, probability))| RankedPrediction {
            target_id: hit.target_id.clone(),
            probability,
            rank: i + 1,
            hit,
            affinity,
        })
        .collect()
}

pub fn rank_candidates(candidates: Vec<(ScreeningHit, AffinityTriple, f64)>) -> Vec<RankedPrediction> {
    rank_candidates_top(candidates, TOP_TARGETS)
}

/// Scores and ranks a query's candidates. A query with no candidates needs no model.
pub fn predict_ranking(
    forest: Option<&RankForest>,
    candidates: Vec<(ScreeningHit, AffinityTriple)>,
    limit: usize,
) -> Result<Vec<RankedPrediction>, RankingError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let forest = forest.ok_or(RankingError::NoModel)?;
    let scored = candidates
        .into_iter()
        .map(|(hit, aff)| {
            let p = forest.predict_proba(&assemble_features(&hit, &aff).to_array());
            (hit, aff, p)
        })
        .collect();
    Ok(rank_candidates_top(scored, limit))
}

/// One evaluation query: its candidate targets with features, and the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCase {
    pub compound: String,
    pub true_targets: BTreeSet<String>,
    /// (target_id, features). Features carry `max_sim` for tie-breaking.
    pub candidates: Vec<(String, FeatureVector)>,
}

impl RankCase {
    pub fn labelled_rows(&self) -> impl Iterator<Item = ([f64; FEATURE_COUNT], bool)> + '_ {
        self.candidates.iter().map(|(t, fv)| (fv.to_array(), self.true_targets.contains(t)))
    }
}

/// Splits case indices into (train, test) with `test_fraction` of the cases
/// held out. All rows of a compound stay on one side.
pub fn split_cases(n_cases: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n_cases).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(seed, &[0x73706c6974])));
    let n_test = ((n_cases as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize;
    let mut test = idx.split_off(n_cases - n_test);
    idx.sort_unstable();
    test.sort_unstable();
    (idx, test)
}

pub fn train_on_cases(cases: &[RankCase], params: &ForestParams, seed: u64) -> Result<RankForest, RankingError> {
    let (rows, labels): (Vec<_>, Vec<_>) = cases.iter().flat_map(RankCase::labelled_rows).unzip();
    train_forest(&rows, &labels, params, seed)
}

/// Feature columns replaced by their training means.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub name: String,
    pub features: Vec<usize>,
}

impl FeatureMask {
    pub fn new(name: &str, features: &[usize]) -> FeatureMask {
        FeatureMask { name: name.to_string(), features: features.to_vec() }
    }

    /// One mask per evidence family.
    pub fn families() -> Vec<FeatureMask> {
        vec![
            FeatureMask::new("max_similarity", &[0]),
            FeatureMask::new("cumulative_similarity", &[1, 2, 4]),
            FeatureMask::new("target_association", &[3]),
            FeatureMask::new("affinity", &[5, 6, 7]),
        ]
    }

    pub fn parse(spec: &str) -> Result<FeatureMask, String> {
        if let Some(m) = FeatureMask::families().into_iter().find(|m| m.name == spec) {
            return Ok(m);
        }
        let mut features = Vec::new();
        for name in spec.split(',').map(str::trim) {
            let i = FEATURE_NAMES
                .iter()
                .position(|f| *f == name)
                .ok_or_else(|| format!("unknown feature or family {name:?}"))?;
            features.push(i);
        }
        Ok(FeatureMask { name: spec.to_string(), features })
    }

    fn apply(&self, mut x: [f64; FEATURE_COUNT], means: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        for &f in &self.features {
            x[f] = means[f];
        }
        x
    }
}

/// Metrics of the forest on `cases` with `mask` applied to every candidate.
pub fn evaluate_cases(
    forest: &RankForest,
    cases: &[RankCase],
    mask: &FeatureMask,
    k: usize,
    n: usize,
) -> Result<MetricsReport, RankingError> {
    let mut predictions = Vec::with_capacity(cases.len());
    let mut scored = Vec::new();
    let mut truth = Vec::with_capacity(cases.len());
    for case in cases {
        let mut ranked: Vec<(f64, f64, &str)> = case
            .candidates
            .iter()
            .map(|(t, fv)| {
                let p = forest.predict_proba(&mask.apply(fv.to_array(), &forest.feature_means));
                scored.push((p, case.true_targets.contains(t)));
                (p, fv.max_sim, t.as_str())
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)).then_with(|| a.2.cmp(b.2)));
        predictions.push(ranked.into_iter().take(TOP_TARGETS).map(|r| r.2.to_string()).collect());
        truth.push(EvalCase { compound: case.compound.clone(), true_targets: case.true_targets.clone() });
    }
    Ok(MetricsReport::compute(&predictions, &truth, &scored, k, n)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mask: FeatureMask,
    pub metrics: MetricsReport,
    pub delta_roc_auc: Option<f64>,
    pub delta_top_k_recall: f64,
    pub delta_top_n_performance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub baseline: MetricsReport,
    pub rows: Vec<AblationRow>,
}

/// Re-evaluates with each mask in turn; deltas are masked minus baseline.
pub fn ablate(
    forest: &RankForest,
    cases: &[RankCase],
    masks: &[FeatureMask],
    k: usize,
    n: usize,
) -> Result<AblationReport, RankingError> {
    let baseline = evaluate_cases(forest, cases, &FeatureMask::new("none", &[]), k, n)?;
    let rows = masks
        .iter()
        .map(|mask| {
            let metrics = evaluate_cases(forest, cases, mask, k, n)?;
            Ok(AblationRow {
                mask: mask.clone(),
                delta_roc_auc: metrics.roc_auc.zip(baseline.roc_auc).map(|(m, b)| m - b),
                delta_top_k_recall: metrics.top_k_recall - baseline.top_k_recall,
                delta_top_n_performance: metrics.top_n_performance - baseline.top_n_performance,
                metrics,
            })
        })
        .collect::<Result<_, RankingError>>()?;
    Ok(AblationReport { baseline, rows })
}
