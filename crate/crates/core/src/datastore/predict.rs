use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_artifact, Database, DatastoreError, RANKER};
use crate::affinity::{predict_affinity, AffinityError, AffinityProvider, AffinityTriple};
use crate::chem::{canonical_smiles, largest_fragment, parse_smiles};
use crate::eval::{EvalCase, MetricsReport};
use crate::fingerprint::{ecfp_with, tanimoto_unchecked, Fingerprint};
use crate::ranking::{
    ablate, assemble_features, evaluate_cases, predict_ranking, split_cases, train_on_cases, AblationReport,
    FeatureMask, ForestParams, RankCase, FEATURE_COUNT, FEATURE_NAMES, TOP_TARGETS,
};
use crate::screening::{screen, ScreeningConfig, ScreeningHit};

/// Most similar known actives listed per predicted target.
pub const SIMILAR_ACTIVES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    pub screening: ScreeningConfig,
    pub top: usize,
    pub similar_actives: usize,
}

impl Default for PredictConfig {
    fn default() -> PredictConfig {
        PredictConfig { screening: ScreeningConfig::default(), top: TOP_TARGETS, similar_actives: SIMILAR_ACTIVES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarActive {
    pub compound_id: String,
    pub smiles: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub rank: usize,
    pub target_id: String,
    pub name: String,
    pub organism: String,
    pub probability: f64,
    pub subset: u8,
    pub z: f64,
    pub p: f64,
    pub e: f64,
    pub max_sim: f64,
    pub max_sim_compound: Option<String>,
    pub cumulative_hit: bool,
    pub via_association: bool,
    pub association_parent: Option<String>,
    pub parent_e: Option<f64>,
    pub affinity: AffinityTriple,
    pub similar_actives: Vec<SimilarActive>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub query: String,
    pub canonical_query: String,
    pub manifest_digest: String,
    pub candidate_count: usize,
    pub predictions: Vec<PredictionRecord>,
}

struct Query {
    canonical: String,
    fp: Fingerprint,
}

fn prepare_query(db: &Database, smiles: &str) -> Result<Query, DatastoreError> {
    let mol = largest_fragment(&parse_smiles(smiles)?);
    if mol.heavy_atom_count() == 0 {
        return Err(DatastoreError::EmptyQuery);
    }
    let fp = ecfp_with(&mol, &db.manifest.fingerprint)?;
    Ok(Query { canonical: canonical_smiles(&mol), fp })
}

/// Canonical form and fingerprint of a query under the database's
/// fingerprint settings.
pub fn query_fingerprint(db: &Database, smiles: &str) -> Result<(String, Fingerprint), DatastoreError> {
    let q = prepare_query(db, smiles)?;
    Ok((q.canonical, q.fp))
}

fn candidates(
    db: &Database,
    query: &Query,
    provider: &dyn AffinityProvider,
    config: &ScreeningConfig,
) -> Result<Vec<(ScreeningHit, AffinityTriple)>, DatastoreError> {
    let hits = screen(&query.fp, &db.targets, &db.models, &db.graph, config)?;
    hits.into_iter()
        .map(|hit| {
            let pockets = db.pockets.for_target(&hit.target_id);
            let (query_affinity, best_pocket) = predict_affinity(provider, &query.canonical, &pockets)?;
            let &(positive_mean, background_mean) = db.affinity_refs.get(&hit.target_id).ok_or_else(|| {
                AffinityError::Coverage { compound: "reference set".into(), target_id: hit.target_id.clone() }
            })?;
            Ok((hit, AffinityTriple { query_affinity, positive_mean, background_mean, best_pocket }))
        })
        .collect()
}

fn similar_actives(db: &Database, target_id: &str, query: &Fingerprint, limit: usize) -> Vec<SimilarActive> {
    let Some(t) = db.target(target_id) else { return Vec::new() };
    let mut sims: Vec<(f64, usize)> = t.active_fps.iter().enumerate().map(|(i, fp)| (tanimoto_unchecked(query, fp), i)).collect();
    sims.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| t.active_ids[a.1].cmp(&t.active_ids[b.1])));
    sims.into_iter()
        .take(limit)
        .map(|(similarity, i)| SimilarActive {
            compound_id: t.active_ids[i].clone(),
            smiles: t.active_smiles[i].clone(),
            similarity,
        })
        .collect()
}

/// Screens, scores and ranks one query against a built database.
pub fn predict(
    db: &Database,
    smiles: &str,
    provider: &dyn AffinityProvider,
    config: &PredictConfig,
) -> Result<ResultDocument, DatastoreError> {
    let query = prepare_query(db, smiles)?;
    let cands = candidates(db, &query, provider, &config.screening)?;
    let candidate_count = cands.len();
    let ranked = predict_ranking(db.ranker.as_ref(), cands, config.top)?;
    let predictions = ranked
        .into_iter()
        .map(|r| {
            let t = db.target(&r.target_id).expect("candidates come from the database");
            PredictionRecord {
                rank: r.rank,
                name: t.name.clone(),
                organism: t.organism.clone(),
                probability: r.probability,
                subset: r.hit.subset.number(),
                z: r.hit.z,
                p: r.hit.p,
                e: r.hit.e,
                max_sim: r.hit.max_sim,
                max_sim_compound: r.hit.max_sim_compound.clone(),
                cumulative_hit: r.hit.cumulative_hit,
                via_association: r.hit.via_association,
                association_parent: r.hit.association_parent.clone(),
                parent_e: r.hit.parent_e,
                similar_actives: similar_actives(db, &r.target_id, &query.fp, config.similar_actives),
                affinity: r.affinity,
                target_id: r.target_id,
            }
        })
        .collect();
    Ok(ResultDocument {
        query: smiles.to_string(),
        canonical_query: query.canonical,
        manifest_digest: db.manifest_digest.clone(),
        candidate_count,
        predictions,
    })
}

/// Screens every case and pairs each candidate with its features.
pub fn rank_cases(
    db: &Database,
    cases: &[EvalCase],
    provider: &dyn AffinityProvider,
    config: &ScreeningConfig,
) -> Result<Vec<RankCase>, DatastoreError> {
    cases
        .par_iter()
        .map(|case| {
            let query = prepare_query(db, &case.compound)?;
            let candidates = candidates(db, &query, provider, config)?
                .into_iter()
                .map(|(hit, aff)| (hit.target_id.clone(), assemble_features(&hit, &aff)))
                .collect();
            Ok(RankCase { compound: case.compound.clone(), true_targets: case.true_targets.clone(), candidates })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub train_cases: usize,
    pub test_cases: usize,
    pub rows: usize,
    pub positive_rows: usize,
    /// Held-out metrics; absent when nothing was held out.
    pub test_metrics: Option<MetricsReport>,
    pub importance: Vec<(String, f64)>,
    pub manifest_digest: String,
}

/// Trains the ranker on a compound-grouped split of `cases` and stores it in
/// the database. With `test_fraction == 0` every case is used for training.
pub fn train_ranker(
    dir: &Path,
    cases: &[EvalCase],
    provider: &dyn AffinityProvider,
    params: &ForestParams,
    seed: u64,
    test_fraction: f64,
) -> Result<TrainSummary, DatastoreError> {
    let db = Database::open_built(dir)?;
    let ranked = rank_cases(&db, cases, provider, &ScreeningConfig::default())?;
    let (train_idx, test_idx) = split_cases(ranked.len(), test_fraction, seed);
    let train: Vec<RankCase> = train_idx.iter().map(|&i| ranked[i].clone()).collect();
    let test: Vec<RankCase> = test_idx.iter().map(|&i| ranked[i].clone()).collect();
    let forest = train_on_cases(&train, params, seed)?;
    let test_metrics = if test.is_empty() {
        None
    } else {
        Some(evaluate_cases(&forest, &test, &FeatureMask::new("none", &[]), crate::eval::DEFAULT_K, crate::eval::DEFAULT_N)?)
    };
    let rows: usize = train.iter().map(|c| c.candidates.len()).sum();
    let positive_rows = train.iter().flat_map(RankCase::labelled_rows).filter(|r| r.1).count();
    let importance = forest.feature_importance();

    let mut manifest = db.manifest.clone();
    let mut text = forest.to_json();
    text.push('\n');
    write_artifact(dir, &mut manifest.files, RANKER, text.as_bytes())?;
    let manifest_digest = manifest.write(dir)?;
    Ok(TrainSummary {
        train_cases: train.len(),
        test_cases: test.len(),
        rows,
        positive_rows,
        test_metrics,
        importance: (0..FEATURE_COUNT).map(|i| (FEATURE_NAMES[i].to_string(), importance[i])).collect(),
        manifest_digest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub metrics: MetricsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationReport>,
}

/// Metrics of the stored ranker on `cases`, optionally with ablations.
pub fn evaluate(
    db: &Database,
    cases: &[EvalCase],
    provider: &dyn AffinityProvider,
    masks: &[FeatureMask],
    k: usize,
    n: usize,
) -> Result<EvaluationSummary, DatastoreError> {
    let forest = db.ranker.as_ref().ok_or(crate::ranking::RankingError::NoModel)?;
    let ranked = rank_cases(db, cases, provider, &ScreeningConfig::default())?;
    if masks.is_empty() {
        let metrics = evaluate_cases(forest, &ranked, &FeatureMask::new("none", &[]), k, n)?;
        return Ok(EvaluationSummary { metrics, ablation: None });
    }
    let report = ablate(forest, &ranked, masks, k, n)?;
    Ok(EvaluationSummary { metrics: report.baseline.clone(), ablation: Some(report) })
}
