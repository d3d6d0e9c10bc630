use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{model_key_label, write_artifact, write_refs, BuildInfo, Database, DatastoreError, Stage};
use super::{AFFINITY_REFS, ASSOCIATION, MODELS, POCKETS, RANKER};
use crate::affinity::{reference_stats, AffinityProvider, PocketTable};
use crate::chem::canonical_compound;
use crate::eval::EvalCase;
use crate::fingerprint::Fingerprint;
use crate::hash::stream_seed;
use crate::screening::{build_association_graph, cumulative_screen, write_association_tsv, ScreeningConfig, TargetRecord};
use crate::stats::{
    chi_square_gof, default_bins, fit_curve, fit_gumbel, sample_background, sample_background_grid, select_ts,
    CurveForm, CurveForms, DedupedPool, FitProvenance, ModelKey, ModelSet, Protocol, SampledPoint, StatError, StatModel, Statistic,
    Subset, TrainingPair, Purpose,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolSource {
    /// Compounds of the subset's own targets.
    Subset,
    /// Every compound in the database; the subset alone was too small.
    Database,
    /// Every compound, with the protocol's largest set size lowered to fit.
    DatabaseCapped,
}

impl PoolSource {
    fn label(self) -> &'static str {
        match self {
            PoolSource::Subset => "subset",
            PoolSource::Database => "database",
            PoolSource::DatabaseCapped => "database_capped",
        }
    }
}

fn distinct_actives<'a>(targets: impl IntoIterator<Item = &'a TargetRecord>) -> Vec<Fingerprint> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in targets {
        for (smiles, fp) in t.active_smiles.iter().zip(&t.active_fps) {
            if seen.insert(smiles.as_str()) {
                out.push(fp.clone());
            }
        }
    }
    out
}

fn pool_of<'a>(subset: Subset, targets: impl IntoIterator<Item = &'a TargetRecord>) -> Vec<Fingerprint> {
    match subset {
        Subset::Two => DedupedPool::from_groups(targets.into_iter().map(|t| (&t.active_fps[..], &t.scaffold_keys[..])))
            .fingerprints()
            .to_vec(),
        _ => distinct_actives(targets),
    }
}

/// Background pool and sampling protocol for `subset`. Falls back to the
/// whole database, then to a capped protocol, when the pool is too small.
pub fn background_pool(
    targets: &[TargetRecord],
    subset: Subset,
    scale: f64,
) -> Result<(Vec<Fingerprint>, Protocol, PoolSource), StatError> {
    let protocol = Protocol::for_subset(subset).scaled(scale)?;
    let own = pool_of(subset, targets.iter().filter(|t| t.subset == subset));
    if own.len() >= protocol.min_pool() {
        return Ok((own, protocol, PoolSource::Subset));
    }
    let all = pool_of(subset, targets);
    if all.len() >= protocol.min_pool() {
        return Ok((all, protocol, PoolSource::Database));
    }
    if all.is_empty() {
        return Err(StatError::EmptySet);
    }
    let capped = protocol.capped(all.len());
    Ok((all, capped, PoolSource::DatabaseCapped))
}

/// Comparison count behind an E-value: one per target in the subset for
/// query screening, one per ordered target pair for clustering.
pub fn n_db_for(members: usize, purpose: Purpose) -> u64 {
    let n = members as u64;
    match purpose {
        Purpose::Cumulative => n.max(1),
        Purpose::Clustering => (n * n.saturating_sub(1)).max(1),
    }
}

fn model_seed(seed: u64, subset: Subset, purpose: Purpose) -> u64 {
    let p = match purpose {
        Purpose::Cumulative => 0,
        Purpose::Clustering => 1,
    };
    stream_seed(seed, &[subset.number() as u64, p])
}

fn fit_points(
    points: &[SampledPoint],
    subset: Subset,
    purpose: Purpose,
    ts: f64,
    n_db: u64,
    provenance: FitProvenance,
) -> Result<StatModel, StatError> {
    let forms = CurveForms::default_for(subset);
    let mean = fit_curve(points, Statistic::Mean, forms.mean)?;
    let mut std = fit_curve(points, Statistic::Std, forms.std)?;
    // Queries are scored at S below the sampled range, so the std curve must
    // stay positive down to S = 1.
    let std_power_fallback = !(std.curve.is_increasing() && std.curve.eval(1.0) > 0.0);
    if std_power_fallback {
        std = fit_curve(points, Statistic::Std, CurveForm::Power)?;
    }
    let mut model = StatModel {
        subset,
        purpose,
        ts,
        mean_curve: mean.curve,
        std_curve: std.curve,
        n_db,
        provenance: Some(FitProvenance { mean_rss: mean.rss, std_rss: std.rss, std_power_fallback, ..provenance }),
    };
    if purpose == Purpose::Clustering {
        let zs: Vec<f64> = points.iter().filter_map(|p| model.z_score(p.raw, p.s as f64).ok()).collect();
        if let Ok(g) = fit_gumbel(&zs) {
            let prov = model.provenance.as_mut().expect("set above");
            prov.gumbel = Some((g.loc, g.scale));
            prov.chi_square = chi_square_gof(&zs, &g, default_bins(zs.len())).ok().map(|r| (r.statistic, r.p, r.dof));
        }
    }
    Ok(model)
}

/// Samples a background and fits one model.
pub fn fit_model(
    targets: &[TargetRecord],
    subset: Subset,
    purpose: Purpose,
    ts: f64,
    scale: f64,
    seed: u64,
) -> Result<StatModel, DatastoreError> {
    let wrap = |source| DatastoreError::Fit { subset, purpose, source };
    let (pool, protocol, source) = background_pool(targets, subset, scale).map_err(wrap)?;
    let seed = model_seed(seed, subset, purpose);
    let points = sample_background(&pool, &protocol, ts, seed).map_err(wrap)?;
    let members = targets.iter().filter(|t| t.subset == subset).count();
    let provenance = FitProvenance {
        seed,
        protocol,
        pool_size: pool.len(),
        pool_source: source.label().to_string(),
        point_count: points.len(),
        mean_rss: 0.0,
        std_rss: 0.0,
        gumbel: None,
        chi_square: None,
        std_power_fallback: false,
    };
    fit_points(&points, subset, purpose, ts, n_db_for(members, purpose), provenance).map_err(wrap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsSelection {
    pub subset: Subset,
    pub purpose: Purpose,
    pub ts: f64,
    /// Recall for cumulative models, chi-square p for clustering models.
    pub score: f64,
    /// Every threshold whose fit succeeded, with its score.
    pub candidates: Vec<(f64, f64)>,
}

/// Fits a model at every threshold of `grid` from one shared background and
/// picks the best. Cumulative models are scored by recall of `training`
/// targets in the subset; clustering models by the chi-square p of their
/// Gumbel fit. Ties go to the larger threshold.
pub fn select_threshold(
    targets: &[TargetRecord],
    subset: Subset,
    purpose: Purpose,
    grid: &[f64],
    training: &[(Fingerprint, EvalCase)],
    scale: f64,
    seed: u64,
) -> Result<TsSelection, DatastoreError> {
    let wrap = |source| DatastoreError::Fit { subset, purpose, source };
    let (pool, protocol, source) = background_pool(targets, subset, scale).map_err(wrap)?;
    let fit_seed = model_seed(seed, subset, purpose);
    let per_ts = sample_background_grid(&pool, &protocol, grid, fit_seed).map_err(wrap)?;
    let members: Vec<TargetRecord> = targets.iter().filter(|t| t.subset == subset).cloned().collect();
    let n_db = n_db_for(members.len(), purpose);
    let models: Vec<StatModel> = grid
        .par_iter()
        .zip(&per_ts)
        .filter_map(|(&ts, points)| {
            let provenance = FitProvenance {
                seed: fit_seed,
                protocol,
                pool_size: pool.len(),
                pool_source: source.label().to_string(),
                point_count: points.len(),
                mean_rss: 0.0,
                std_rss: 0.0,
                gumbel: None,
                chi_square: None,
                std_power_fallback: false,
            };
            fit_points(points, subset, purpose, ts, n_db, provenance).ok()
        })
        .collect();
    if models.is_empty() {
        return Err(wrap(StatError::EmptyGrid));
    }

    let candidates: Vec<(f64, f64)> = match purpose {
        Purpose::Clustering => models
            .iter()
            .map(|m| (m.ts, m.provenance.as_ref().and_then(|p| p.chi_square).map_or(0.0, |c| c.1)))
            .collect(),
        Purpose::Cumulative => {
            let ids: BTreeSet<&str> = members.iter().map(|t| t.target_id.as_str()).collect();
            let pairs: Vec<TrainingPair<Fingerprint>> = training
                .iter()
                .filter_map(|(fp, case)| {
                    let true_targets: BTreeSet<String> =
                        case.true_targets.iter().filter(|t| ids.contains(t.as_str())).cloned().collect();
                    (!true_targets.is_empty()).then(|| TrainingPair { query: fp.clone(), true_targets })
                })
                .collect();
            let config = ScreeningConfig::default();
            let screen = |m: &StatModel, q: &Fingerprint| -> BTreeSet<String> {
                let mut set = ModelSet::new();
                set.insert(m.clone());
                cumulative_screen(q, &members, &set, &config)
                    .map(|hits| hits.into_iter().map(|h| h.target_id).collect())
                    .unwrap_or_default()
            };
            models
                .iter()
                .map(|m| Ok((m.ts, select_ts(std::slice::from_ref(m), &pairs, screen)?.1)))
                .collect::<Result<_, StatError>>()
                .map_err(wrap)?
        }
    };
    let &(ts, score) = candidates
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .expect("nonempty");
    Ok(TsSelection { subset, purpose, ts, score, candidates })
}

pub struct BuildConfig {
    pub seed: u64,
    /// Background sampling scale in (0, 1].
    pub scale: f64,
    /// Thresholds replacing the reference defaults.
    pub ts: BTreeMap<ModelKey, f64>,
    /// Background compounds for affinity reference means.
    pub background: Vec<String>,
    /// Raw pocket table TSV, copied into the database.
    pub pockets_tsv: Option<String>,
    /// Recorded in the manifest; prediction must use the same provider.
    pub affinity_label: String,
}

impl BuildConfig {
    pub fn new(seed: u64, scale: f64, background: Vec<String>, affinity_label: impl Into<String>) -> BuildConfig {
        BuildConfig { seed, scale, ts: BTreeMap::new(), background, pockets_tsv: None, affinity_label: affinity_label.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub models: Vec<String>,
    pub absent: Vec<String>,
    pub association_edges: usize,
    pub manifest_digest: String,
}

/// Fits models, builds the association graph and affinity references for an
/// ingested database. Drops any previously trained ranker.
pub fn build(dir: &Path, config: &BuildConfig, provider: &dyn AffinityProvider) -> Result<BuildSummary, DatastoreError> {
    let db = Database::open(dir)?;
    let targets = &db.targets;

    let populated: BTreeSet<Subset> = targets.iter().map(|t| t.subset).collect();
    let mut keys = Vec::new();
    let mut absent = Vec::new();
    for subset in Subset::ALL {
        for purpose in [Purpose::Cumulative, Purpose::Clustering] {
            if populated.contains(&subset) {
                keys.push((subset, purpose));
            } else {
                absent.push(model_key_label(subset, purpose));
            }
        }
    }
    let fitted: Vec<StatModel> = keys
        .par_iter()
        .map(|&(subset, purpose)| {
            let ts = config.ts.get(&(subset, purpose)).copied().unwrap_or(StatModel::reference(subset, purpose, 1).ts);
            fit_model(targets, subset, purpose, ts, config.scale, config.seed)
        })
        .collect::<Result<_, _>>()?;
    let mut models = ModelSet::new();
    for m in fitted {
        models.insert(m);
    }

    let graph = build_association_graph(targets, &models)?;

    let pockets = match &config.pockets_tsv {
        Some(text) => PocketTable::read(text.as_bytes())?,
        None => PocketTable::default(),
    };
    let background: Vec<String> = config
        .background
        .iter()
        .map(|s| canonical_compound(s))
        .collect::<Result<_, _>>()
        .map_err(|e| super::format_err("background", 0, e.to_string()))?;
    let refs: BTreeMap<String, (f64, f64)> = targets
        .par_iter()
        .map(|t| Ok((t.target_id.clone(), reference_stats(provider, t, &pockets.for_target(&t.target_id), &background)?)))
        .collect::<Result<_, DatastoreError>>()?;

    let mut manifest = db.manifest.clone();
    manifest.files.remove(RANKER);
    let _ = std::fs::remove_file(dir.join(RANKER));
    manifest.files.remove(POCKETS);
    let mut model_text = models.to_json();
    model_text.push('\n');
    write_artifact(dir, &mut manifest.files, MODELS, model_text.as_bytes())?;
    let mut assoc = Vec::new();
    write_association_tsv(&mut assoc, &graph).map_err(super::io_err(&dir.join(ASSOCIATION)))?;
    write_artifact(dir, &mut manifest.files, ASSOCIATION, &assoc)?;
    write_artifact(dir, &mut manifest.files, AFFINITY_REFS, write_refs(&refs).as_bytes())?;
    if let Some(text) = &config.pockets_tsv {
        write_artifact(dir, &mut manifest.files, POCKETS, text.as_bytes())?;
    }
    let present: Vec<String> = models.iter().map(|m| model_key_label(m.subset, m.purpose)).collect();
    manifest.stage = Stage::Built;
    manifest.build = Some(BuildInfo {
        seed: config.seed,
        scale: config.scale,
        affinity: config.affinity_label.clone(),
        background_compounds: background.len(),
        models_present: present.clone(),
        models_absent: absent.clone(),
        association_edges: graph.edge_count(),
    });
    let manifest_digest = manifest.write(dir)?;
    Ok(BuildSummary { models: present, absent, association_edges: graph.edge_count(), manifest_digest })
}
