//! On-disk target database: a directory of flat files indexed by a manifest
//! that records a SHA-256 digest for every artifact.
//!
//! | file               | written by  | contents                                    |
//! |--------------------|-------------|---------------------------------------------|
//! | `manifest.json`    | all stages  | config, counts, digests                     |
//! | `accepted.tsv`     | ingest      | surviving interaction rows                  |
//! | `rejections.tsv`   | ingest      | dropped rows with their first failing rule  |
//! | `targets.tsv`      | ingest      | one row per active                          |
//! | `fingerprints.bin` | ingest      | fingerprints parallel to `targets.tsv`      |
//! | `models.json`      | build       | fitted background models                    |
//! | `association.tsv`  | build       | target association graph                    |
//! | `affinity_refs.tsv`| build       | per-target affinity reference means         |
//! | `pockets.tsv`      | build       | pocket table, when one was supplied         |
//! | `ranker.json`      | train-rank  | random-forest ranking model                 |

mod build;
mod ingest;
mod predict;

use std::collections::BTreeMap;
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use build::{
    background_pool, build, fit_model, n_db_for, select_threshold, BuildConfig, BuildSummary, PoolSource, TsSelection,
};
pub use ingest::{
    ingest, ingest_rows, read_aliases, ActivityType, IngestConfig, IngestOutcome, IngestReport, InteractionRecord,
    Rejection, RejectRule, Relation, INTERACTIONS_HEADER,
};
pub use predict::{
    evaluate, predict, query_fingerprint, rank_cases, train_ranker, EvaluationSummary, PredictConfig, PredictionRecord, ResultDocument,
    SimilarActive, TrainSummary, SIMILAR_ACTIVES,
};

use crate::affinity::{AffinityError, PocketTable};
use crate::chem::SmilesError;
use crate::eval::EvalError;
use crate::fingerprint::{read_fingerprints, FingerprintConfig, FingerprintError};
use crate::ranking::{RankForest, RankingError};
use crate::scaffold::ScaffoldKey;
use crate::screening::{read_association_tsv, AssociationGraph, ScreeningError, TargetRecord};
use crate::stats::{ModelSet, Purpose, StatError, Subset};

pub const MANIFEST_VERSION: u32 = 1;

pub const MANIFEST: &str = "manifest.json";
pub const ACCEPTED: &str = "accepted.tsv";
pub const REJECTIONS: &str = "rejections.tsv";
pub const TARGETS: &str = "targets.tsv";
pub const FINGERPRINTS: &str = "fingerprints.bin";
pub const MODELS: &str = "models.json";
pub const ASSOCIATION: &str = "association.tsv";
pub const AFFINITY_REFS: &str = "affinity_refs.tsv";
pub const POCKETS: &str = "pockets.tsv";
pub const RANKER: &str = "ranker.json";

const TARGETS_HEADER: &str = "target_id\tname\torganism\tcompound_id\tsmiles\tscaffold\tring_count";
const REFS_HEADER: &str = "target_id\tpositive_mean\tbackground_mean";

#[derive(Debug, Error)]
pub enum DatastoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file} line {line}: {message}")]
    Format { file: String, line: usize, message: String },
    #[error("{0}: digest does not match the manifest")]
    Digest(String),
    #[error("database at {0} has not been built")]
    NotBuilt(PathBuf),
    #[error("no targets survived ingest")]
    NoTargets,
    #[error("query: {0}")]
    Query(#[from] SmilesError),
    #[error("query has no heavy atoms")]
    EmptyQuery,
    #[error("fitting {subset}/{purpose}: {source}")]
    Fit { subset: Subset, purpose: Purpose, source: StatError },
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error(transparent)]
    Screening(#[from] ScreeningError),
    #[error(transparent)]
    Affinity(#[from] AffinityError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl DatastoreError {
    /// Bad input or a broken database, as opposed to a failure inside the pipeline.
    pub fn is_user_error(&self) -> bool {
        match self {
            DatastoreError::Io { .. }
            | DatastoreError::Format { .. }
            | DatastoreError::Digest(_)
            | DatastoreError::NotBuilt(_)
            | DatastoreError::NoTargets
            | DatastoreError::Query(_)
            | DatastoreError::EmptyQuery => true,
            DatastoreError::Affinity(e) => matches!(e, AffinityError::Coverage { .. } | AffinityError::Format { .. }),
            DatastoreError::Ranking(e) => matches!(e, RankingError::NoModel | RankingError::SingleClass),
            DatastoreError::Eval(e) => matches!(e, EvalError::Format { .. } | EvalError::EmptyCases),
            DatastoreError::Screening(e) => matches!(e, ScreeningError::Format { .. }),
            _ => false,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatastoreError + '_ {
    move |source| DatastoreError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn format_err(file: &str, line: usize, message: impl Into<String>) -> DatastoreError {
    DatastoreError::Format { file: file.to_string(), line, message: message.into() }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingested,
    Built,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCounts {
    pub targets: usize,
    pub actives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub seed: u64,
    pub scale: f64,
    pub affinity: String,
    pub background_compounds: usize,
    /// `"<subset>/<purpose>"` keys of fitted models.
    pub models_present: Vec<String>,
    /// Keys skipped because their subset has no targets.
    pub models_absent: Vec<String>,
    pub association_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub stage: Stage,
    pub fingerprint: FingerprintConfig,
    /// Keyed by subset number.
    pub subsets: BTreeMap<u8, SubsetCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build: Option<BuildInfo>,
    /// SHA-256 of every artifact file other than the manifest itself.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<(Manifest, String), DatastoreError> {
        let path = dir.join(MANIFEST);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let manifest: Manifest =
            serde_json::from_slice(&bytes).map_err(|e| format_err(MANIFEST, e.line(), e.to_string()))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(format_err(MANIFEST, 0, format!("unsupported version {}", manifest.version)));
        }
        Ok((manifest, sha256_hex(&bytes)))
    }

    /// Writes the manifest and returns its digest.
    pub fn write(&self, dir: &Path) -> Result<String, DatastoreError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        let path = dir.join(MANIFEST);
        fs::write(&path, &text).map_err(io_err(&path))?;
        Ok(sha256_hex(text.as_bytes()))
    }

    pub fn verify(&self, dir: &Path) -> Result<(), DatastoreError> {
        for (name, digest) in &self.files {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            if &sha256_hex(&bytes) != digest {
                return Err(DatastoreError::Digest(name.clone()));
            }
        }
        Ok(())
    }
}

/// Writes `contents` to `dir/name` and records its digest.
pub(crate) fn write_artifact(
    dir: &Path,
    files: &mut BTreeMap<String, String>,
    name: &str,
    contents: &[u8],
) -> Result<(), DatastoreError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))?;
    files.insert(name.to_string(), sha256_hex(contents));
    Ok(())
}

pub(crate) fn subset_counts(targets: &[TargetRecord]) -> BTreeMap<u8, SubsetCounts> {
    let mut out: BTreeMap<u8, SubsetCounts> = Subset::ALL.iter().map(|s| (s.number(), SubsetCounts::default())).collect();
    for t in targets {
        let c = out.get_mut(&t.subset.number()).expect("all subsets present");
        c.targets += 1;
        c.actives += t.active_fps.len();
    }
    out
}

/// A loaded database. Immutable; safe to share across threads.
#[derive(Debug)]
pub struct Database {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub manifest_digest: String,
    /// Sorted by target id.
    pub targets: Vec<TargetRecord>,
    pub models: ModelSet,
    pub graph: AssociationGraph,
    pub affinity_refs: BTreeMap<String, (f64, f64)>,
    pub pockets: PocketTable,
    pub ranker: Option<RankForest>,
}

fn read_text(dir: &Path, name: &str) -> Result<String, DatastoreError> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(io_err(&path))
}

impl Database {
    /// Loads whatever stages are present after checking every digest.
    pub fn open(dir: &Path) -> Result<Database, DatastoreError> {
        let (manifest, manifest_digest) = Manifest::read(dir)?;
        manifest.verify(dir)?;
        let targets = read_targets(dir, &manifest.fingerprint)?;
        let mut db = Database {
            dir: dir.to_path_buf(),
            manifest,
            manifest_digest,
            targets,
            models: ModelSet::new(),
            graph: AssociationGraph::default(),
            affinity_refs: BTreeMap::new(),
            pockets: PocketTable::default(),
            ranker: None,
        };
        if db.manifest.stage >= Stage::Built {
            db.models = ModelSet::from_json(&read_text(dir, MODELS)?)?;
            db.graph = read_association_tsv(read_text(dir, ASSOCIATION)?.as_bytes())?;
            db.affinity_refs = read_refs(&read_text(dir, AFFINITY_REFS)?)?;
            if db.manifest.files.contains_key(POCKETS) {
                db.pockets = PocketTable::read(read_text(dir, POCKETS)?.as_bytes())?;
            }
        }
        if db.manifest.files.contains_key(RANKER) {
            db.ranker = Some(RankForest::from_json(&read_text(dir, RANKER)?)?);
        }
        Ok(db)
    }

    pub fn open_built(dir: &Path) -> Result<Database, DatastoreError> {
        let db = Database::open(dir)?;
        if db.manifest.stage < Stage::Built {
            return Err(DatastoreError::NotBuilt(dir.to_path_buf()));
        }
        Ok(db)
    }

    pub fn target(&self, id: &str) -> Option<&TargetRecord> {
        self.targets.binary_search_by(|t| t.target_id.as_str().cmp(id)).ok().map(|i| &self.targets[i])
    }
}

pub(crate) fn write_targets(targets: &[TargetRecord]) -> String {
    let mut out = String::from(TARGETS_HEADER);
    out.push('\n');
    for t in targets {
        for k in 0..t.active_ids.len() {
            let key = &t.scaffold_keys[k];
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                t.target_id, t.name, t.organism, t.active_ids[k], t.active_smiles[k], key.canonical_string, key.ring_count
            ));
        }
    }
    out
}

fn read_targets(dir: &Path, config: &FingerprintConfig) -> Result<Vec<TargetRecord>, DatastoreError> {
    let path = dir.join(FINGERPRINTS);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let (fp_config, fps) = read_fingerprints(&bytes[..])?;
    if &fp_config != config {
        return Err(format_err(FINGERPRINTS, 0, "fingerprint config differs from the manifest"));
    }
    let text = read_text(dir, TARGETS)?;
    let mut rows = Vec::new();
    for (n, line) in text.as_bytes().lines().enumerate() {
        let line = line.map_err(io_err(&dir.join(TARGETS)))?;
        if n == 0 {
            if line != TARGETS_HEADER {
                return Err(format_err(TARGETS, 1, "unexpected header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(format_err(TARGETS, n + 1, format!("expected 7 columns, found {}", cols.len())));
        }
        let ring_count: usize = cols[6].parse().map_err(|_| format_err(TARGETS, n + 1, "bad ring count"))?;
        rows.push((cols.iter().map(|c| c.to_string()).collect::<Vec<_>>(), ring_count));
    }
    if rows.len() != fps.len() {
        return Err(format_err(FINGERPRINTS, 0, format!("{} fingerprints for {} actives", fps.len(), rows.len())));
    }
    let mut targets: Vec<TargetRecord> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let id = &rows[start].0[0];
        let end = start + rows[start..].iter().take_while(|r| &r.0[0] == id).count();
        let group = &rows[start..end];
        let record = TargetRecord::new(
            id.clone(),
            group[0].0[1].clone(),
            group[0].0[2].clone(),
            group.iter().map(|r| r.0[3].clone()).collect(),
            group.iter().map(|r| r.0[4].clone()).collect(),
            fps[start..end].to_vec(),
            group.iter().map(|r| ScaffoldKey { canonical_string: r.0[5].clone(), ring_count: r.1 }).collect(),
        )?;
        if targets.last().is_some_and(|t| t.target_id >= record.target_id) {
            return Err(format_err(TARGETS, start + 2, format!("target {id} out of order")));
        }
        targets.push(record);
        start = end;
    }
    Ok(targets)
}

pub(crate) fn write_refs(refs: &BTreeMap<String, (f64, f64)>) -> String {
    let mut out = String::from(REFS_HEADER);
    out.push('\n');
    for (id, (pos, bg)) in refs {
        out.push_str(&format!("{id}\t{pos}\t{bg}\n"));
    }
    out
}

fn read_refs(text: &str) -> Result<BTreeMap<String, (f64, f64)>, DatastoreError> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 {
            if line != REFS_HEADER {
                return Err(format_err(AFFINITY_REFS, 1, "unexpected header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|_| format_err(AFFINITY_REFS, n + 1, format!("bad number {s:?}")));
        let [id, pos, bg] = cols[..] else {
            return Err(format_err(AFFINITY_REFS, n + 1, "expected 3 columns"));
        };
        out.insert(id.to_string(), (parse(pos)?, parse(bg)?));
    }
    Ok(out)
}

/// One SMILES per line; blank lines and `#` comments are skipped, and an
/// optional second whitespace-separated column is ignored.
pub fn read_smiles_list<R: BufRead>(input: R) -> Result<Vec<String>, std::io::Error> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.split_whitespace().next().expect("nonempty line").to_string());
    }
    Ok(out)
}

pub fn model_key_label(subset: Subset, purpose: Purpose) -> String {
    format!("{}/{}", subset.number(), purpose)
}
