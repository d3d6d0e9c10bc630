use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{format_err, io_err, subset_counts, write_artifact, write_targets, DatastoreError, Manifest, Stage};
use super::{ACCEPTED, FINGERPRINTS, MANIFEST_VERSION, REJECTIONS, TARGETS};
use crate::chem::{canonical_smiles, check_element_whitelist, heavy_atom_count, largest_fragment, parse_smiles};
use crate::fingerprint::{ecfp_with, write_fingerprints, Fingerprint, FingerprintConfig};
use crate::scaffold::{scaffold_key, ScaffoldKey};
use crate::screening::TargetRecord;

pub const INTERACTIONS_HEADER: &str = "compound_id\tsmiles\ttarget_id\tactivity_type\trelation\tvalue_nM\torganism";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivityType {
    Kd,
    Ki,
    #[serde(rename = "IC50")]
    Ic50,
    #[serde(rename = "EC50")]
    Ec50,
}

impl ActivityType {
    fn parse(s: &str) -> Option<ActivityType> {
        match s {
            "Kd" => Some(ActivityType::Kd),
            "Ki" => Some(ActivityType::Ki),
            "IC50" => Some(ActivityType::Ic50),
            "EC50" => Some(ActivityType::Ec50),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ActivityType::Kd => "Kd",
            ActivityType::Ki => "Ki",
            ActivityType::Ic50 => "IC50",
            ActivityType::Ec50 => "EC50",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "=")]
    Equal,
    #[serde(rename = "<")]
    Less,
    #[serde(rename = ">")]
    Greater,
}

impl Relation {
    fn parse(s: &str) -> Option<Relation> {
        match s {
            "=" => Some(Relation::Equal),
            "<" => Some(Relation::Less),
            ">" => Some(Relation::Greater),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Relation::Equal => "=",
            Relation::Less => "<",
            Relation::Greater => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub compound_id: String,
    pub smiles: String,
    pub target_id: String,
    pub activity_type: ActivityType,
    pub relation: Relation,
    pub value_nm: f64,
    pub organism: String,
}

impl InteractionRecord {
    fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.compound_id,
            self.smiles,
            self.target_id,
            self.activity_type.as_str(),
            self.relation.as_str(),
            self.value_nm,
            self.organism
        )
    }
}

/// Ingest rules in the order they are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectRule {
    Format,
    ActivityType,
    Relation,
    Value,
    Parse,
    Element,
    HeavyAtoms,
    Duplicate,
}

impl fmt::Display for RejectRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectRule::Format => "format",
            RejectRule::ActivityType => "activity_type",
            RejectRule::Relation => "relation",
            RejectRule::Value => "value",
            RejectRule::Parse => "parse",
            RejectRule::Element => "element",
            RejectRule::HeavyAtoms => "heavy_atoms",
            RejectRule::Duplicate => "duplicate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub compound_id: String,
    pub target_id: String,
    pub rule: RejectRule,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub fingerprint: FingerprintConfig,
    /// Activities must be strictly below this, in nM.
    pub max_value_nm: f64,
    pub max_heavy_atoms: usize,
    /// alias target id → canonical target id.
    pub aliases: BTreeMap<String, String>,
}

impl Default for IngestConfig {
    fn default() -> IngestConfig {
        IngestConfig {
            fingerprint: FingerprintConfig::default(),
            max_value_nm: 20_000.0,
            max_heavy_atoms: 100,
            aliases: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    /// Rows that became actives, in input order, with aliases applied.
    pub accepted: Vec<InteractionRecord>,
    pub rejections: Vec<Rejection>,
    /// Sorted by target id.
    pub targets: Vec<TargetRecord>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<String, usize>,
    pub targets: usize,
    pub actives: usize,
}

struct Curated {
    canonical: String,
    fp: Fingerprint,
    scaffold: ScaffoldKey,
}

type RowResult = Result<(InteractionRecord, Curated), (RejectRule, String)>;

fn check_row(cols: &[&str], config: &IngestConfig) -> RowResult {
    let reject = |rule, detail: String| Err((rule, detail));
    if cols.len() != 7 {
        return reject(RejectRule::Format, format!("expected 7 columns, found {}", cols.len()));
    }
    let value_nm: f64 = match cols[5].trim().parse() {
        Ok(v) if f64::is_finite(v) && v > 0.0 => v,
        _ => return reject(RejectRule::Format, format!("value {:?} is not a positive number", cols[5])),
    };
    let Some(activity_type) = ActivityType::parse(cols[3].trim()) else {
        return reject(RejectRule::ActivityType, cols[3].to_string());
    };
    let relation = match Relation::parse(cols[4].trim()) {
        Some(r @ (Relation::Equal | Relation::Less)) => r,
        _ => return reject(RejectRule::Relation, cols[4].to_string()),
    };
    if value_nm >= config.max_value_nm {
        return reject(RejectRule::Value, format!("{value_nm} nM"));
    }
    let smiles = cols[1].trim();
    let mol = match parse_smiles(smiles) {
        Ok(m) => largest_fragment(&m),
        Err(e) => return reject(RejectRule::Parse, e.to_string()),
    };
    if !check_element_whitelist(&mol) {
        return reject(RejectRule::Element, "element outside the ligand whitelist".into());
    }
    let heavy = heavy_atom_count(&mol);
    if heavy == 0 || heavy > config.max_heavy_atoms {
        return reject(RejectRule::HeavyAtoms, format!("{heavy} heavy atoms"));
    }
    let fp = ecfp_with(&mol, &config.fingerprint).map_err(|e| (RejectRule::Parse, e.to_string()))?;
    let target = cols[2].trim();
    let target_id = config.aliases.get(target).map_or(target, String::as_str).to_string();
    let record = InteractionRecord {
        compound_id: cols[0].trim().to_string(),
        smiles: smiles.to_string(),
        target_id,
        activity_type,
        relation,
        value_nm,
        organism: cols[6].trim().to_string(),
    };
    Ok((record, Curated { canonical: canonical_smiles(&mol), fp, scaffold: scaffold_key(&mol) }))
}

/// Applies the curation rules to an interactions TSV without touching disk.
pub fn ingest_rows<R: BufRead>(input: R, config: &IngestConfig) -> Result<IngestOutcome, DatastoreError> {
    let mut lines = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| format_err("interactions", n + 1, e.to_string()))?;
        if n == 0 {
            if line.trim_end() != INTERACTIONS_HEADER {
                return Err(format_err("interactions", 1, format!("expected header {INTERACTIONS_HEADER:?}")));
            }
            continue;
        }
        if !line.trim().is_empty() {
            lines.push((n + 1, line));
        }
    }
    let checked: Vec<RowResult> = lines
        .par_iter()
        .map(|(_, line)| check_row(&line.split('\t').collect::<Vec<_>>(), config))
        .collect();

    let mut rejections = Vec::new();
    let mut accepted = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut by_target: BTreeMap<String, Vec<(InteractionRecord, Curated)>> = BTreeMap::new();
    for ((line, text), result) in lines.iter().zip(checked) {
        let cols: Vec<&str> = text.split('\t').collect();
        let ids = |i: usize| cols.get(i).map_or(String::new(), |s| s.trim().to_string());
        match result {
            Err((rule, detail)) => rejections.push(Rejection { line: *line, compound_id: ids(0), target_id: ids(2), rule, detail }),
            Ok((record, curated)) => {
                if !seen.insert((record.target_id.clone(), curated.canonical.clone())) {
                    rejections.push(Rejection {
                        line: *line,
                        compound_id: record.compound_id.clone(),
                        target_id: record.target_id.clone(),
                        rule: RejectRule::Duplicate,
                        detail: curated.canonical,
                    });
                    continue;
                }
                accepted.push(record.clone());
                by_target.entry(record.target_id.clone()).or_default().push((record, curated));
            }
        }
    }
    if by_target.is_empty() {
        return Err(DatastoreError::NoTargets);
    }
    let mut targets = Vec::with_capacity(by_target.len());
    for (id, rows) in by_target {
        let organism = rows[0].0.organism.clone();
        let mut ids = Vec::new();
        let mut smiles = Vec::new();
        let mut fps = Vec::new();
        let mut keys = Vec::new();
        for (r, c) in rows {
            ids.push(r.compound_id);
            smiles.push(c.canonical);
            fps.push(c.fp);
            keys.push(c.scaffold);
        }
        targets.push(TargetRecord::new(id.clone(), id, organism, ids, smiles, fps, keys)?);
    }
    Ok(IngestOutcome { accepted, rejections, targets, rows: lines.len() })
}

/// Alias TSV with header `alias_target_id<TAB>canonical_target_id`.
pub fn read_aliases<R: BufRead>(input: R) -> Result<BTreeMap<String, String>, DatastoreError> {
    let mut out = BTreeMap::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| format_err("aliases", n + 1, e.to_string()))?;
        if n == 0 {
            if line.trim_end() != "alias_target_id\tcanonical_target_id" {
                return Err(format_err("aliases", 1, "expected header alias_target_id\\tcanonical_target_id"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some((alias, canonical)) = line.split_once('\t') else {
            return Err(format_err("aliases", n + 1, "expected 2 columns"));
        };
        if out.insert(alias.trim().to_string(), canonical.trim().to_string()).is_some() {
            return Err(format_err("aliases", n + 1, format!("duplicate alias {alias}")));
        }
    }
    Ok(out)
}

/// Curates `input` into a fresh database directory at `dir`.
pub fn ingest<R: BufRead>(input: R, dir: &Path, config: &IngestConfig) -> Result<IngestReport, DatastoreError> {
    let outcome = ingest_rows(input, config)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut files = BTreeMap::new();
    let mut accepted = String::from(INTERACTIONS_HEADER);
    accepted.push('\n');
    for r in &outcome.accepted {
        accepted.push_str(&r.to_tsv());
        accepted.push('\n');
    }
    write_artifact(dir, &mut files, ACCEPTED, accepted.as_bytes())?;

    let mut rejected = String::from("line\tcompound_id\ttarget_id\trule\tdetail\n");
    for r in &outcome.rejections {
        let detail = r.detail.replace(['\t', '\n'], " ");
        rejected.push_str(&format!("{}\t{}\t{}\t{}\t{detail}\n", r.line, r.compound_id, r.target_id, r.rule));
    }
    write_artifact(dir, &mut files, REJECTIONS, rejected.as_bytes())?;

    write_artifact(dir, &mut files, TARGETS, write_targets(&outcome.targets).as_bytes())?;
    let fps: Vec<Fingerprint> = outcome.targets.iter().flat_map(|t| t.active_fps.iter().cloned()).collect();
    let mut bin = Vec::new();
    write_fingerprints(&mut bin, &config.fingerprint, &fps)?;
    write_artifact(dir, &mut files, FINGERPRINTS, &bin)?;

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        stage: Stage::Ingested,
        fingerprint: config.fingerprint,
        subsets: subset_counts(&outcome.targets),
        build: None,
        files,
    };
    manifest.write(dir)?;

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &outcome.rejections {
        *counts.entry(r.rule.to_string()).or_default() += 1;
    }
    Ok(IngestReport {
        rows: outcome.rows,
        accepted: outcome.accepted.len(),
        rejected: counts,
        targets: outcome.targets.len(),
        actives: fps.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = INTERACTIONS_HEADER;

    fn run(rows: &[&str]) -> IngestOutcome {
        let text = format!("{HEADER}\n{}\n", rows.join("\n"));
        ingest_rows(text.as_bytes(), &IngestConfig::default()).unwrap()
    }

    fn rule_of(rows: &[&str]) -> Vec<RejectRule> {
        run(rows).rejections.iter().map(|r| r.rule).collect()
    }

    const KEEP: &str = "K\tCCO\tT9\tKd\t=\t5\tHomo sapiens";

    #[test]
    fn relation_and_value_filters() {
        assert_eq!(rule_of(&[KEEP, "a\tCCN\tT1\tKd\t>\t5\tH"]), [RejectRule::Relation]);
        assert_eq!(rule_of(&[KEEP, "a\tCCN\tT1\tKd\t=\t20000\tH"]), [RejectRule::Value]);
        assert!(rule_of(&[KEEP, "a\tCCN\tT1\tKd\t<\t19999.9\tH"]).is_empty());
        assert_eq!(rule_of(&[KEEP, "a\tCCN\tT1\tpIC50\t=\t5\tH"]), [RejectRule::ActivityType]);
        assert_eq!(rule_of(&[KEEP, "a\tCCN\tT1\tKd\t=\t-1\tH"]), [RejectRule::Format]);
        assert_eq!(rule_of(&[KEEP, "a\tCCN\tT1"]), [RejectRule::Format]);
    }

    #[test]
    fn first_failing_rule_wins() {
        // Bad relation and bad SMILES: relation is checked first.
        assert_eq!(rule_of(&[KEEP, "a\tC1CC(\tT1\tKd\t>\t5\tH"]), [RejectRule::Relation]);
        assert_eq!(rule_of(&[KEEP, "a\tC1CC(\tT1\tKd\t=\t5\tH"]), [RejectRule::Parse]);
        assert_eq!(rule_of(&[KEEP, "a\t[Pt](Cl)Cl\tT1\tKd\t=\t5\tH"]), [RejectRule::Element]);
        let big = "C".repeat(101);
        assert_eq!(rule_of(&[KEEP, &format!("a\t{big}\tT1\tKd\t=\t5\tH")]), [RejectRule::HeavyAtoms]);
    }

    #[test]
    fn largest_fragment_and_dedup() {
        let out = run(&["a\tCCO.Cl\tT1\tKd\t=\t5\tH", "b\tOCC\tT1\tKi\t<\t9\tH", "c\tOCC\tT2\tKi\t<\t9\tH"]);
        assert_eq!(out.rejections.len(), 1);
        assert_eq!(out.rejections[0].rule, RejectRule::Duplicate);
        assert_eq!(out.rejections[0].compound_id, "b");
        assert_eq!(out.targets.len(), 2);
        assert_eq!(out.targets[0].active_smiles, vec!["CCO".to_string()]);
    }

    #[test]
    fn aliases_merge_targets() {
        let mut config = IngestConfig::default();
        config.aliases.insert("T1_mouse".into(), "T1".into());
        let text = format!("{HEADER}\na\tCCO\tT1\tKd\t=\t5\tH\nb\tCCN\tT1_mouse\tKd\t=\t5\tM\n");
        let out = ingest_rows(text.as_bytes(), &config).unwrap();
        assert_eq!(out.targets.len(), 1);
        assert_eq!(out.targets[0].active_ids, ["a", "b"]);
        let aliases = read_aliases(&b"alias_target_id\tcanonical_target_id\nX\tY\n"[..]).unwrap();
        assert_eq!(aliases["X"], "Y");
    }

    #[test]
    fn zero_survivors_is_an_error() {
        let text = format!("{HEADER}\na\tCCO\tT1\tKd\t>\t5\tH\n");
        assert!(matches!(ingest_rows(text.as_bytes(), &IngestConfig::default()), Err(DatastoreError::NoTargets)));
        assert!(ingest_rows(&b"wrong\n"[..], &IngestConfig::default()).is_err());
    }
}
