//! Command-line front end: argument parsing, dispatch and output formatting.
//! All pipeline work lives in the core crate.

pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use targetscope::affinity::{AffinityProvider, SyntheticProvider, TableProvider};
use targetscope::chem::SmilesError;
use targetscope::datastore::{
    self, query_fingerprint, read_aliases, read_smiles_list, BuildConfig, Database, DatastoreError, IngestConfig,
    PredictConfig, ResultDocument,
};
use targetscope::eval::{read_eval_cases, write_eval_cases, EvalCase, MetricsReport, DEFAULT_K, DEFAULT_N};
use targetscope::ranking::{ablate, evaluate_cases, FeatureMask, ForestParams, FEATURE_NAMES};
use targetscope::screening::{ScreeningConfig, MAX_SIM_THRESHOLD, SIGNIFICANCE};
use targetscope::stats::{ts_grid, FitCurve, Purpose, StatModel, Subset};
use targetscope::synth::{diversity_set, interactions_tsv, planted, PlantedConfig};

/// Exit status for bad input, bad flags or a broken database.
pub const EXIT_USER: i32 = 1;
/// Exit status for failures inside the pipeline.
pub const EXIT_INTERNAL: i32 = 2;

const DEFAULT_BACKGROUND: usize = 100;
const DEFAULT_BACKGROUND_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "targetscope", version, about = "Ligand-based target prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an interactions table and write an ingested database.
    Ingest(IngestArgs),
    /// Fit background models, the association graph and affinity references.
    Build(BuildArgs),
    /// Fit one background model and print it without storing it.
    Fit(FitArgs),
    /// Scan a threshold grid for one model and report the best threshold.
    SelectTs(SelectTsArgs),
    /// Predict targets for one or more query structures.
    Predict(PredictArgs),
    /// Train the candidate ranker on labelled cases and store it.
    TrainRank(TrainRankArgs),
    /// Score the stored ranker on labelled cases, optionally with ablation.
    Evaluate(EvaluateArgs),
    /// Render a prediction result as a static HTML page.
    Report(ReportArgs),
    /// Write a planted synthetic corpus for demonstrations and tests.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Interactions TSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Database directory, created if missing.
    #[arg(long)]
    pub db: PathBuf,
    /// Two-column TSV mapping alias target ids to canonical ids.
    #[arg(long)]
    pub aliases: Option<PathBuf>,
    /// Print machine-readable JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct AffinityArgs {
    /// Affinity provider: `synthetic[:SEED]` or `table:PATH`.
    #[arg(long)]
    pub affinity: Option<String>,
    /// Score for keys missing from an affinity table.
    #[arg(long)]
    pub affinity_default: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Background sampling scale in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[command(flatten)]
    pub affinity: AffinityArgs,
    /// Background compounds for affinity references, one SMILES per line.
    #[arg(long)]
    pub background: Option<PathBuf>,
    /// Pocket table TSV (`target_id`, `pocket_id`).
    #[arg(long)]
    pub pockets: Option<PathBuf>,
    /// Threshold override `SUBSET/PURPOSE=TS`, repeatable.
    #[arg(long, value_name = "SUBSET/PURPOSE=TS")]
    pub ts: Vec<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub db: PathBuf,
    /// Subset number, 1 to 3.
    #[arg(long)]
    pub subset: u8,
    /// `cumulative` or `clustering`.
    #[arg(long)]
    pub purpose: String,
    /// Similarity threshold; defaults to the reference value for the model.
    #[arg(long)]
    pub ts: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SelectTsArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub subset: u8,
    #[arg(long)]
    pub purpose: String,
    /// Labelled cases (`compound`, `targets`); required for cumulative models.
    #[arg(long)]
    pub training: Option<PathBuf>,
    /// Comma-separated thresholds; defaults to 0.00 to 1.00 in steps of 0.01.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub db: PathBuf,
    /// Query structure.
    #[arg(long, conflicts_with = "smiles_file", required_unless_present = "smiles_file")]
    pub smiles: Option<String>,
    /// File of query structures, one per line.
    #[arg(long)]
    pub smiles_file: Option<PathBuf>,
    #[command(flatten)]
    pub affinity: AffinityArgs,
    /// Number of ranked targets to keep.
    #[arg(long)]
    pub top: Option<usize>,
    /// Cumulative hits need P below this.
    #[arg(long, default_value_t = SIGNIFICANCE)]
    pub significance: f64,
    /// Max-similarity hits need similarity above this.
    #[arg(long, default_value_t = MAX_SIM_THRESHOLD)]
    pub max_sim_threshold: f64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    /// Also write the JSON result to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TrainRankArgs {
    #[arg(long)]
    pub db: PathBuf,
    /// Labelled cases (`compound`, `targets`).
    #[arg(long)]
    pub cases: PathBuf,
    #[command(flatten)]
    pub affinity: AffinityArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of compounds held out for the reported metrics.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub cases: PathBuf,
    #[command(flatten)]
    pub affinity: AffinityArgs,
    /// Comma-separated metrics: `topN` (recall and performance at N) and `auc`.
    #[arg(long, value_delimiter = ',', default_value = "top100,top15,auc")]
    pub metrics: Vec<String>,
    /// Mask to ablate, repeatable: `families`, `features`, `all`, a family
    /// name or a comma-separated list of feature names.
    #[arg(long)]
    pub ablate: Vec<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Result JSON written by `predict --out`.
    #[arg(long, conflicts_with_all = ["db", "smiles"], required_unless_present = "db")]
    pub input: Option<PathBuf>,
    /// Predict on the fly instead of reading a result file.
    #[arg(long, requires = "smiles")]
    pub db: Option<PathBuf>,
    #[arg(long)]
    pub smiles: Option<String>,
    #[command(flatten)]
    pub affinity: AffinityArgs,
    #[arg(long)]
    pub top: Option<usize>,
    /// HTML output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the planted corpus and its decoy rows.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn user(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_USER, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_INTERNAL, message: message.into() }
    }
}

impl From<DatastoreError> for CliError {
    fn from(e: DatastoreError) -> CliError {
        let code = if e.is_user_error() { EXIT_USER } else { EXIT_INTERNAL };
        CliError { code, message: e.to_string() }
    }
}

/// Settings shared by the pipeline stages of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// In (0, 1].
    pub scale: f64,
    /// In [0, 1].
    pub significance: f64,
    /// In [0, 1].
    pub max_sim_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig { seed: 0, scale: 1.0, significance: SIGNIFICANCE, max_sim_threshold: MAX_SIM_THRESHOLD }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(CliError::user(format!("--scale must be in (0, 1], got {}", self.scale)));
        }
        for (name, v) in [("--significance", self.significance), ("--max-sim-threshold", self.max_sim_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::user(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    fn screening(&self) -> ScreeningConfig {
        ScreeningConfig {
            significance: self.significance,
            max_sim_threshold: self.max_sim_threshold,
            ..ScreeningConfig::default()
        }
    }
}

/// Where affinity scores come from. The label form is stored in the manifest
/// at build time so later commands reuse the same provider.
#[derive(Debug, Clone, PartialEq)]
pub enum AffinitySpec {
    Synthetic { seed: u64 },
    Table { path: PathBuf, default: Option<f64> },
}

impl AffinitySpec {
    pub fn parse(spec: &str, default: Option<f64>) -> Result<AffinitySpec, CliError> {
        let spec = spec.trim();
        let parsed = if spec == "synthetic" {
            AffinitySpec::Synthetic { seed: 0 }
        } else if let Some(seed) = spec.strip_prefix("synthetic:") {
            let seed = seed.parse().map_err(|_| CliError::user(format!("bad synthetic affinity seed {seed:?}")))?;
            AffinitySpec::Synthetic { seed }
        } else {
            let path = spec.strip_prefix("table:").unwrap_or(spec);
            if path.is_empty() {
                return Err(CliError::user("empty affinity table path"));
            }
            AffinitySpec::Table { path: PathBuf::from(path), default }
        };
        if default.is_some() && matches!(parsed, AffinitySpec::Synthetic { .. }) {
            return Err(CliError::user("--affinity-default applies only to affinity tables"));
        }
        Ok(parsed)
    }

    pub fn label(&self) -> String {
        match self {
            AffinitySpec::Synthetic { seed } => format!("synthetic:{seed}"),
            AffinitySpec::Table { path, default: None } => format!("table:{}", path.display()),
            AffinitySpec::Table { path, default: Some(d) } => format!("table:{};default={d}", path.display()),
        }
    }

    pub fn from_label(label: &str) -> Result<AffinitySpec, CliError> {
        match label.rsplit_once(";default=") {
            Some((spec, d)) => {
                let d = d.parse().map_err(|_| CliError::user(format!("bad affinity label {label:?}")))?;
                AffinitySpec::parse(spec, Some(d))
            }
            None => AffinitySpec::parse(label, None),
        }
    }

    pub fn provider(&self) -> Result<Box<dyn AffinityProvider>, CliError> {
        match self {
            AffinitySpec::Synthetic { seed } => Ok(Box::new(SyntheticProvider { seed: *seed })),
            AffinitySpec::Table { path, default } => {
                let table = TableProvider::read(open(path)?)
                    .map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
                Ok(Box::new(table.with_default(*default)))
            }
        }
    }
}

/// Explicit flags win; otherwise the provider recorded at build time.
fn resolve_affinity(args: &AffinityArgs, db: &Database) -> Result<AffinitySpec, CliError> {
    match &args.affinity {
        Some(spec) => AffinitySpec::parse(spec, args.affinity_default),
        None => {
            let build = db.manifest.build.as_ref().ok_or_else(|| CliError::user("database has not been built"))?;
            let mut spec = AffinitySpec::from_label(&build.affinity)?;
            if let (AffinitySpec::Table { default, .. }, Some(d)) = (&mut spec, args.affinity_default) {
                *default = Some(d);
            }
            Ok(spec)
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USER
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

pub fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => cmd_ingest(a, out),
        Command::Build(a) => cmd_build(a, out),
        Command::Fit(a) => cmd_fit(a, out),
        Command::SelectTs(a) => cmd_select_ts(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::TrainRank(a) => cmd_train_rank(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Report(a) => cmd_report(a, out),
        Command::Synth(a) => cmd_synth(a, out),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn print(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::internal(format!("writing output: {e}")))
}

fn read_cases(path: &Path) -> Result<Vec<EvalCase>, CliError> {
    read_eval_cases(open(path)?).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn parse_subset(n: u8) -> Result<Subset, CliError> {
    Subset::try_from(n).map_err(CliError::user)
}

fn parse_purpose(s: &str) -> Result<Purpose, CliError> {
    match s {
        "cumulative" => Ok(Purpose::Cumulative),
        "clustering" => Ok(Purpose::Clustering),
        _ => Err(CliError::user(format!("purpose must be cumulative or clustering, got {s:?}"))),
    }
}

/// `SUBSET/PURPOSE=TS` with TS in [0, 1].
fn parse_ts_override(s: &str) -> Result<((Subset, Purpose), f64), CliError> {
    let bad = || CliError::user(format!("--ts expects SUBSET/PURPOSE=TS, got {s:?}"));
    let (key, ts) = s.split_once('=').ok_or_else(bad)?;
    let (subset, purpose) = key.split_once('/').ok_or_else(bad)?;
    let subset = parse_subset(subset.trim().parse().map_err(|_| bad())?)?;
    let purpose = parse_purpose(purpose.trim())?;
    let ts: f64 = ts.trim().parse().map_err(|_| bad())?;
    if !(0.0..=1.0).contains(&ts) {
        return Err(CliError::user(format!("threshold must be in [0, 1], got {ts}")));
    }
    Ok(((subset, purpose), ts))
}

/// A parse failure rendered with the query and a caret under the offset.
fn query_error(smiles: &str, e: DatastoreError) -> CliError {
    match &e {
        DatastoreError::Query(SmilesError { offset, .. }) => {
            let caret = " ".repeat(smiles[..(*offset).min(smiles.len())].chars().count());
            CliError::user(format!("{e}\n  {smiles}\n  {caret}^"))
        }
        _ => e.into(),
    }
}

fn cmd_ingest(a: IngestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = IngestConfig::default();
    if let Some(path) = &a.aliases {
        config.aliases = read_aliases(open(path)?)?;
    }
    log::info!("ingesting {} into {}", a.input.display(), a.db.display());
    let report = datastore::ingest(open(&a.input)?, &a.db, &config)?;
    if a.json {
        return print(out, &to_json(&report)?);
    }
    let mut text = format!(
        "ingested {} rows: {} accepted, {} targets, {} actives\n",
        report.rows, report.accepted, report.targets, report.actives
    );
    for (rule, n) in &report.rejected {
        text.push_str(&format!("  rejected {rule}: {n}\n"));
    }
    print(out, &text)
}

fn cmd_build(a: BuildArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let run = RunConfig { seed: a.seed, scale: a.scale, ..RunConfig::default() };
    run.validate()?;
    let spec = AffinitySpec::parse(a.affinity.affinity.as_deref().unwrap_or("synthetic"), a.affinity.affinity_default)?;
    let provider = spec.provider()?;
    let background = match &a.background {
        Some(path) => read_smiles_list(open(path)?).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?,
        None => diversity_set(DEFAULT_BACKGROUND, DEFAULT_BACKGROUND_SEED),
    };
    let mut config = BuildConfig::new(run.seed, run.scale, background, spec.label());
    for s in &a.ts {
        let (key, ts) = parse_ts_override(s)?;
        config.ts.insert(key, ts);
    }
    if let Some(path) = &a.pockets {
        config.pockets_tsv = Some(read_text(path)?);
    }
    log::info!("building {} (seed {}, scale {}, affinity {})", a.db.display(), run.seed, run.scale, config.affinity_label);
    let summary = datastore::build(&a.db, &config, &*provider)?;
    if a.json {
        return print(out, &to_json(&summary)?);
    }
    let mut text = format!("built models {}\n", summary.models.join(" "));
    if !summary.absent.is_empty() {
        text.push_str(&format!("absent (no targets) {}\n", summary.absent.join(" ")));
    }
    text.push_str(&format!("{} association edges\nmanifest {}\n", summary.association_edges, summary.manifest_digest));
    print(out, &text)
}

fn model_text(m: &StatModel) -> String {
    let curve = |c: &FitCurve| format!("{:?} coef={:.6e} r={:.6} c={:.6}", c.form, c.coef, c.r, c.c);
    format!(
        "model {}/{} ts={} n_db={}\n  mean: {}\n  std:  {}\n",
        m.subset,
        m.purpose,
        m.ts,
        m.n_db,
        curve(&m.mean_curve),
        curve(&m.std_curve)
    )
}

fn cmd_fit(a: FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let run = RunConfig { seed: a.seed, scale: a.scale, ..RunConfig::default() };
    run.validate()?;
    let (subset, purpose) = (parse_subset(a.subset)?, parse_purpose(&a.purpose)?);
    let ts = a.ts.unwrap_or(StatModel::reference(subset, purpose, 1).ts);
    if !(0.0..=1.0).contains(&ts) {
        return Err(CliError::user(format!("--ts must be in [0, 1], got {ts}")));
    }
    let db = Database::open(&a.db)?;
    let model = datastore::fit_model(&db.targets, subset, purpose, ts, run.scale, run.seed)?;
    print(out, &if a.json { to_json(&model)? } else { model_text(&model) })
}

fn cmd_select_ts(a: SelectTsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let run = RunConfig { seed: a.seed, scale: a.scale, ..RunConfig::default() };
    run.validate()?;
    let (subset, purpose) = (parse_subset(a.subset)?, parse_purpose(&a.purpose)?);
    let db = Database::open(&a.db)?;
    let cases = match &a.training {
        Some(path) => read_cases(path)?,
        None if purpose == Purpose::Cumulative => {
            return Err(CliError::user("--training is required for cumulative models"));
        }
        None => Vec::new(),
    };
    let training = cases
        .into_iter()
        .map(|case| {
            let (_, fp) = query_fingerprint(&db, &case.compound).map_err(|e| query_error(&case.compound, e))?;
            Ok((fp, case))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let grid = if a.grid.is_empty() { ts_grid() } else { a.grid.clone() };
    if let Some(bad) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(CliError::user(format!("grid thresholds must be in [0, 1], got {bad}")));
    }
    let sel = datastore::select_threshold(&db.targets, subset, purpose, &grid, &training, run.scale, run.seed)?;
    if a.json {
        return print(out, &to_json(&sel)?);
    }
    print(
        out,
        &format!(
            "model {}/{}: ts={} score={:.6} ({} of {} thresholds fitted)\n",
            sel.subset,
            sel.purpose,
            sel.ts,
            sel.score,
            sel.candidates.len(),
            grid.len()
        ),
    )
}

/// Runs every query against the database; stops at the first bad query.
fn run_queries(q: &QueryArgs) -> Result<Vec<ResultDocument>, CliError> {
    let run = RunConfig { significance: q.significance, max_sim_threshold: q.max_sim_threshold, ..RunConfig::default() };
    run.validate()?;
    let queries = match (&q.smiles, &q.smiles_file) {
        (Some(s), _) => vec![s.clone()],
        (None, Some(path)) => {
            read_smiles_list(open(path)?).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(CliError::user("one of --smiles or --smiles-file is required")),
    };
    let db = Database::open_built(&q.db)?;
    let provider = resolve_affinity(&q.affinity, &db)?.provider()?;
    let mut config = PredictConfig { screening: run.screening(), ..PredictConfig::default() };
    if let Some(top) = q.top {
        config.top = top;
    }
    log::info!("predicting {} queries against {}", queries.len(), q.db.display());
    queries
        .iter()
        .map(|s| datastore::predict(&db, s, &*provider, &config).map_err(|e| query_error(s, e)))
        .collect()
}

fn result_text(doc: &ResultDocument) -> String {
    let mut text = format!("query {} ({} candidates)\n", doc.canonical_query, doc.candidate_count);
    if doc.predictions.is_empty() {
        text.push_str("  no candidates\n");
        return text;
    }
    text.push_str("  rank\ttarget\tprobability\tmax_tc\te_value\tname\n");
    for r in &doc.predictions {
        text.push_str(&format!(
            "  {}\t{}\t{}\t{:.3}\t{:.3e}\t{}\n",
            r.rank,
            r.target_id,
            report::percent(r.probability),
            r.max_sim,
            r.e,
            r.name
        ));
    }
    text
}

fn cmd_predict(a: PredictArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let docs = run_queries(&a.query)?;
    let json = if a.query.smiles.is_some() { to_json(&docs[0])? } else { to_json(&docs)? };
    if let Some(path) = &a.out {
        write_text(path, &json)?;
    }
    if a.json {
        return print(out, &json);
    }
    let text: String = docs.iter().map(result_text).collect();
    print(out, &text)
}

fn cmd_train_rank(a: TrainRankArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&a.test_fraction) {
        return Err(CliError::user(format!("--test-fraction must be in [0, 1), got {}", a.test_fraction)));
    }
    let cases = read_cases(&a.cases)?;
    let db = Database::open_built(&a.db)?;
    let provider = resolve_affinity(&a.affinity, &db)?.provider()?;
    drop(db);
    let summary =
        datastore::train_ranker(&a.db, &cases, &*provider, &ForestParams::default(), a.seed, a.test_fraction)?;
    if a.json {
        return print(out, &to_json(&summary)?);
    }
    let mut text = format!(
        "trained on {} cases ({} rows, {} positive); {} cases held out\n",
        summary.train_cases, summary.rows, summary.positive_rows, summary.test_cases
    );
    if let Some(m) = &summary.test_metrics {
        text.push_str(&m.to_table());
    }
    text.push_str("feature\timportance\n");
    for (name, v) in &summary.importance {
        text.push_str(&format!("{name}\t{v:.4}\n"));
    }
    print(out, &text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Metric {
    Top(usize),
    Auc,
}

fn parse_metric(s: &str) -> Result<Metric, CliError> {
    let s = s.trim();
    if s == "auc" {
        return Ok(Metric::Auc);
    }
    match s.strip_prefix("top").map(str::parse::<usize>) {
        Some(Ok(n)) if n > 0 => Ok(Metric::Top(n)),
        _ => Err(CliError::user(format!("unknown metric {s:?}; expected topN or auc"))),
    }
}

fn expand_masks(specs: &[String]) -> Result<Vec<FeatureMask>, CliError> {
    let singles = || FEATURE_NAMES.iter().enumerate().map(|(i, n)| FeatureMask::new(n, &[i])).collect::<Vec<_>>();
    let mut masks = Vec::new();
    for spec in specs {
        match spec.as_str() {
            "families" => masks.extend(FeatureMask::families()),
            "features" => masks.extend(singles()),
            "all" => {
                masks.extend(FeatureMask::families());
                masks.extend(singles());
            }
            _ => masks.push(FeatureMask::parse(spec).map_err(CliError::user)?),
        }
    }
    Ok(masks)
}

fn ranking_err(e: targetscope::ranking::RankingError) -> CliError {
    DatastoreError::from(e).into()
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let metrics = a.metrics.iter().map(|s| parse_metric(s)).collect::<Result<Vec<_>, _>>()?;
    let masks = expand_masks(&a.ablate)?;
    let cases = read_cases(&a.cases)?;
    let db = Database::open_built(&a.db)?;
    let provider = resolve_affinity(&a.affinity, &db)?.provider()?;
    let forest = db.ranker.as_ref().ok_or_else(|| ranking_err(targetscope::ranking::RankingError::NoModel))?;
    let ranked = datastore::rank_cases(&db, &cases, &*provider, &ScreeningConfig::default())?;

    let none = FeatureMask::new("none", &[]);
    let cutoffs: Vec<usize> = metrics.iter().filter_map(|m| if let Metric::Top(n) = m { Some(*n) } else { None }).collect();
    let k = cutoffs.iter().copied().max().unwrap_or(DEFAULT_K);
    let n = cutoffs.iter().copied().min().unwrap_or(DEFAULT_N);
    let mut reports: BTreeMap<usize, MetricsReport> = BTreeMap::new();
    for &c in cutoffs.iter().chain([k].iter()) {
        if !reports.contains_key(&c) {
            reports.insert(c, evaluate_cases(forest, &ranked, &none, c, c).map_err(ranking_err)?);
        }
    }
    let auc = reports[&k].roc_auc;

    let mut out_metrics = Map::new();
    for m in &metrics {
        match m {
            Metric::Top(c) => {
                let r = &reports[c];
                out_metrics.insert(
                    format!("top{c}"),
                    json!({ "recall": r.top_k_recall, "performance": r.top_n_performance }),
                );
            }
            Metric::Auc => {
                out_metrics.insert("auc".into(), json!(auc));
            }
        }
    }
    let ablation = if masks.is_empty() {
        None
    } else {
        Some(ablate(forest, &ranked, &masks, k, n).map_err(ranking_err)?)
    };

    if a.json {
        let doc = json!({
            "cases": cases.len(),
            "manifest_digest": db.manifest_digest,
            "metrics": Value::Object(out_metrics),
            "ablation": ablation,
        });
        return print(out, &to_json(&doc)?);
    }
    let mut text = format!("cases\t{}\n", cases.len());
    for m in &metrics {
        match m {
            Metric::Top(c) => {
                let r = &reports[c];
                text.push_str(&format!("top-{c} recall\t{:.4}\ntop-{c} performance\t{:.4}\n", r.top_k_recall, r.top_n_performance));
            }
            Metric::Auc => {
                text.push_str(&format!("ROC-AUC\t{}\n", auc.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))));
            }
        }
    }
    if let Some(ab) = &ablation {
        text.push_str(&format!("ablation (recall@{k}, performance@{n})\nmask\tdelta_auc\tdelta_recall\tdelta_performance\n"));
        for row in &ab.rows {
            let d_auc = row.delta_roc_auc.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.4}"));
            text.push_str(&format!(
                "{}\t{}\t{:+.4}\t{:+.4}\n",
                row.mask.name, d_auc, row.delta_top_k_recall, row.delta_top_n_performance
            ));
        }
    }
    print(out, &text)
}

fn cmd_report(a: ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let doc: ResultDocument = match (&a.input, &a.db, &a.smiles) {
        (Some(path), _, _) => serde_json::from_str(&read_text(path)?)
            .map_err(|e| CliError::user(format!("{}: not a single result document: {e}", path.display())))?,
        (None, Some(db), Some(smiles)) => {
            let q = QueryArgs {
                db: db.clone(),
                smiles: Some(smiles.clone()),
                smiles_file: None,
                affinity: AffinityArgs { affinity: a.affinity.affinity.clone(), affinity_default: a.affinity.affinity_default },
                top: a.top,
                significance: SIGNIFICANCE,
                max_sim_threshold: MAX_SIM_THRESHOLD,
            };
            run_queries(&q)?.remove(0)
        }
        _ => return Err(CliError::user("report needs --input or both --db and --smiles")),
    };
    write_text(&a.out, &report::render(&doc))?;
    print(out, &format!("wrote {} ({} targets)\n", a.out.display(), doc.predictions.len()))
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::user(format!("{}: {e}", a.out.display())))?;
    let set = planted(&PlantedConfig { seed: a.seed, ..PlantedConfig::default() });
    let mut background = diversity_set(DEFAULT_BACKGROUND, DEFAULT_BACKGROUND_SEED).join("\n");
    background.push('\n');
    let files = [
        ("interactions.tsv", interactions_tsv(&set, a.seed)),
        ("training.tsv", write_eval_cases(&set.training)),
        ("heldout.tsv", write_eval_cases(&set.heldout)),
        ("background.smi", background),
    ];
    let mut written = Vec::new();
    for (name, text) in &files {
        let path = a.out.join(name);
        write_text(&path, text)?;
        written.push(path.display().to_string());
    }
    if a.json {
        return print(out, &to_json(&json!({ "files": written, "training": set.training.len(), "heldout": set.heldout.len() }))?);
    }
    print(out, &(written.join("\n") + "\n"))
}
