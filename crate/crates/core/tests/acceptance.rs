//! Acceptance suite. Runs every criterion in sequence and prints one line
//! per criterion; the process fails if any criterion fails for a reason
//! other than a documented floating-point limit.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::hint::black_box;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use targetscope::affinity::SyntheticProvider;
use targetscope::chem::{canonical_smiles, parse_smiles, write_smiles, Molecule};
use targetscope::datastore::{predict, rank_cases, Database, PredictConfig, ASSOCIATION, MODELS, RANKER};
use targetscope::eval::roc_auc;
use targetscope::fingerprint::{bulk_max_similarity, tanimoto_unchecked, Fingerprint};
use targetscope::ranking::{
    ablate, train_forest, FeatureMask, FeatureVector, ForestParams, MaxFeatures, RankCase, FEATURE_COUNT,
};
use targetscope::scaffold::{murcko_scaffold, scaffold_dedupe};
use targetscope::screening::{build_association_graph, ScreeningConfig, TargetRecord, EDGE_CUTOFFS};
use targetscope::stats::{
    chi_square_gof, default_bins, fit_curve_xy, fit_gumbel, evd_tail_term, p_value, raw_score, CurveForm, FitCurve, Gumbel, ModelSet,
    Purpose, StatModel, Statistic, Subset, SERIES_BRANCH_Z,
};

enum Verdict {
    Pass(String),
    Fail(String),
    /// The literal criterion cannot hold in IEEE doubles; every part that can
    /// be represented was checked and held.
    Unattainable(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || format!("took {elapsed:.2?}, budget {budget:?}"))
}

// ---------------------------------------------------------------------------
// 1. P-value anchor

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let p0 = p_value(0.0);
    if (p0 - 0.42963).abs() > 1e-4 {
        return Verdict::Fail(format!("P(0) = {p0}"));
    }
    let n = 10_000;
    let zs: Vec<f64> = (0..n).map(|i| -10.0 + 60.0 * i as f64 / (n - 1) as f64).collect();
    let ps: Vec<f64> = zs.iter().map(|&z| p_value(z)).collect();
    if ps.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Verdict::Fail("P left (0, 1)".into());
    }
    if ps.windows(2).any(|w| w[1] > w[0]) {
        return Verdict::Fail("P increases somewhere on the grid".into());
    }
    let ties: Vec<usize> = (1..n).filter(|&i| ps[i] == ps[i - 1]).collect();
    // A tie is excusable only where the exact values of 1 - P at the two
    // grid points differ by less than the spacing of doubles just below 1.
    let tail = |z: f64| (-(-z * std::f64::consts::PI / 6f64.sqrt() - 0.5772156649015329).exp()).exp();
    let unrepresentable = |i: usize| tail(zs[i]) - tail(zs[i - 1]) < f64::EPSILON / 2.0;
    if let Some(&i) = ties.iter().find(|&&i| !unrepresentable(i)) {
        return Verdict::Fail(format!("P ties at representable z = {}", zs[i]));
    }
    let y = evd_tail_term(SERIES_BRANCH_Z);
    let closed = -(-y).exp_m1();
    let series = y - y * y / 2.0 + y * y * y / 6.0;
    let rel = ((closed - series) / closed).abs();
    if p_value(SERIES_BRANCH_Z) != closed || p_value(SERIES_BRANCH_Z.next_up()) > series {
        return Verdict::Fail("branches are not the closed form below 28 and the series above".into());
    }
    if rel >= 1e-15 {
        return Verdict::Fail(format!("branch discontinuity {rel:e}"));
    }
    if let Err(e) = within_budget(start.elapsed(), Duration::from_secs(1)) {
        return Verdict::Fail(e);
    }
    let detail = format!("P(0) = {p0:.6}; branch gap {rel:.1e}; non-increasing, strict on {} of {} steps", n - 1 - ties.len(), n - 1);
    if ties.is_empty() {
        Verdict::Pass(detail)
    } else {
        let last = zs[*ties.last().expect("nonempty")];
        Verdict::Unattainable(format!(
            "{detail}; {} ties for z <= {last:.2} where 1 - P < 2^-53 and P saturates at the largest double below 1",
            ties.len()
        ))
    }
}

// ---------------------------------------------------------------------------
// 2. Reference parameter anchors

fn criterion_2() -> Check {
    let start = Instant::now();
    // Oracles evaluated independently from the published curve parameters.
    let cases: [(Subset, Purpose, f64, f64, f64, f64); 6] = [
        (Subset::Two, Purpose::Cumulative, 200.0, 10_000.0, 3.598096346510124, 0.005),
        (Subset::One, Purpose::Cumulative, 12.0, 400.0, 11.769167681768963, 1e-9),
        (Subset::One, Purpose::Clustering, 40.0, 2500.0, 1.5578272024596296, 1e-9),
        (Subset::Three, Purpose::Cumulative, 3.0, 25.0, 0.9207482410247545, 1e-9),
        (Subset::Three, Purpose::Clustering, 2.0, 100.0, 15.429009830741855, 1e-9),
        (Subset::Two, Purpose::Clustering, 500.0, 40_000.0, 2.1440021301999406, 1e-9),
    ];
    for (subset, purpose, raw, s, want, tol) in cases {
        let model = StatModel::reference(subset, purpose, 1);
        let z = model.z_score(raw, s).map_err(|e| e.to_string())?;
        ensure((z - want).abs() <= tol, || format!("{subset}/{purpose} z({raw}, {s}) = {z}, want {want}"))?;
    }
    within_budget(start.elapsed(), Duration::from_secs(1))?;
    let z = StatModel::reference(Subset::Two, Purpose::Cumulative, 1).z_score(200.0, 10_000.0).unwrap();
    Ok(format!("z(200, 10000) = {z:.4} on subset 2; five more rows match"))
}

// ---------------------------------------------------------------------------
// 3. Fit recovery

fn s_range(subset: Subset) -> (f64, f64) {
    match subset {
        Subset::One => (100.0, 90_000.0),
        Subset::Two => (10_000.0, 4_000_000.0),
        Subset::Three => (1.0, 2500.0),
    }
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut fitted = 0;
    for subset in Subset::ALL {
        for purpose in [Purpose::Cumulative, Purpose::Clustering] {
            let model = StatModel::reference(subset, purpose, 1);
            let (lo, hi) = s_range(subset);
            let xs: Vec<f64> = (0..60).map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / 59.0).exp().round()).collect();
            for (truth, statistic) in [(model.mean_curve, Statistic::Mean), (model.std_curve, Statistic::Std)] {
                let ys: Vec<f64> = xs.iter().map(|&x| truth.eval(x)).collect();
                let got = fit_curve_xy(&xs, &ys, truth.form, statistic).map_err(|e| e.to_string())?.curve;
                let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
                let (dc, dr, doff) = (rel(got.coef, truth.coef), rel(got.r, truth.r), (got.c - truth.c).abs());
                ensure(dc <= 0.01 && dr <= 0.01 && doff <= 0.05, || {
                    format!("{subset}/{purpose} {statistic:?}: fitted {got:?} vs {truth:?}")
                })?;
                worst = worst.max(dc).max(dr);
                fitted += 1;
            }
        }
    }
    within_budget(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{fitted} curves recovered; worst relative error {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// 4. Oracle equivalence

fn random_fp(rng: &mut ChaCha8Rng, width: usize, density: f64) -> Fingerprint {
    Fingerprint::from_bits(width, (0..width).filter(|_| rng.random_bool(density)))
}

fn tanimoto_oracle(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let sa: HashSet<usize> = a.ones().collect();
    let sb: HashSet<usize> = b.ones().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        0.0
    } else {
        sa.intersection(&sb).count() as f64 / union as f64
    }
}

fn auc_pair_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let density = rng.random_range(0.01..0.2);
        let a: Vec<Fingerprint> = (0..rng.random_range(1..25)).map(|_| random_fp(&mut rng, 2048, density)).collect();
        let b: Vec<Fingerprint> = (0..rng.random_range(1..25)).map(|_| random_fp(&mut rng, 2048, density)).collect();
        let ts = rng.random_range(0.0..0.3);
        let mut oracle = 0.0;
        for x in &a {
            for y in &b {
                let t = tanimoto_oracle(x, y);
                if t >= ts {
                    oracle += t;
                }
            }
        }
        let got = raw_score(&a, &b, ts).map_err(|e| e.to_string())?;
        worst = worst.max((got - oracle).abs());
    }
    ensure(worst <= 1e-12, || format!("raw_score deviates by {worst:e}"))?;

    let db: Vec<Fingerprint> = (0..1000).map(|_| random_fp(&mut rng, 2048, 0.05)).collect();
    for _ in 0..20 {
        let q = random_fp(&mut rng, 2048, 0.05);
        let mut best = (-1.0, 0);
        for (i, fp) in db.iter().enumerate() {
            let t = tanimoto_oracle(&q, fp);
            if t > best.0 {
                best = (t, i);
            }
        }
        let got = bulk_max_similarity(&q, &db).map_err(|e| e.to_string())?;
        ensure(got == best, || format!("bulk max {got:?} vs scalar {best:?}"))?;
    }

    let mut auc_worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..300);
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..20) as f64) / 4.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let got = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        auc_worst = auc_worst.max((got - auc_pair_oracle(&scores, &labels)).abs());
    }
    ensure(auc_worst <= 1e-12, || format!("roc_auc deviates by {auc_worst:e}"))?;
    within_budget(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("raw_score max error {worst:.1e}; bulk max exact on 20 x 1000; auc max error {auc_worst:.1e}"))
}

// ---------------------------------------------------------------------------
// 5. Gumbel fit and goodness of fit

fn gumbel_samples(rng: &mut ChaCha8Rng, n: usize, loc: f64, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            loc - scale * (-u.ln()).ln()
        })
        .collect()
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let xs = gumbel_samples(&mut ChaCha8Rng::seed_from_u64(5), 10_000, 0.0, 1.0);
    let g = fit_gumbel(&xs).map_err(|e| e.to_string())?;
    ensure(g.loc.abs() <= 0.05 && (g.scale - 1.0).abs() <= 0.05, || format!("fit {g:?}"))?;
    let mut accepted = 0;
    for seed in 0..50 {
        let xs = gumbel_samples(&mut ChaCha8Rng::seed_from_u64(1000 + seed), 1000, 0.0, 1.0);
        let fit: Gumbel = fit_gumbel(&xs).map_err(|e| e.to_string())?;
        let gof = chi_square_gof(&xs, &fit, default_bins(xs.len())).map_err(|e| e.to_string())?;
        accepted += usize::from(gof.p > 0.05);
    }
    ensure(accepted >= 45, || format!("GOF accepted {accepted}/50"))?;
    within_budget(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("loc {:.4}, scale {:.4}; GOF accepts {accepted}/50", g.loc, g.scale))
}

// ---------------------------------------------------------------------------
// 6. Association graph law

fn synthetic_target(id: &str, fps: Vec<Fingerprint>) -> TargetRecord {
    let n = fps.len();
    TargetRecord::new(
        id,
        id,
        "synthetic",
        (0..n).map(|i| format!("{id}-{i}")).collect(),
        (0..n).map(|i| format!("{id}-{i}")).collect(),
        fps,
        (0..n).map(|i| targetscope::scaffold::ScaffoldKey { canonical_string: format!("{id}-{i}"), ring_count: 1 }).collect(),
    )
    .expect("valid target")
}

/// Six families of five targets; members share a family core kept with a
/// per-target probability, so within-family similarity varies. Targets
/// `F0T3` and `F0T4` are twins with identical actives.
fn association_fixture() -> Vec<TargetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut targets = Vec::new();
    for f in 0..6 {
        let core: Vec<usize> = (0..48).map(|k| f * 300 + k * 6).collect();
        let mut twin: Option<Vec<Fingerprint>> = None;
        for t in 0..5 {
            let keep = 0.75 + 0.05 * t as f64;
            let fps: Vec<Fingerprint> = if f == 0 && t == 4 {
                twin.clone().expect("first twin built")
            } else {
                (0..10)
                    .map(|_| {
                        let mut bits: Vec<usize> = core.iter().copied().filter(|_| rng.random_bool(keep)).collect();
                        bits.extend((0..6).map(|_| rng.random_range(1800..2048)));
                        Fingerprint::from_bits(2048, bits)
                    })
                    .collect()
            };
            if f == 0 && t == 3 {
                twin = Some(fps.clone());
            }
            targets.push(synthetic_target(&format!("F{f}T{t}"), fps));
        }
    }
    targets
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let targets = association_fixture();
    let n = targets.len() as u64;
    let mut models = ModelSet::new();
    models.insert(StatModel {
        subset: Subset::One,
        purpose: Purpose::Clustering,
        ts: 0.3,
        mean_curve: FitCurve { form: CurveForm::Linear, coef: 0.01, r: 1.0, c: 0.0 },
        std_curve: FitCurve { form: CurveForm::Power, coef: 0.03, r: 0.5, c: 0.0 },
        n_db: n * (n - 1),
        provenance: None,
    });
    let graph = build_association_graph(&targets, &models).map_err(|e| e.to_string())?;
    let mut degrees = [0usize; 4];
    for (source, edges) in graph.edges() {
        ensure(edges.len() <= 3, || format!("{source} has {} edges", edges.len()))?;
        degrees[edges.len()] += 1;
        for (k, e) in edges.iter().enumerate() {
            ensure(e.e_value < EDGE_CUTOFFS[k], || format!("{source}->{} edge {k} has E {:e}", e.partner, e.e_value))?;
        }
        ensure(edges.windows(2).all(|w| w[0].e_value <= w[1].e_value), || format!("{source} edges unsorted"))?;
    }
    ensure(degrees[3] > 0 && graph.edge_count() > 0, || format!("no full-degree node; histogram {degrees:?}"))?;
    for (a, b) in [("F0T3", "F0T4"), ("F0T4", "F0T3")] {
        let first = graph.neighbors(a).first().map(|e| e.partner.as_str());
        ensure(first == Some(b), || format!("{a}'s minimal-E partner is {first:?}"))?;
    }
    within_budget(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("{} edges; out-degree histogram {degrees:?}; twins mutually minimal", graph.edge_count()))
}

// ---------------------------------------------------------------------------
// 7. End-to-end planted truth

fn heldout_ranks(db: &Database, set: &targetscope::synth::PlantedSet) -> Result<Vec<Option<usize>>, String> {
    let provider = SyntheticProvider { seed: common::AFFINITY_SEED };
    set.heldout
        .iter()
        .map(|case| {
            let doc = predict(db, &case.compound, &provider, &PredictConfig::default()).map_err(|e| e.to_string())?;
            Ok(doc.predictions.iter().find(|p| case.true_targets.contains(&p.target_id)).map(|p| p.rank))
        })
        .collect()
}

fn criterion_7(dir: &std::path::Path) -> Check {
    let start = Instant::now();
    let set = common::planted_database(dir);
    let db = Database::open_built(dir).map_err(|e| e.to_string())?;
    ensure(db.targets.len() == 10 && db.targets.iter().map(|t| t.active_fps.len()).sum::<usize>() == 500, || {
        "planted database is not 10 targets x 500 compounds".into()
    })?;
    let ranks = heldout_ranks(&db, &set)?;
    let top15 = ranks.iter().filter(|r| r.is_some_and(|r| r <= 15)).count();
    let top100 = ranks.iter().filter(|r| r.is_some_and(|r| r <= 100)).count();
    ensure(top15 >= 19, || format!("true target in top 15 for {top15}/20"))?;
    ensure(top100 == ranks.len(), || format!("top-100 recall {top100}/{}", ranks.len()))?;

    let again = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::planted_database(again.path());
    for name in [MODELS, ASSOCIATION, RANKER] {
        let a = std::fs::read(dir.join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(again.path().join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name} differs between identical runs"))?;
    }
    let db2 = Database::open_built(again.path()).map_err(|e| e.to_string())?;
    ensure(heldout_ranks(&db2, &set)? == ranks, || "held-out ranks differ between runs".into())?;
    within_budget(start.elapsed(), Duration::from_secs(300))?;
    let first = ranks.iter().filter(|r| **r == Some(1)).count();
    Ok(format!("top-15 {top15}/20, top-100 recall {top100}/20 (rank 1 for {first}); rebuild byte-identical"))
}

// ---------------------------------------------------------------------------
// 8. Forest contract

fn blobs(rng: &mut ChaCha8Rng, n: usize) -> (Vec<[f64; FEATURE_COUNT]>, Vec<bool>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let positive = i % 2 == 0;
        let centre = if positive { 3.0 } else { -3.0 };
        let mut row = [0.0; FEATURE_COUNT];
        for v in row.iter_mut() {
            *v = centre + rng.random_range(-1.0..1.0);
        }
        rows.push(row);
        labels.push(positive);
    }
    (rows, labels)
}

/// Cases where only the first feature separates true from false targets.
fn single_signal_cases(n: usize, seed: u64) -> Vec<RankCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|c| {
            let mut truth = BTreeSet::new();
            let candidates = (0..6)
                .map(|t| {
                    let id = format!("T{t}");
                    let positive = t < 2;
                    if positive {
                        truth.insert(id.clone());
                    }
                    let mut a = [0.0; FEATURE_COUNT];
                    a[0] = if positive { rng.random_range(0.6..1.0) } else { rng.random_range(0.0..0.4) };
                    for v in a.iter_mut().skip(1) {
                        *v = rng.random_range(0.0..5.0);
                    }
                    (id, FeatureVector::from_array(a))
                })
                .collect();
            RankCase { compound: format!("Q{c}"), true_targets: truth, candidates }
        })
        .collect()
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let text = r#"{"n_estimators":610,"max_depth":26,"min_samples_split":7,"min_samples_leaf":2,"bootstrap":false,"max_features":"sqrt"}"#;
    let loaded: ForestParams = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let defaults = ForestParams::default();
    ensure(loaded == defaults && defaults.max_features == MaxFeatures::Sqrt, || format!("defaults {defaults:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (rows, labels) = blobs(&mut rng, 200);
    let forest = train_forest(&rows, &labels, &defaults, 1).map_err(|e| e.to_string())?;
    let correct = rows.iter().zip(&labels).filter(|(r, &l)| (forest.predict_proba(r) > 0.5) == l).count();
    ensure(correct == rows.len(), || format!("training accuracy {correct}/{}", rows.len()))?;
    let twin = train_forest(&rows, &labels, &defaults, 1).map_err(|e| e.to_string())?;
    ensure(forest.to_json() == twin.to_json(), || "same seed gave different forests".into())?;
    ensure(rows.iter().all(|r| forest.predict_proba(r).to_bits() == twin.predict_proba(r).to_bits()), || {
        "same seed gave different predictions".into()
    })?;
    let total: f64 = forest.feature_importance().iter().sum();
    ensure((total - 1.0).abs() <= 1e-9, || format!("importances sum to {total}"))?;

    let train = single_signal_cases(60, 1);
    let held = single_signal_cases(40, 2);
    let rows: Vec<_> = train.iter().flat_map(RankCase::labelled_rows).collect();
    let (x, y): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let ranker = train_forest(&x, &y, &defaults, 3).map_err(|e| e.to_string())?;
    let report = ablate(&ranker, &held, &[FeatureMask::new("max_similarity", &[0])], 100, 15).map_err(|e| e.to_string())?;
    let base = report.baseline.roc_auc.unwrap_or(f64::NAN);
    let masked = report.rows[0].metrics.roc_auc.unwrap_or(f64::NAN);
    ensure((masked - 0.5).abs() <= 0.1, || format!("masked AUC {masked} (baseline {base})"))?;
    let imp = ranker.feature_importance();
    ensure((1..FEATURE_COUNT).all(|i| imp[i] < imp[0]), || format!("importances {imp:?}"))?;
    Ok(format!("blob accuracy 1.0; importance sum {total:.12}; AUC {base:.3} -> {masked:.3} with signal masked ({:.1?})", start.elapsed()))
}

// ---------------------------------------------------------------------------
// 9. Chemistry invariants

fn mol(s: &str) -> Result<Molecule, String> {
    parse_smiles(s).map_err(|e| format!("{s}: {e}"))
}

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for s in common::ROUND_TRIP {
        let m = mol(s)?;
        let canon = canonical_smiles(&m);
        ensure(canonical_smiles(&mol(&write_smiles(&m))?) == canon, || format!("{s} does not round-trip"))?;
        let mut order: Vec<usize> = (0..m.atom_count()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        ensure(canonical_smiles(&m.permuted(&order)) == canon, || format!("{s} canonical form depends on atom order"))?;
    }
    for s in common::MURCKO {
        let m = mol(s)?;
        let frame = murcko_scaffold(&m);
        ensure(frame.ring_count() == m.ring_count(), || format!("{s} lost rings"))?;
        ensure(canonical_smiles(&murcko_scaffold(&frame)) == canonical_smiles(&frame), || format!("{s} not idempotent"))?;
    }
    let trio: Vec<Molecule> = ["Cc1ccccc1", "CCc1ccccc1", "C1CCCCC1"].into_iter().map(mol).collect::<Result<_, _>>()?;
    let reps = scaffold_dedupe(&trio);
    ensure(reps.len() == 2, || format!("dedupe kept {reps:?}"))?;
    Ok(format!("{} round trips, {} frames, dedupe kept {reps:?}", common::ROUND_TRIP.len(), common::MURCKO.len()))
}

// ---------------------------------------------------------------------------
// 10. Performance

fn criterion_10(dir: &std::path::Path) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let queries: Vec<Fingerprint> = (0..200).map(|_| random_fp(&mut rng, 2048, 0.03)).collect();
    let db: Vec<Fingerprint> = (0..10_000).map(|_| random_fp(&mut rng, 2048, 0.03)).collect();
    let start = Instant::now();
    let mut acc = 0.0;
    for q in &queries {
        for fp in &db {
            acc += tanimoto_unchecked(black_box(q), black_box(fp));
        }
    }
    black_box(acc);
    let rate = (queries.len() * db.len()) as f64 / start.elapsed().as_secs_f64();
    ensure(rate >= 1e6, || format!("{rate:.3e} comparisons/s"))?;

    let db = Database::open_built(dir).map_err(|e| e.to_string())?;
    let set = targetscope::synth::planted(&targetscope::synth::PlantedConfig::default());
    let provider = SyntheticProvider { seed: common::AFFINITY_SEED };
    let mut slowest = Duration::ZERO;
    for case in &set.heldout {
        let t = Instant::now();
        predict(&db, &case.compound, &provider, &PredictConfig::default()).map_err(|e| e.to_string())?;
        slowest = slowest.max(t.elapsed());
    }
    ensure(slowest < Duration::from_secs(2), || format!("slowest predict {slowest:?}"))?;
    // Screening alone, for the record.
    rank_cases(&db, &set.heldout, &provider, &ScreeningConfig::default()).map_err(|e| e.to_string())?;
    Ok(format!("{:.1}M Tanimoto/s on one thread; slowest predict {slowest:.2?}", rate / 1e6))
}

// ---------------------------------------------------------------------------

fn run(verdict: impl FnOnce() -> Verdict) -> Verdict {
    match catch_unwind(AssertUnwindSafe(verdict)) {
        Ok(v) => v,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Verdict::Fail(format!("panicked: {msg}"))
        }
    }
}

fn check(f: impl FnOnce() -> Check) -> impl FnOnce() -> Verdict {
    move || match f() {
        Ok(d) => Verdict::Pass(d),
        Err(e) => Verdict::Fail(e),
    }
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().to_path_buf();
    let criteria: Vec<(u8, &str, Box<dyn FnOnce() -> Verdict>)> = vec![
        (1, "P-value anchor", Box::new(criterion_1)),
        (2, "reference parameter z-scores", Box::new(check(criterion_2))),
        (3, "noiseless fit recovery", Box::new(check(criterion_3))),
        (4, "oracle equivalence", Box::new(check(criterion_4))),
        (5, "Gumbel fit and GOF", Box::new(check(criterion_5))),
        (6, "association graph law", Box::new(check(criterion_6))),
        (7, "end-to-end planted truth", Box::new(check({
            let p = path.clone();
            move || criterion_7(&p)
        }))),
        (8, "forest contract", Box::new(check(criterion_8))),
        (9, "chemistry invariants", Box::new(check(criterion_9))),
        (10, "performance", Box::new(check(move || criterion_10(&path)))),
    ];
    let (mut passed, mut failed, mut limited) = (0, 0, 0);
    for (id, name, f) in criteria {
        let start = Instant::now();
        let verdict = run(f);
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Verdict::Pass(d) => {
                passed += 1;
                println!("criterion {id:>2} PASS  {name} [{secs:.2}s]: {d}");
            }
            Verdict::Fail(d) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} [{secs:.2}s]: {d}");
            }
            Verdict::Unattainable(d) => {
                limited += 1;
                println!("criterion {id:>2} FAIL  {name} [{secs:.2}s]: not attainable in f64: {d}");
            }
        }
    }
    println!("acceptance: {passed} passed, {} failed ({limited} at a floating-point limit)", failed + limited);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
