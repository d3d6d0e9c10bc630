//! Ranking metrics: top-k recall, top-n performance and rank-sum ROC-AUC.

use std::collections::BTreeSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no evaluation cases")]
    EmptyCases,
    #[error("{0} prediction lists for {1} cases")]
    LengthMismatch(usize, usize),
    #[error("cutoff must be at least 1")]
    ZeroCutoff,
    #[error("both classes must be present")]
    SingleClass,
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
    #[error("evaluation set line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Default cutoff for [`top_k_recall`].
pub const DEFAULT_K: usize = 100;
/// Default cutoff for [`top_n_performance`].
pub const DEFAULT_N: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub compound: String,
    pub true_targets: BTreeSet<String>,
}

impl EvalCase {
    /// Benchmark cases normally carry at least two validated targets.
    pub fn below_benchmark_bar(&self) -> bool {
        self.true_targets.len() < 2
    }
}

fn check(predictions: &[Vec<String>], cases: &[EvalCase], cutoff: usize) -> Result<(), EvalError> {
    if cases.is_empty() {
        return Err(EvalError::EmptyCases);
    }
    if predictions.len() != cases.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), cases.len()));
    }
    if cutoff == 0 {
        return Err(EvalError::ZeroCutoff);
    }
    Ok(())
}

fn hits_in_top(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> usize {
    let top: BTreeSet<&String> = ranked.iter().take(k).collect();
    truth.iter().filter(|t| top.contains(t)).count()
}

/// Fraction of all true (compound, target) pairs found in that compound's top `k`.
pub fn top_k_recall(predictions: &[Vec<String>], cases: &[EvalCase], k: usize) -> Result<f64, EvalError> {
    check(predictions, cases, k)?;
    let total: usize = cases.iter().map(|c| c.true_targets.len()).sum();
    if total == 0 {
        return Err(EvalError::EmptyCases);
    }
    let found: usize = predictions.iter().zip(cases).map(|(p, c)| hits_in_top(p, &c.true_targets, k)).sum();
    Ok(found as f64 / total as f64)
}

/// Fraction of cases with at least one true target in the top `n`.
pub fn top_n_performance(predictions: &[Vec<String>], cases: &[EvalCase], n: usize) -> Result<f64, EvalError> {
    check(predictions, cases, n)?;
    let ok = predictions.iter().zip(cases).filter(|(p, c)| hits_in_top(p, &c.true_targets, n) > 0).count();
    Ok(ok as f64 / cases.len() as f64)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, from the rank sum of the positives with tied ranks averaged.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share their average.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cases: usize,
    pub k: usize,
    pub top_k_recall: f64,
    pub n: usize,
    pub top_n_performance: f64,
    /// Absent when the scored candidates contain a single class.
    pub roc_auc: Option<f64>,
}

impl MetricsReport {
    /// `scored` holds one (probability, is_true_target) entry per candidate across all cases.
    pub fn compute(
        predictions: &[Vec<String>],
        cases: &[EvalCase],
        scored: &[(f64, bool)],
        k: usize,
        n: usize,
    ) -> Result<MetricsReport, EvalError> {
        let (scores, labels): (Vec<f64>, Vec<bool>) = scored.iter().copied().unzip();
        let roc_auc = match roc_auc(&scores, &labels) {
            Ok(v) => Some(v),
            Err(EvalError::SingleClass) => None,
            Err(e) => return Err(e),
        };
        Ok(MetricsReport {
            cases: cases.len(),
            k,
            top_k_recall: top_k_recall(predictions, cases, k)?,
            n,
            top_n_performance: top_n_performance(predictions, cases, n)?,
            roc_auc,
        })
    }

    pub fn to_table(&self) -> String {
        let auc = self.roc_auc.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        format!(
            "metric\tvalue\ncases\t{}\ntop-{} recall\t{:.4}\ntop-{} performance\t{:.4}\nROC-AUC\t{}\n",
            self.cases, self.k, self.top_k_recall, self.n, self.top_n_performance, auc
        )
    }
}

/// Evaluation-set TSV: header `compound<TAB>true_targets`, targets separated by `;`.
pub fn read_eval_cases<R: BufRead>(input: R) -> Result<Vec<EvalCase>, EvalError> {
    let mut cases = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let err = |message: String| EvalError::Format { line: n + 1, message };
        if n == 0 {
            if line.trim() != "compound\ttrue_targets" {
                return Err(err("expected header compound\\ttrue_targets".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (compound, targets) = line.split_once('\t').ok_or_else(|| err("expected 2 columns".into()))?;
        let true_targets: BTreeSet<String> =
            targets.split(';').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect();
        if true_targets.is_empty() {
            return Err(err("no true targets".into()));
        }
        cases.push(EvalCase { compound: compound.trim().to_string(), true_targets });
    }
    if cases.is_empty() {
        return Err(EvalError::EmptyCases);
    }
    Ok(cases)
}

pub fn write_eval_cases(cases: &[EvalCase]) -> String {
    let mut out = String::from("compound\ttrue_targets\n");
    for c in cases {
        out.push_str(&c.compound);
        out.push('\t');
        out.push_str(&c.true_targets.iter().cloned().collect::<Vec<_>>().join(";"));
        out.push('\n');
    }
    out
}
