use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::evd::Gumbel;
use super::StatError;

const MIN_EXPECTED: f64 = 5.0;
const FITTED_PARAMETERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub p: f64,
    pub dof: usize,
    /// Bins left after merging sparse ones.
    pub bins: usize,
}

/// Bin count `round(2 · n^(2/5))`, at least 4.
pub fn default_bins(n: usize) -> usize {
    ((2.0 * (n as f64).powf(0.4)).round() as usize).max(4)
}

/// Pearson chi-square test of `samples` against a fitted Gumbel.
///
/// `bins` equal-width bins span the sample range, with the outer two open to
/// infinity. Adjacent bins merge left to right until each expects at least 5
/// samples. Degrees of freedom are `bins - 1 - 2` for the two fitted parameters.
pub fn chi_square_gof(samples: &[f64], dist: &Gumbel, bins: usize) -> Result<GofResult, StatError> {
    if bins < 3 {
        return Err(StatError::InvalidProtocol(format!("need at least 3 bins, got {bins}")));
    }
    let need = (MIN_EXPECTED as usize) * (FITTED_PARAMETERS + 2);
    if samples.len() < need {
        return Err(StatError::TooFewSamples { need, have: samples.len() });
    }
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(hi > lo) {
        return Err(StatError::ZeroVariance);
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (1..bins).map(|k| lo + width * k as f64).collect();

    let mut observed = vec![0.0f64; bins];
    for &x in samples {
        observed[edges.partition_point(|&e| e < x)] += 1.0;
    }
    let n = samples.len() as f64;
    let mut cdf_prev = 0.0;
    let expected: Vec<f64> = (0..bins)
        .map(|k| {
            let cdf = if k + 1 < bins { dist.cdf(edges[k]) } else { 1.0 };
            let e = n * (cdf - cdf_prev);
            cdf_prev = cdf;
            e
        })
        .collect();

    let mut merged: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, e) in observed.into_iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= MIN_EXPECTED {
            merged.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => merged.push((o_acc, e_acc)),
        }
    }
    if merged.len() < FITTED_PARAMETERS + 2 {
        return Err(StatError::TooFewBins);
    }
    let statistic: f64 = merged.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = merged.len() - 1 - FITTED_PARAMETERS;
    let p = ChiSquared::new(dof as f64).expect("positive degrees of freedom").sf(statistic);
    Ok(GofResult { statistic, p, dof, bins: merged.len() })
}
