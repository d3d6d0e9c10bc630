use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::model::StatModel;
use super::StatError;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Above this Z the tail probability is taken from its cubic series.
pub const SERIES_BRANCH_Z: f64 = 28.0;

const SQRT_6: f64 = 2.449_489_742_783_178;
const LARGEST_BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;
const SMALLEST_POSITIVE: f64 = 4.940_656_458_412_465e-324;

/// `(raw - mean(s)) / std(s)` under the model's background curves.
pub fn z_score(raw: f64, s: f64, model: &StatModel) -> Result<f64, StatError> {
    let std = model.std_curve.eval(s);
    if !(std > 0.0) || !std.is_finite() {
        return Err(StatError::NonPositiveStd { s, std });
    }
    Ok((raw - model.mean_curve.eval(s)) / std)
}

/// `y = exp(-z·π/√6 - γ)`. Strictly decreasing in `z`; `1 - P(z) = exp(-y)`.
#[inline]
pub fn evd_tail_term(z: f64) -> f64 {
    (-z * PI / SQRT_6 - EULER_GAMMA).exp()
}

/// Extreme-value tail probability `1 - exp(-y)`.
///
/// Evaluated as `-expm1(-y)` up to [`SERIES_BRANCH_Z`] and as
/// `y - y²/2 + y³/6` beyond it. The result is rounded toward the open
/// interval: values that would round to 1 or 0 return the nearest double
/// inside (0, 1), so `P` is non-increasing but saturates below z ≈ -3.27.
pub fn p_value(z: f64) -> f64 {
    let y = evd_tail_term(z);
    let p = if z > SERIES_BRANCH_Z { y - y * y / 2.0 + y * y * y / 6.0 } else { -(-y).exp_m1() };
    p.clamp(SMALLEST_POSITIVE, LARGEST_BELOW_ONE)
}

/// Expected count of chance hits among `n_db` comparisons.
pub fn e_value(p: f64, n_db: u64) -> f64 {
    p * n_db as f64
}

/// Right-skewed Gumbel distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gumbel {
    pub loc: f64,
    pub scale: f64,
}

impl Gumbel {
    pub fn cdf(&self, x: f64) -> f64 {
        gumbel_cdf(x, self.loc, self.scale)
    }
}

pub fn gumbel_cdf(x: f64, loc: f64, scale: f64) -> f64 {
    (-(-(x - loc) / scale).exp()).exp()
}

const GUMBEL_MIN_SAMPLES: usize = 30;
const GUMBEL_MAX_BISECTIONS: usize = 200;

/// Maximum-likelihood Gumbel fit. The scale solves the profile equation
/// `β = mean(x) - Σ x·w / Σ w` with `w = exp(-x/β)`; the location follows in
/// closed form. Samples are shifted by their minimum first, so the fit is
/// translation-equivariant and the weights never overflow.
pub fn fit_gumbel(samples: &[f64]) -> Result<Gumbel, StatError> {
    if samples.len() < GUMBEL_MIN_SAMPLES {
        return Err(StatError::TooFewSamples { need: GUMBEL_MIN_SAMPLES, have: samples.len() });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(StatError::FitDegenerate("non-finite sample".into()));
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let d: Vec<f64> = samples.iter().map(|x| x - min).collect();
    let n = d.len() as f64;
    let mean_d = d.iter().sum::<f64>() / n;
    if mean_d <= 0.0 {
        return Err(StatError::ZeroVariance);
    }

    let weighted = |beta: f64| {
        let (mut sw, mut swd) = (0.0, 0.0);
        for &di in &d {
            let w = (-di / beta).exp();
            sw += w;
            swd += w * di;
        }
        (sw, swd)
    };
    let profile = |beta: f64| {
        let (sw, swd) = weighted(beta);
        beta - mean_d + swd / sw
    };

    // profile(β) → -mean_d as β → 0 and exceeds β - mean_d for any β.
    let (mut lo, mut hi) = (mean_d * 1e-9, 2.0 * mean_d);
    for _ in 0..GUMBEL_MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if profile(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    let scale = 0.5 * (lo + hi);
    let (sw, _) = weighted(scale);
    let loc = min - scale * (sw / n).ln();
    Ok(Gumbel { loc, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{CurveForm, FitCurve, Purpose, Subset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gumbel as GumbelDist};

    #[test]
    fn p_at_zero() {
        // 1 - exp(-exp(-γ))
        let oracle = 1.0 - (-(-0.577215665f64).exp()).exp();
        assert!((p_value(0.0) - oracle).abs() < 1e-9);
        assert!((p_value(0.0) - 0.42963).abs() < 1e-4);
    }

    #[test]
    fn branch_continuity() {
        let z = SERIES_BRANCH_Z;
        let y = evd_tail_term(z);
        let below = -(-y).exp_m1();
        let above = y - y * y / 2.0 + y * y * y / 6.0;
        assert!(((below - above) / below).abs() < 1e-15);
        let left = p_value(z);
        let right = p_value(z + 1e-12);
        assert!(((left - right) / left).abs() < 1e-11);
    }

    #[test]
    fn limits_stay_inside_unit_interval() {
        assert!(p_value(1e3) > 0.0);
        assert!(p_value(-1e3) < 1.0);
        assert!(p_value(60.0) < 1e-30);
        assert!(p_value(-10.0) > 0.999);
    }

    #[test]
    fn e_value_examples() {
        assert!((e_value(0.01, 1000) - 10.0).abs() < 1e-12);
        assert_eq!(e_value(0.3, 1), 0.3);
        assert_eq!(e_value(0.0, 50), 0.0);
    }

    #[test]
    fn z_score_examples() {
        let m = StatModel::reference(Subset::Two, Purpose::Cumulative, 1);
        // mean 150; std 4.12e-2 * 10^(4 * 0.632)
        let std = 4.12e-2 * 10f64.powf(2.528);
        let z = z_score(200.0, 10_000.0, &m).unwrap();
        assert!((z - 50.0 / std).abs() < 1e-12);
        assert!((z - 3.598).abs() < 0.005);
        assert_eq!(z_score(150.0, 10_000.0, &m).unwrap(), 0.0);
        assert!((z_score(150.0 + std, 10_000.0, &m).unwrap() - 1.0).abs() < 1e-12);

        let mut bad = m.clone();
        bad.std_curve = FitCurve { form: CurveForm::Power, coef: 0.0, r: 0.5, c: 0.0 };
        assert!(matches!(z_score(1.0, 4.0, &bad), Err(StatError::NonPositiveStd { .. })));
    }

    #[test]
    fn gumbel_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dist = GumbelDist::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
        let g = fit_gumbel(&xs).unwrap();
        assert!(g.loc.abs() < 0.05, "{g:?}");
        assert!((g.scale - 1.0).abs() < 0.05, "{g:?}");

        let shifted: Vec<f64> = xs.iter().map(|x| x + 5.0).collect();
        let h = fit_gumbel(&shifted).unwrap();
        assert!((h.loc - g.loc - 5.0).abs() < 1e-9);
        assert!((h.scale - g.scale).abs() < 1e-9);
    }

    #[test]
    fn gumbel_profile_equation_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dist = GumbelDist::new(2.0, 0.5).unwrap();
        let xs: Vec<f64> = (0..500).map(|_| dist.sample(&mut rng)).collect();
        let g = fit_gumbel(&xs).unwrap();
        // Direct (unshifted) score equations at the optimum.
        let n = xs.len() as f64;
        let w: Vec<f64> = xs.iter().map(|x| (-x / g.scale).exp()).collect();
        let sw: f64 = w.iter().sum();
        let swx: f64 = w.iter().zip(&xs).map(|(w, x)| w * x).sum();
        let mean = xs.iter().sum::<f64>() / n;
        assert!((g.scale - (mean - swx / sw)).abs() < 1e-9);
        assert!((g.loc - (-g.scale * (sw / n).ln())).abs() < 1e-9);
    }

    #[test]
    fn gumbel_errors() {
        assert!(matches!(fit_gumbel(&[1.0; 40]), Err(StatError::ZeroVariance)));
        assert!(matches!(fit_gumbel(&[1.0, 2.0]), Err(StatError::TooFewSamples { .. })));
    }
}
