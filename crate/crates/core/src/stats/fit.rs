//! Least-squares fits of background mean and standard-deviation curves.
//!
//! Inputs are first reduced to one statistic per distinct S. Nonlinear forms
//! are fitted on S / S_max and y / max|y| by damped Gauss-Newton
//! (Levenberg-Marquardt) from two starts: a log-space regression and the best
//! point of a grid over the exponent. The lower residual wins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sampling::SampledPoint;
use super::StatError;

pub const FIT_TOLERANCE: f64 = 1e-9;
pub const FIT_MAX_ITERATIONS: usize = 200;

const GRID_R_MIN: f64 = 0.3;
const GRID_R_MAX: f64 = 1.2;
const GRID_R_STEPS: usize = 180;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveForm {
    /// `coef · S^r + c`
    PowerOffset,
    /// `coef · S`
    Linear,
    /// `coef · S^r`
    Power,
}

/// A fitted curve. `r` is 1 for the linear form and `c` is 0 unless the form
/// has an offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitCurve {
    pub form: CurveForm,
    pub coef: f64,
    pub r: f64,
    pub c: f64,
}

impl FitCurve {
    pub fn eval(&self, s: f64) -> f64 {
        match self.form {
            CurveForm::PowerOffset => self.coef * s.powf(self.r) + self.c,
            CurveForm::Linear => self.coef * s,
            CurveForm::Power => self.coef * s.powf(self.r),
        }
    }

    /// True when the curve is strictly increasing for S > 0.
    pub fn is_increasing(&self) -> bool {
        match self.form {
            CurveForm::Linear => self.coef > 0.0,
            CurveForm::PowerOffset | CurveForm::Power => self.coef * self.r > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    /// Sample standard deviation (n - 1 denominator).
    Std,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub curve: FitCurve,
    /// Residual sum of squares on the original scale.
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub s_min: f64,
    pub s_max: f64,
}

/// One `(S, statistic)` pair per distinct S, ascending in S. Groups of a
/// single point have no standard deviation and are dropped for [`Statistic::Std`].
pub fn group_statistics(points: &[SampledPoint], statistic: Statistic) -> Vec<(f64, f64)> {
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for p in points {
        groups.entry(p.s).or_default().push(p.raw);
    }
    groups
        .into_iter()
        .filter_map(|(s, raws)| {
            let n = raws.len() as f64;
            let mean = raws.iter().sum::<f64>() / n;
            match statistic {
                Statistic::Mean => Some((s as f64, mean)),
                Statistic::Std if raws.len() < 2 => None,
                Statistic::Std => {
                    let ss: f64 = raws.iter().map(|r| (r - mean) * (r - mean)).sum();
                    Some((s as f64, (ss / (n - 1.0)).sqrt()))
                }
            }
        })
        .collect()
}

pub fn fit_power_offset(points: &[SampledPoint], statistic: Statistic) -> Result<FitReport, StatError> {
    fit_curve(points, statistic, CurveForm::PowerOffset)
}

pub fn fit_linear_through_origin(points: &[SampledPoint]) -> Result<FitReport, StatError> {
    fit_curve(points, Statistic::Mean, CurveForm::Linear)
}

pub fn fit_power(points: &[SampledPoint]) -> Result<FitReport, StatError> {
    fit_curve(points, Statistic::Std, CurveForm::Power)
}

pub fn fit_curve(points: &[SampledPoint], statistic: Statistic, form: CurveForm) -> Result<FitReport, StatError> {
    let pairs = group_statistics(points, statistic);
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    fit_curve_xy(&xs, &ys, form, statistic)
}

/// Fits `form` to `(xs, ys)` and checks the result: mean curves must be
/// increasing, standard-deviation curves positive across the fitted range.
pub fn fit_curve_xy(xs: &[f64], ys: &[f64], form: CurveForm, statistic: Statistic) -> Result<FitReport, StatError> {
    if xs.len() != ys.len() {
        return Err(StatError::FitDegenerate("x and y lengths differ".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) || xs.iter().any(|&x| x <= 0.0) {
        return Err(StatError::FitDegenerate("S must be positive and all values finite".into()));
    }
    let mut distinct = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let needed = match form {
        CurveForm::PowerOffset => 3,
        CurveForm::Power => 2,
        CurveForm::Linear => 1,
    };
    if distinct.len() < needed {
        return Err(StatError::FitDegenerate(format!(
            "{} distinct S values, form needs {needed}",
            distinct.len()
        )));
    }
    let y_scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if y_scale == 0.0 {
        return Err(StatError::FitDegenerate("all statistics are zero".into()));
    }
    if form != CurveForm::Linear && ys.iter().all(|&y| y == ys[0]) {
        return Err(StatError::FitDegenerate("constant statistic leaves the exponent unidentified".into()));
    }
    let (s_min, s_max) = (distinct[0], distinct[distinct.len() - 1]);

    let report = match form {
        CurveForm::Linear => {
            let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
            let sxx: f64 = xs.iter().map(|x| x * x).sum();
            let curve = FitCurve { form, coef: sxy / sxx, r: 1.0, c: 0.0 };
            FitReport { curve, rss: rss(&curve, xs, ys), iterations: 0, converged: true, s_min, s_max }
        }
        CurveForm::Power | CurveForm::PowerOffset => {
            let xn: Vec<f64> = xs.iter().map(|x| x / s_max).collect();
            let yn: Vec<f64> = ys.iter().map(|y| y / y_scale).collect();
            let offset = form == CurveForm::PowerOffset;
            let starts = [log_space_start(&xn, &yn), grid_start(&xn, &yn, offset)];
            let mut best: Option<(Lm, FitCurve)> = None;
            for (a, r, c) in starts.into_iter().flatten() {
                let lm = if offset { levenberg_marquardt([a, r, c], &xn, &yn) } else { levenberg_marquardt2([a, r], &xn, &yn) };
                let (a, r, c) = (lm.params[0], lm.params[1], if offset { lm.params[2] } else { 0.0 });
                let curve = FitCurve { form, coef: a * y_scale / s_max.powf(r), r, c: c * y_scale };
                if !(curve.coef.is_finite() && curve.r.is_finite() && curve.c.is_finite()) {
                    continue;
                }
                if best.as_ref().is_none_or(|(b, _)| lm.rss < b.rss) {
                    best = Some((lm, curve));
                }
            }
            let (lm, curve) = best.ok_or_else(|| StatError::FitDegenerate("no finite solution".into()))?;
            FitReport { curve, rss: rss(&curve, xs, ys), iterations: lm.iterations, converged: lm.converged, s_min, s_max }
        }
    };

    match statistic {
        Statistic::Mean if !report.curve.is_increasing() => {
            Err(StatError::FitRejected("mean", format!("not increasing: {:?}", report.curve)))
        }
        Statistic::Std => {
            let lo = report.curve.eval(s_min).min(report.curve.eval(s_max));
            if lo > 0.0 {
                Ok(report)
            } else {
                Err(StatError::FitRejected("std", format!("reaches {lo} within the fitted range")))
            }
        }
        _ => Ok(report),
    }
}

fn rss(curve: &FitCurve, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (curve.eval(x) - y).powi(2)).sum()
}

/// Regression of ln y on ln x over positive points; offset starts at 0.
fn log_space_start(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, &y)| y > 0.0).map(|(&x, &y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let r = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    Some(((my - r * mx).exp(), r, 0.0))
}

/// Best exponent on a fixed grid, with the linear coefficients solved exactly.
fn grid_start(x: &[f64], y: &[f64], offset: bool) -> Option<(f64, f64, f64)> {
    let mut best: Option<(f64, (f64, f64, f64))> = None;
    for k in 0..=GRID_R_STEPS {
        let r = GRID_R_MIN + (GRID_R_MAX - GRID_R_MIN) * k as f64 / GRID_R_STEPS as f64;
        let basis: Vec<f64> = x.iter().map(|x| x.powf(r)).collect();
        let (a, c) = if offset {
            let n = x.len() as f64;
            let (sb, sy) = (basis.iter().sum::<f64>(), y.iter().sum::<f64>());
            let sbb: f64 = basis.iter().map(|b| b * b).sum();
            let sby: f64 = basis.iter().zip(y).map(|(b, y)| b * y).sum();
            let det = n * sbb - sb * sb;
            if det.abs() < 1e-300 {
                continue;
            }
            ((n * sby - sb * sy) / det, (sbb * sy - sb * sby) / det)
        } else {
            let sbb: f64 = basis.iter().map(|b| b * b).sum();
            (basis.iter().zip(y).map(|(b, y)| b * y).sum::<f64>() / sbb, 0.0)
        };
        let cost: f64 = basis.iter().zip(y).map(|(b, y)| (a * b + c - y).powi(2)).sum();
        if cost.is_finite() && best.is_none_or(|(b, _)| cost < b) {
            best = Some((cost, (a, r, c)));
        }
    }
    best.map(|(_, p)| p)
}

struct Lm {
    params: Vec<f64>,
    rss: f64,
    iterations: usize,
    converged: bool,
}

fn levenberg_marquardt(p0: [f64; 3], x: &[f64], y: &[f64]) -> Lm {
    lm_core(p0.to_vec(), x, y, |p, x| {
        let xr = x.powf(p[1]);
        (p[0] * xr + p[2], vec![xr, p[0] * xr * x.ln(), 1.0])
    })
}

fn levenberg_marquardt2(p0: [f64; 2], x: &[f64], y: &[f64]) -> Lm {
    lm_core(p0.to_vec(), x, y, |p, x| {
        let xr = x.powf(p[1]);
        (p[0] * xr, vec![xr, p[0] * xr * x.ln()])
    })
}

fn lm_core<F>(mut p: Vec<f64>, x: &[f64], y: &[f64], model: F) -> Lm
where
    F: Fn(&[f64], f64) -> (f64, Vec<f64>),
{
    let k = p.len();
    let cost = |p: &[f64]| -> f64 { x.iter().zip(y).map(|(&x, &y)| (y - model(p, x).0).powi(2)).sum() };
    let mut current = cost(&p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    if !current.is_finite() {
        return Lm { params: p, rss: current, iterations, converged };
    }
    while iterations < FIT_MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = vec![vec![0.0; k]; k];
        let mut jtr = vec![0.0; k];
        for (&xi, &yi) in x.iter().zip(y) {
            let (f, grad) = model(&p, xi);
            let res = yi - f;
            for a in 0..k {
                jtr[a] += grad[a] * res;
                for b in 0..k {
                    jtj[a][b] += grad[a] * grad[b];
                }
            }
        }
        let mut stepped = false;
        while lambda < 1e16 {
            let mut m = jtj.clone();
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-12);
            }
            if let Some(delta) = solve(m, jtr.clone()) {
                let trial: Vec<f64> = p.iter().zip(&delta).map(|(a, d)| a + d).collect();
                let trial_cost = cost(&trial);
                if trial_cost.is_finite() && trial_cost <= current {
                    let small = delta.iter().zip(&p).all(|(d, a)| d.abs() <= FIT_TOLERANCE * (a.abs() + FIT_TOLERANCE));
                    p = trial;
                    current = trial_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    stepped = true;
                    converged = small;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !stepped {
            // No descent direction left at any damping: a stationary point.
            converged = true;
        }
        if converged || current == 0.0 {
            converged = true;
            break;
        }
    }
    Lm { params: p, rss: current, iterations, converged }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for c in col..n {
                m[row][c] -= f * m[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut out = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| m[row][c] * out[c]).sum();
        out[row] = (b[row] - s) / m[row][row];
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (n - 1) as f64).exp().round()).collect()
    }

    fn points_on(curve: &FitCurve, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| curve.eval(x)).collect()
    }

    #[test]
    fn recovers_power_offset() {
        let truth = FitCurve { form: CurveForm::PowerOffset, coef: 0.012, r: 0.99, c: -0.2 };
        let xs = log_grid(100.0, 90_000.0, 40);
        let fit = fit_curve_xy(&xs, &points_on(&truth, &xs), CurveForm::PowerOffset, Statistic::Mean).unwrap();
        assert!((fit.curve.coef / truth.coef - 1.0).abs() < 0.01, "{:?}", fit.curve);
        assert!((fit.curve.r / truth.r - 1.0).abs() < 0.01);
        assert!((fit.curve.c - truth.c).abs() < 0.05);
        assert!(fit.converged);
    }

    #[test]
    fn recovers_power() {
        let truth = FitCurve { form: CurveForm::Power, coef: 1.47e-3, r: 0.64, c: 0.0 };
        let xs = log_grid(1.0, 2500.0, 30);
        let fit = fit_curve_xy(&xs, &points_on(&truth, &xs), CurveForm::Power, Statistic::Std).unwrap();
        assert!((fit.curve.coef / truth.coef - 1.0).abs() < 0.01, "{:?}", fit.curve);
        assert!((fit.curve.r / truth.r - 1.0).abs() < 0.01);
    }

    #[test]
    fn linear_exact() {
        let pts: Vec<SampledPoint> = (1..=10).map(|s| SampledPoint { s, raw: 2.0 * s as f64 }).collect();
        let fit = fit_linear_through_origin(&pts).unwrap();
        assert!((fit.curve.coef - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let constant: Vec<SampledPoint> = (1..=10).map(|s| SampledPoint { s, raw: 3.0 }).collect();
        assert!(matches!(fit_power_offset(&constant, Statistic::Mean), Err(StatError::FitDegenerate(_))));
        let zeros: Vec<SampledPoint> = (1..=10).map(|s| SampledPoint { s, raw: 0.0 }).collect();
        assert!(matches!(fit_linear_through_origin(&zeros), Err(StatError::FitDegenerate(_))));
        let single_s: Vec<SampledPoint> = [1.0, 2.0, 4.0].iter().map(|&raw| SampledPoint { s: 7, raw }).collect();
        assert!(matches!(fit_power(&single_s), Err(StatError::FitDegenerate(_))));
    }

    #[test]
    fn decreasing_mean_is_rejected() {
        let xs: Vec<f64> = (1..=20).map(|k| k as f64 * 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 100.0 - 0.3 * x).collect();
        assert!(matches!(
            fit_curve_xy(&xs, &ys, CurveForm::PowerOffset, Statistic::Mean),
            Err(StatError::FitRejected("mean", _))
        ));
    }

    #[test]
    fn grouping_uses_sample_std() {
        let pts = vec![
            SampledPoint { s: 4, raw: 1.0 },
            SampledPoint { s: 4, raw: 3.0 },
            SampledPoint { s: 9, raw: 5.0 },
        ];
        assert_eq!(group_statistics(&pts, Statistic::Mean), vec![(4.0, 2.0), (9.0, 5.0)]);
        assert_eq!(group_statistics(&pts, Statistic::Std), vec![(4.0, 2f64.sqrt())]);
    }

    #[test]
    fn fits_are_bit_deterministic() {
        let truth = FitCurve { form: CurveForm::PowerOffset, coef: 5.6e-3, r: 0.725, c: 4.87 };
        let xs = log_grid(1.0, 2500.0, 50);
        let mut ys = points_on(&truth, &xs);
        for (k, y) in ys.iter_mut().enumerate() {
            *y += ((k * 7919) % 13) as f64 * 1e-3;
        }
        let a = fit_curve_xy(&xs, &ys, CurveForm::PowerOffset, Statistic::Std).unwrap();
        let b = fit_curve_xy(&xs, &ys, CurveForm::PowerOffset, Statistic::Std).unwrap();
        assert_eq!(a.curve.coef.to_bits(), b.curve.coef.to_bits());
        assert_eq!(a.curve.r.to_bits(), b.curve.r.to_bits());
        assert_eq!(a.curve.c.to_bits(), b.curve.c.to_bits());
    }
}
