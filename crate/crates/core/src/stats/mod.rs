//! Set-similarity statistics: raw scores, size-dependent background models,
//! extreme-value significance and threshold selection.

mod evd;
mod fit;
mod gof;
mod model;
mod sampling;
mod score;
mod ts;

use thiserror::Error;

pub use evd::{e_value, evd_tail_term, fit_gumbel, gumbel_cdf, p_value, z_score, Gumbel, EULER_GAMMA, SERIES_BRANCH_Z};
pub use fit::{
    fit_curve, fit_curve_xy, fit_linear_through_origin, fit_power, fit_power_offset, group_statistics, CurveForm,
    FitCurve, FitReport, Statistic, FIT_MAX_ITERATIONS, FIT_TOLERANCE,
};
pub use gof::{chi_square_gof, default_bins, GofResult};
pub use model::{
    CurveForms, FitProvenance, ModelKey, ModelSet, Purpose, Significance, StatModel, Subset, MODEL_SET_VERSION,
};
pub use sampling::{
    sample_background, sample_background_grid, sample_background_subset1, sample_background_subset2,
    sample_background_subset3, DedupedPool, Protocol, SampledPoint,
};
pub use score::{raw_score, raw_score_unchecked, raw_scores_over_grid};
pub use ts::{select_ts, ts_grid, TrainingPair, TS_GRID_STEPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatError {
    #[error("empty compound set")]
    EmptySet,
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("fingerprint widths differ ({0} vs {1})")]
    WidthMismatch(usize, usize),
    #[error("background pool has {have} compounds, protocol needs {need}")]
    PoolTooSmall { need: usize, have: usize },
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),
    #[error("fitted {0} curve rejected: {1}")]
    FitRejected(&'static str, String),
    #[error("standard deviation curve is {std} at S = {s}")]
    NonPositiveStd { s: f64, std: f64 },
    #[error("need at least {need} samples, got {have}")]
    TooFewSamples { need: usize, have: usize },
    #[error("samples have zero variance")]
    ZeroVariance,
    #[error("fewer than 4 bins remain after merging sparse bins")]
    TooFewBins,
    #[error("empty threshold grid")]
    EmptyGrid,
    #[error("empty training set")]
    EmptyTraining,
    #[error("invalid sampling protocol: {0}")]
    InvalidProtocol(String),
    #[error("model set: {0}")]
    Format(String),
}
