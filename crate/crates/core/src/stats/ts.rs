use std::collections::BTreeSet;

use super::model::StatModel;
use super::StatError;

/// Grid steps of 0.01 over [0, 1], both ends included.
pub const TS_GRID_STEPS: usize = 100;

pub fn ts_grid() -> Vec<f64> {
    (0..=TS_GRID_STEPS).map(|k| k as f64 / TS_GRID_STEPS as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair<Q> {
    pub query: Q,
    pub true_targets: BTreeSet<String>,
}

/// Threshold whose model recalls the most true targets over `training`.
/// Ties go to the larger threshold. Returns the chosen threshold and its recall.
pub fn select_ts<Q, F>(candidates: &[StatModel], training: &[TrainingPair<Q>], screen: F) -> Result<(f64, f64), StatError>
where
    F: Fn(&StatModel, &Q) -> BTreeSet<String>,
{
    if candidates.is_empty() {
        return Err(StatError::EmptyGrid);
    }
    let total: usize = training.iter().map(|t| t.true_targets.len()).sum();
    if training.is_empty() || total == 0 {
        return Err(StatError::EmptyTraining);
    }
    let mut best: Option<(f64, usize)> = None;
    for model in candidates {
        let recovered: usize = training
            .iter()
            .map(|pair| screen(model, &pair.query).intersection(&pair.true_targets).count())
            .sum();
        let better = match best {
            None => true,
            Some((ts, hits)) => recovered > hits || (recovered == hits && model.ts > ts),
        };
        if better {
            best = Some((model.ts, recovered));
        }
    }
    let (ts, hits) = best.expect("nonempty candidates");
    Ok((ts, hits as f64 / total as f64))
}
