use super::StatError;
use crate::fingerprint::{tanimoto_unchecked, Fingerprint};

fn check_sets(a: &[Fingerprint], b: &[Fingerprint]) -> Result<(), StatError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatError::EmptySet);
    }
    let width = a[0].width();
    if let Some(bad) = a.iter().chain(b).find(|fp| fp.width() != width) {
        return Err(StatError::WidthMismatch(width, bad.width()));
    }
    Ok(())
}

/// Sum of pairwise Tanimoto values that reach `ts`; pairs below contribute 0.
pub fn raw_score(a: &[Fingerprint], b: &[Fingerprint], ts: f64) -> Result<f64, StatError> {
    if !(0.0..=1.0).contains(&ts) {
        return Err(StatError::InvalidThreshold(ts));
    }
    check_sets(a, b)?;
    Ok(raw_score_unchecked(a, b, ts))
}

/// Accumulates row-major over `a` then `b`.
pub fn raw_score_unchecked(a: &[Fingerprint], b: &[Fingerprint], ts: f64) -> f64 {
    let mut total = 0.0;
    for x in a {
        for y in b {
            let t = tanimoto_unchecked(x, y);
            if t >= ts {
                total += t;
            }
        }
    }
    total
}

/// Raw scores for every threshold of an ascending `grid` from one pass over
/// the pairs. Entry k equals `raw_score(a, b, grid[k])` up to summation order.
pub fn raw_scores_over_grid(a: &[Fingerprint], b: &[Fingerprint], grid: &[f64]) -> Result<Vec<f64>, StatError> {
    if grid.is_empty() {
        return Err(StatError::EmptyGrid);
    }
    if let Some(&bad) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(StatError::InvalidThreshold(bad));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(StatError::InvalidProtocol("threshold grid must be ascending".into()));
    }
    check_sets(a, b)?;
    Ok(grid_unchecked(a, b, grid))
}

pub(crate) fn grid_unchecked(a: &[Fingerprint], b: &[Fingerprint], grid: &[f64]) -> Vec<f64> {
    // bucket[k] collects pairs whose value reaches grid[k] but not grid[k + 1].
    let mut bucket = vec![0.0; grid.len()];
    for x in a {
        for y in b {
            let t = tanimoto_unchecked(x, y);
            let reached = grid.partition_point(|&g| g <= t);
            if reached > 0 {
                bucket[reached - 1] += t;
            }
        }
    }
    let mut out = vec![0.0; grid.len()];
    let mut acc = 0.0;
    for k in (0..grid.len()).rev() {
        acc += bucket[k];
        out[k] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fp(bits: &[usize]) -> Fingerprint {
        Fingerprint::from_bits(64, bits.iter().copied())
    }

    #[test]
    fn below_threshold_contributes_nothing() {
        let a = [fp(&[1, 2])];
        let b = [fp(&[3, 4]), fp(&[1, 5, 6])];
        assert_eq!(raw_score(&a, &b, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn single_qualifying_pair() {
        // |{1,2,3,4} ∩ {1,2,3,4,5}| / 5 = 0.8
        let a = [fp(&[1, 2, 3, 4])];
        let b = [fp(&[1, 2, 3, 4, 5]), fp(&[10, 11])];
        assert!((raw_score(&a, &b, 0.25).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert_eq!(raw_score(&[], &[fp(&[1])], 0.5), Err(StatError::EmptySet));
        assert_eq!(raw_score(&[fp(&[1])], &[fp(&[1])], 1.5), Err(StatError::InvalidThreshold(1.5)));
        let wide = Fingerprint::from_bits(128, [1]);
        assert_eq!(raw_score(&[fp(&[1])], &[wide], 0.5), Err(StatError::WidthMismatch(64, 128)));
    }

    fn arb_set() -> impl Strategy<Value = Vec<Fingerprint>> {
        proptest::collection::vec(proptest::collection::vec(0usize..64, 1..12), 1..8)
            .prop_map(|rows| rows.into_iter().map(|r| Fingerprint::from_bits(64, r)).collect())
    }

    proptest! {
        #[test]
        fn grid_matches_single_threshold(a in arb_set(), b in arb_set()) {
            let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
            let multi = raw_scores_over_grid(&a, &b, &grid).unwrap();
            for (k, &ts) in grid.iter().enumerate() {
                let single = raw_score(&a, &b, ts).unwrap();
                prop_assert!((multi[k] - single).abs() <= 1e-12 * (1.0 + single));
            }
        }

        #[test]
        fn raw_score_non_increasing_in_threshold(a in arb_set(), b in arb_set(), t in 0.0f64..1.0) {
            let lo = raw_score(&a, &b, t).unwrap();
            let hi = raw_score(&a, &b, (t + 0.1).min(1.0)).unwrap();
            prop_assert!(hi <= lo);
            prop_assert!(lo >= 0.0);
        }
    }
}
