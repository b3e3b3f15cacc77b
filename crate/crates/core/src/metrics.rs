//! Rank correlation, inequality and summary statistics used in reports.

use crate::error::{IpslError, Result};

/// Summary of a per-tick or per-generation series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSummary {
    pub mean: f64,
    /// Sample (n - 1) standard deviation; 0 for a single value.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with average-rank tie handling.
///
/// Computed as the Pearson correlation of the rank vectors, which reduces to
/// `1 - 6 Σd² / (n(n² - 1))` when there are no ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(IpslError::Undefined(format!(
            "spearman needs equal lengths (got {} and {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(IpslError::Undefined(format!(
            "spearman needs at least 3 observations (got {})",
            x.len()
        )));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    // Ranks of n items always sum to n(n+1)/2.
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(IpslError::Undefined("zero rank variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Gini coefficient of non-negative values, `Σ (2i - n - 1) x_(i) / (n Σx)`
/// over the ascending sort with 1-based `i`.
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(IpslError::Undefined("gini of an empty vector".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(IpslError::Contract(format!(
            "gini needs non-negative values (got {v})"
        )));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(IpslError::Undefined("gini with zero total".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x)
        .sum();
    Ok((weighted / (n * total)).max(0.0))
}

pub fn summarize(series: &[f64]) -> Result<SeriesSummary> {
    if series.is_empty() {
        return Err(IpslError::Undefined("summary of an empty series".into()));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let sd = if series.len() > 1 {
        (series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SeriesSummary {
        // rounding can nudge the mean a hair outside [min, max] for constant series
        mean: mean.clamp(min, max),
        sd,
        min,
        max,
        count: series.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1., 2., 3.], &[10., 20., 30.]).unwrap(), 1.0);
        assert_eq!(spearman(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), -1.0);
        assert_eq!(spearman(&[1., 2., 3.], &[2., 1., 3.]).unwrap(), 0.5);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(spearman(&[1., 2.], &[1., 2.]), Err(IpslError::Undefined(_))));
        assert!(matches!(
            spearman(&[1., 1., 1.], &[1., 2., 3.]),
            Err(IpslError::Undefined(_))
        ));
        assert!(spearman(&[1., 2., 3.], &[1., 2.]).is_err());
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[5., 1., 5., 3.]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[2., 2., 2., 2.]).unwrap(), 0.0);
        assert_eq!(gini(&[0., 0., 0., 1.]).unwrap(), 0.75);
        assert_eq!(gini(&[5.]).unwrap(), 0.0);
        assert!(matches!(gini(&[0., 0.]), Err(IpslError::Undefined(_))));
        assert!(gini(&[1., -1.]).is_err());
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[2., 2., 2.]).unwrap();
        assert_eq!((s.mean, s.sd, s.count), (2.0, 0.0, 3));
        let s = summarize(&[1., 3.]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.sd - 2f64.sqrt()).abs() < 1e-15);
        assert!(summarize(&[]).is_err());
    }

    proptest! {
        #[test]
        fn spearman_invariant_under_monotone_transform(
            xs in prop::collection::vec(-100.0f64..100.0, 3..40),
            ys in prop::collection::vec(-100.0f64..100.0, 3..40),
        ) {
            let n = xs.len().min(ys.len());
            let (x, y) = (&xs[..n], &ys[..n]);
            if let Ok(rho) = spearman(x, y) {
                let tx: Vec<f64> = x.iter().map(|v| v * v * v + 2.0 * v).collect();
                let t2 = spearman(&tx, y).unwrap();
                prop_assert!((rho - t2).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&rho));
            }
        }

        #[test]
        fn gini_bounded_and_scale_invariant(
            xs in prop::collection::vec(0.0f64..50.0, 1..60),
            c in 0.01f64..1000.0,
        ) {
            if let Ok(g) = gini(&xs) {
                let n = xs.len() as f64;
                prop_assert!(g >= 0.0 && g <= 1.0 - 1.0 / n + 1e-12);
                let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
                prop_assert!((gini(&scaled).unwrap() - g).abs() < 1e-12);
            }
        }

        #[test]
        fn summary_orders_min_mean_max(xs in prop::collection::vec(-1e6f64..1e6, 1..50)) {
            let s = summarize(&xs).unwrap();
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
        }
    }
}
