//! Weighted ensemble summaries and scoring against a known truth.

use crate::error::{invalid, Error, Result};

/// Tolerance on the total weight of a normalized sample.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Probability levels of the 68% and 95% central credible bands.
pub const BAND_68: (f64, f64) = (0.16, 0.84);
pub const BAND_95: (f64, f64) = (0.025, 0.975);

/// Borrowed values with normalized, nonnegative weights.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSample<'a> {
    values: &'a [f64],
    weights: &'a [f64],
}

impl<'a> WeightedSample<'a> {
    pub fn new(values: &'a [f64], weights: &'a [f64]) -> Result<Self> {
        if values.is_empty() {
            return invalid("weighted sample is empty");
        }
        if values.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!("{} values but {} weights", values.len(), weights.len())));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return invalid("weights must be nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return invalid(format!("weights sum to {total}, expected 1"));
        }
        Ok(Self { values, weights })
    }

    pub fn values(&self) -> &[f64] {
        self.values
    }

    pub fn weights(&self) -> &[f64] {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn weighted_mean(ws: &WeightedSample) -> f64 {
    ws.values.iter().zip(ws.weights).map(|(x, w)| x * w).sum()
}

/// Smallest value whose cumulative weight reaches `q` (left-continuous
/// inverse of the weighted empirical CDF, no interpolation).
pub fn weighted_quantile(ws: &WeightedSample, q: f64) -> Result<f64> {
    Ok(weighted_quantiles(ws, &[q])?[0])
}

/// Several quantiles from one sort.
pub fn weighted_quantiles(ws: &WeightedSample, qs: &[f64]) -> Result<Vec<f64>> {
    if let Some(q) = qs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return invalid(format!("quantile level {q} outside [0, 1]"));
    }
    let mut order: Vec<usize> = (0..ws.len()).collect();
    order.sort_by(|&a, &b| ws.values[a].total_cmp(&ws.values[b]));
    Ok(quantiles_sorted(ws, &order, qs))
}

fn quantiles_sorted(ws: &WeightedSample, order: &[usize], qs: &[f64]) -> Vec<f64> {
    let mut cumulative = Vec::with_capacity(order.len());
    let mut acc = 0.0;
    for &i in order {
        acc += ws.weights[i];
        cumulative.push(acc);
    }
    let last = ws.values[*order.last().unwrap()];
    qs.iter()
        .map(|&q| {
            // cumulative sums of normalized weights carry rounding error
            let target = q * acc - WEIGHT_SUM_TOLERANCE;
            let k = cumulative.partition_point(|&c| c < target);
            order.get(k).map_or(last, |&i| ws.values[i])
        })
        .collect()
}

/// Weighted mean with 68% and 95% credible bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub mean: f64,
    pub lo68: f64,
    pub hi68: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl Band {
    pub fn of(ws: &WeightedSample) -> Band {
        let mut order: Vec<usize> = (0..ws.len()).collect();
        order.sort_by(|&a, &b| ws.values[a].total_cmp(&ws.values[b]));
        let q = quantiles_sorted(ws, &order, &[BAND_68.0, BAND_68.1, BAND_95.0, BAND_95.1]);
        Band { mean: weighted_mean(ws), lo68: q[0], hi68: q[1], lo95: q[2], hi95: q[3] }
    }

    pub fn point(value: f64) -> Band {
        Band { mean: value, lo68: value, hi68: value, lo95: value, hi95: value }
    }

    pub fn width95(&self) -> f64 {
        self.hi95 - self.lo95
    }
}

fn check_same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{what}: lengths {a} and {b} differ")));
    }
    Ok(())
}

/// Root-mean-square difference between two series.
pub fn rmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    check_same_len(estimate.len(), truth.len(), "rmse")?;
    if estimate.is_empty() {
        return invalid("rmse of an empty series");
    }
    let ss: f64 = estimate.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum();
    Ok((ss / estimate.len() as f64).sqrt())
}

/// Element-wise `|truth - estimate|` over a time-by-space field.
pub fn error_field(truth: &[Vec<f64>], estimate: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_same_len(truth.len(), estimate.len(), "error field rows")?;
    truth
        .iter()
        .zip(estimate)
        .map(|(t, e)| {
            check_same_len(t.len(), e.len(), "error field columns")?;
            Ok(t.iter().zip(e).map(|(a, b)| (a - b).abs()).collect())
        })
        .collect()
}

/// Fraction of indices with `lower <= truth <= upper`.
pub fn coverage(truth: &[f64], lower: &[f64], upper: &[f64]) -> Result<f64> {
    check_same_len(truth.len(), lower.len(), "coverage lower band")?;
    check_same_len(truth.len(), upper.len(), "coverage upper band")?;
    if truth.is_empty() {
        return invalid("coverage of an empty series");
    }
    let hits = truth.iter().zip(lower.iter().zip(upper)).filter(|(t, (lo, hi))| *lo <= *t && *t <= *hi).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    /// Accumulated weight per bin.
    pub mass: Vec<f64>,
}

/// Equal-width histogram over `[min, max]` of the sample, accumulating weights.
pub fn weighted_histogram(ws: &WeightedSample, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return invalid("histogram needs at least one bin");
    }
    let lo = ws.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ws.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| if k == bins { hi } else { lo + k as f64 * width }).collect();
    let mut mass = vec![0.0; bins];
    for (&x, &w) in ws.values.iter().zip(ws.weights) {
        let k = if width > 0.0 { (((x - lo) / width) as usize).min(bins - 1) } else { 0 };
        mass[k] += w;
    }
    Ok(Histogram { edges, mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn mean_examples() {
        let v = [1.0, 2.0, 6.0];
        let w = uniform(3);
        assert!((weighted_mean(&WeightedSample::new(&v, &w).unwrap()) - 3.0).abs() < 1e-15);
        let point = [0.0, 1.0, 0.0];
        assert_eq!(weighted_mean(&WeightedSample::new(&v, &point).unwrap()), 2.0);
        let ws = WeightedSample::new(&[1.0, 3.0], &[0.25, 0.75]).unwrap();
        assert_eq!(weighted_mean(&ws), 2.5);
    }

    #[test]
    fn sample_validation() {
        assert!(WeightedSample::new(&[], &[]).is_err());
        assert!(WeightedSample::new(&[1.0], &[0.5]).is_err());
        assert!(WeightedSample::new(&[1.0, 2.0], &[1.5, -0.5]).is_err());
        assert!(WeightedSample::new(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn quantile_examples() {
        let ws = WeightedSample::new(&[4.2], &[1.0]).unwrap();
        for q in [0.0, 0.025, 0.5, 0.975, 1.0] {
            assert_eq!(weighted_quantile(&ws, q).unwrap(), 4.2);
        }
        let v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        let w = uniform(100);
        let ws = WeightedSample::new(&v, &w).unwrap();
        assert_eq!(weighted_quantile(&ws, 0.5).unwrap(), 50.0);
        assert_eq!(weighted_quantile(&ws, 0.0).unwrap(), 1.0);
        assert_eq!(weighted_quantile(&ws, 1.0).unwrap(), 100.0);
        assert_eq!(weighted_quantile(&ws, 0.505).unwrap(), 51.0);
        assert!(weighted_quantile(&ws, 1.5).is_err());
    }

    #[test]
    fn weighted_atoms() {
        let ws = WeightedSample::new(&[10.0, 20.0, 30.0], &[0.2, 0.5, 0.3]).unwrap();
        assert_eq!(weighted_quantile(&ws, 0.1).unwrap(), 10.0);
        assert_eq!(weighted_quantile(&ws, 0.2).unwrap(), 10.0);
        assert_eq!(weighted_quantile(&ws, 0.21).unwrap(), 20.0);
        assert_eq!(weighted_quantile(&ws, 0.7).unwrap(), 20.0);
        assert_eq!(weighted_quantile(&ws, 0.71).unwrap(), 30.0);
        let b = Band::of(&ws);
        assert_eq!((b.lo95, b.lo68, b.hi68, b.hi95), (10.0, 10.0, 30.0, 30.0));
    }

    #[test]
    fn rmse_and_error_field() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.5, 2.5, 3.5], &[1.0, 2.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());

        let t = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(error_field(&t, &t).unwrap(), vec![vec![0.0; 2]; 2]);
        let e = vec![vec![0.0, 2.5], vec![3.0, 5.0]];
        assert_eq!(error_field(&t, &e).unwrap(), vec![vec![1.0, 0.5], vec![0.0, 1.0]]);
        assert!(error_field(&t, &[vec![1.0]]).is_err());
    }

    #[test]
    fn coverage_examples() {
        let t = [1.0, 2.0, 3.0];
        let inf = [f64::INFINITY; 3];
        let ninf = [f64::NEG_INFINITY; 3];
        assert_eq!(coverage(&t, &ninf, &inf).unwrap(), 1.0);
        assert_eq!(coverage(&t, &t, &t).unwrap(), 1.0);
        assert_eq!(coverage(&t, &[5.0; 3], &[6.0; 3]).unwrap(), 0.0);
        assert!((coverage(&t, &[0.0, 2.5, 0.0], &[9.0; 3]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn histogram_examples() {
        let ws = WeightedSample::new(&[1.0, 2.0, 5.0], &[0.2, 0.3, 0.5]).unwrap();
        let h = weighted_histogram(&ws, 1).unwrap();
        assert_eq!(h.mass, vec![1.0]);
        assert_eq!(h.edges, vec![1.0, 5.0]);
        let h = weighted_histogram(&ws, 4).unwrap();
        assert_eq!(h.mass, vec![0.2, 0.3, 0.0, 0.5]);

        let point = WeightedSample::new(&[3.0, 3.0], &[0.5, 0.5]).unwrap();
        let h = weighted_histogram(&point, 5).unwrap();
        assert_eq!(h.mass[0], 1.0);
        assert!(weighted_histogram(&point, 0).is_err());
    }

    #[test]
    fn histogram_of_uniform_grid() {
        let n = 1 << 16;
        let v: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        let w = uniform(n);
        let h = weighted_histogram(&WeightedSample::new(&v, &w).unwrap(), 10).unwrap();
        for m in h.mass {
            assert!((m - 0.1).abs() < 1e-3);
        }
    }

    fn normalized(raw: &[f64]) -> Vec<f64> {
        let s: f64 = raw.iter().sum();
        raw.iter().map(|w| w / s).collect()
    }

    proptest! {
        #[test]
        fn quantiles_monotone(
            pairs in proptest::collection::vec((-100.0f64..100.0, 0.01f64..1.0), 1..60),
            q1 in 0.0f64..=1.0,
            q2 in 0.0f64..=1.0,
        ) {
            let v: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let w = normalized(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let ws = WeightedSample::new(&v, &w).unwrap();
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            prop_assert!(weighted_quantile(&ws, lo).unwrap() <= weighted_quantile(&ws, hi).unwrap());
            let b = Band::of(&ws);
            prop_assert!(b.lo95 <= b.lo68 && b.lo68 <= b.hi68 && b.hi68 <= b.hi95);
        }

        #[test]
        fn mean_within_range_and_histogram_conserves_mass(
            pairs in proptest::collection::vec((-50.0f64..50.0, 0.0f64..1.0), 1..60),
            bins in 1usize..40,
        ) {
            let raw: Vec<f64> = pairs.iter().map(|p| p.1 + 1e-3).collect();
            let v: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let w = normalized(&raw);
            let ws = WeightedSample::new(&v, &w).unwrap();
            let m = weighted_mean(&ws);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
            let h = weighted_histogram(&ws, bins).unwrap();
            prop_assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
