//! Small numerical helpers shared by the estimators.

use std::ops::Range;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = NeumaierSum::default();
    for v in values {
        s.add(v);
    }
    s.value()
}

/// Default number of batches used for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 20;

/// Number of batches actually used for `n` samples.
pub fn batch_count(n: usize, requested: usize) -> usize {
    requested.min(n).max(1)
}

/// Contiguous, nearly equal index ranges covering `0..n`.
pub fn batch_ranges(n: usize, n_batches: usize) -> Vec<Range<usize>> {
    let nb = batch_count(n, n_batches);
    (0..nb).map(|b| b * n / nb..(b + 1) * n / nb).collect()
}

/// Batch containing sample `index` under [`batch_ranges`].
pub fn batch_of(index: usize, n: usize, n_batches: usize) -> usize {
    let nb = batch_count(n, n_batches);
    // largest b with b·n/nb <= index
    let mut b = (index * nb) / n.max(1);
    while b + 1 < nb && (b + 1) * n / nb <= index {
        b += 1;
    }
    while b > 0 && b * n / nb > index {
        b -= 1;
    }
    b
}

/// Mean and standard error of the mean from per-batch values.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Standard error of a statistic from its values on independent batches.
pub fn batch_standard_error(values: &[f64]) -> f64 {
    mean_and_se(values).1
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Trapezoid rule over a sorted grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(v), 2.0);
        assert_eq!(v.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn merge_matches_sequential() {
        let data: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1 - 3.0).collect();
        let mut a = NeumaierSum::default();
        let mut b = NeumaierSum::default();
        data[..400].iter().for_each(|&x| a.add(x));
        data[400..].iter().for_each(|&x| b.add(x));
        a.merge(&b);
        assert!((a.value() - compensated_sum(data.iter().copied())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn batches_partition(n in 1usize..5000, nb in 1usize..40) {
            let ranges = batch_ranges(n, nb);
            prop_assert_eq!(ranges.len(), nb.min(n));
            prop_assert_eq!(ranges[0].start, 0);
            prop_assert_eq!(ranges.last().unwrap().end, n);
            for w in ranges.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
                prop_assert!(!w[0].is_empty());
            }
            for (b, r) in ranges.iter().enumerate() {
                for i in [r.start, r.end - 1] {
                    prop_assert_eq!(batch_of(i, n, nb), b);
                }
            }
        }
    }

    #[test]
    fn se_of_constant_is_zero() {
        assert_eq!(mean_and_se(&[2.0; 5]), (2.0, 0.0));
        let (m, se) = mean_and_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.02, 0.01, 0.005, 0.0025];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v * v).collect();
        assert!((log_log_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let g = [0.0, 0.5, 2.0];
        assert!((trapezoid(&g, &[0.0, 0.5, 2.0]) - 2.0).abs() < 1e-15);
    }
}
