//! Evaluation and objective metrics: rank correlations, score-error measures,
//! and the per-run report combining them.

use crate::error::{Error, Result};
use crate::soft_rank::{hard_rank, soft_rank};

fn check_equal_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

fn check_min_len(a: &[f64], min: usize, what: &str) -> Result<()> {
    if a.len() < min {
        return Err(Error::InvalidArgument(format!("{what} requires N >= {min}, got {}", a.len())));
    }
    Ok(())
}

/// Spearman rank-order correlation on descending integer ranks:
/// `1 - 6 * sum((r_a - r_b)^2) / (N (N^2 - 1))`.
///
/// ```
/// use sma_core::metrics::srocc;
/// assert_eq!(srocc(&[5.00, 4.99, 4.98], &[3.0, 2.0, 1.0]).unwrap(), 1.0);
/// assert_eq!(srocc(&[4.99, 5.00, 5.01], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
/// ```
pub fn srocc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_equal_len(a, b)?;
    check_min_len(a, 2, "srocc")?;
    let ra = hard_rank(a)?;
    let rb = hard_rank(b)?;
    let n = a.len() as f64;
    let sum: f64 = ra
        .iter()
        .zip(&rb)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(1.0 - 6.0 * sum / (n * (n * n - 1.0)))
}

/// Spearman objective with the first argument soft-ranked: the surrogate
/// ranks of `a` enter the same rank-difference formula against the hard
/// ranks of `b`. Differentiable in `a` through `soft_rank_vjp`.
pub fn soft_srocc(a: &[f64], b: &[f64], beta: f64) -> Result<f64> {
    check_equal_len(a, b)?;
    check_min_len(a, 2, "soft_srocc")?;
    let ra = soft_rank(a, beta)?;
    let rb = hard_rank(b)?;
    let n = a.len() as f64;
    let sum: f64 = ra
        .values
        .iter()
        .zip(&rb)
        .map(|(&x, &y)| {
            let d = x - y as f64;
            d * d
        })
        .sum();
    Ok(1.0 - 6.0 * sum / (n * (n * n - 1.0)))
}

/// Kendall tau-a: pair concordance with ties counting as neither.
pub fn krocc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_equal_len(a, b)?;
    check_min_len(a, 2, "krocc")?;
    let n = a.len();
    let mut net = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = (a[i] - a[j]).signum();
            let sb = (b[i] - b[j]).signum();
            if sa != 0.0 && sb != 0.0 {
                net += if sa == sb { 1 } else { -1 };
            }
        }
    }
    Ok(net as f64 / (n * (n - 1) / 2) as f64)
}

/// Pearson linear correlation.
pub fn plcc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_equal_len(a, b)?;
    check_min_len(a, 2, "plcc")?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::DegenerateInput(
            "plcc: an input has zero variance".into(),
        ));
    }
    Ok(cov / (va.sqrt() * vb.sqrt()))
}

/// Mean squared difference.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    check_equal_len(a, b)?;
    check_min_len(a, 1, "mse")?;
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(mse(a, b)?.sqrt())
}

/// Unbiased sample variance (1/(N-1)).
pub fn variance(s: &[f64]) -> Result<f64> {
    check_min_len(s, 2, "variance")?;
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let ss: f64 = s.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(ss / (n - 1.0))
}

/// Mean absolute score change before vs. after.
pub fn abs_gain(before: &[f64], after: &[f64]) -> Result<f64> {
    check_equal_len(before, after)?;
    check_min_len(before, 1, "abs_gain")?;
    let sum: f64 = before.iter().zip(after).map(|(b, a)| (a - b).abs()).sum();
    Ok(sum / before.len() as f64)
}

/// Score anchors for the log-ratio attack-strength metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RBounds {
    pub hi: f64,
    pub lo: f64,
}

impl Default for RBounds {
    fn default() -> Self {
        Self { hi: 90.55, lo: 3.50 }
    }
}

impl RBounds {
    pub fn new(hi: f64, lo: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidArgument(format!(
                "RBounds requires hi > lo, got hi={hi} lo={lo}"
            )));
        }
        Ok(Self { hi, lo })
    }
}

/// Mean natural-log ratio of the maximal feasible score change to the
/// achieved change. Smaller means a stronger attack.
pub fn r_metric(before: &[f64], after: &[f64], bounds: &RBounds) -> Result<f64> {
    check_equal_len(before, after)?;
    check_min_len(before, 1, "r_metric")?;
    let mut sum = 0.0;
    for (i, (b, a)) in before.iter().zip(after).enumerate() {
        let change = (b - a).abs();
        if change == 0.0 {
            return Err(Error::DivisionByZero {
                index: i,
                context: "r_metric: score unchanged by the attack".into(),
            });
        }
        let headroom = (bounds.hi - b).max(b - bounds.lo);
        sum += (headroom / change).ln();
    }
    Ok(sum / before.len() as f64)
}

/// Mean absolute within-set rank change.
pub fn delta_rank(before: &[f64], after: &[f64]) -> Result<f64> {
    check_equal_len(before, after)?;
    check_min_len(before, 1, "delta_rank")?;
    let rb = hard_rank(before)?;
    let ra = hard_rank(after)?;
    let sum: f64 = rb
        .iter()
        .zip(&ra)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum();
    Ok(sum / before.len() as f64)
}

/// The full seven-metric evaluation of one attack run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub srocc: f64,
    pub krocc: f64,
    pub plcc: f64,
    pub mse: f64,
    pub rmse: f64,
    pub abs_gain: f64,
    /// `f64::INFINITY` when any score is unchanged (the per-element log
    /// ratio diverges); the standalone `r_metric` errors instead.
    pub r_metric: f64,
    pub delta_rank: f64,
}

impl MetricsReport {
    pub fn compute(before: &[f64], after: &[f64], bounds: &RBounds) -> Result<Self> {
        let r = match r_metric(before, after, bounds) {
            Ok(v) => v,
            Err(Error::DivisionByZero { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        Ok(Self {
            srocc: srocc(before, after)?,
            krocc: krocc(before, after)?,
            plcc: plcc(before, after)?,
            mse: mse(before, after)?,
            rmse: rmse(before, after)?,
            abs_gain: abs_gain(before, after)?,
            r_metric: r,
            delta_rank: delta_rank(before, after)?,
        })
    }
}
