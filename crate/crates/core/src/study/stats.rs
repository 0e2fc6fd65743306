//! Summary statistics and log-log rate fits for replicated errors.

use serde::Serialize;

use crate::error::{Error, Result};

/// Box-plot style summary. Quartiles interpolate linearly between order
/// statistics: the `p`-quantile of sorted `x_0..x_{N-1}` sits at position
/// `h = (N−1)p` and equals `x_⌊h⌋ + (h − ⌊h⌋)(x_{⌊h⌋+1} − x_⌊h⌋)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Values above `q3 + 1.5 (q3 − q1)`.
    pub outliers: usize,
    pub max: f64,
}

impl Summary {
    pub fn upper_fence(&self) -> f64 {
        self.q3 + 1.5 * (self.q3 - self.q1)
    }

    pub fn is_outlier(&self, value: f64) -> bool {
        value > self.upper_fence()
    }
}

/// Quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::input("cannot summarize an empty list"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::input(format!("summary needs finite nonnegative values, got {v}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let fence = q3 + 1.5 * (q3 - q1);
    Ok(Summary {
        count: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median: quantile_sorted(&sorted, 0.5),
        q1,
        q3,
        outliers: sorted.iter().filter(|v| **v > fence).count(),
        max: sorted[sorted.len() - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares line through `(ln n, ln median)`.
pub fn rate_fit(ns: &[usize], medians: &[f64]) -> Result<RateFit> {
    if ns.len() != medians.len() {
        return Err(Error::input("ns and medians differ in length"));
    }
    if ns.len() < 3 {
        return Err(Error::input("rate fit needs at least three points"));
    }
    if ns.contains(&0) || medians.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::input("rate fit needs positive n and medians"));
    }
    let xs: Vec<f64> = ns.iter().map(|n| (*n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::input("rate fit needs at least two distinct n"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}
