//! Parameter choice: the discrepancy principle on the geometric grid
//! `α = q^k` (optionally floored at `1/n`), a priori rules, and the
//! theoretical error bounds used as diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{residual_norm, FilterSpec};
use crate::spectral::{CoefficientVector, SpectralDecomposition};

pub const DEFAULT_Q: f64 = 0.7;
pub const DEFAULT_K_MAX: usize = 1_000_000;

/// Outcome of the discrepancy search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceResult {
    pub alpha: f64,
    pub k: usize,
    pub residual_at_stop: f64,
    pub emergency_triggered: bool,
    pub delta_est_used: f64,
    pub iterations_evaluated: usize,
}

/// Discrepancy principle with an estimated noise level.
///
/// Starting from `k = 0`, `k` is incremented while
/// `‖(K R_{q^k} − Id) ȳ‖ > δ` and, when `emergency_n` is set,
/// `q^k > 1/emergency_n`. The guard sits inside the loop condition, so the
/// emergency exit returns the first `q^k ≤ 1/n`, not the last `q^k > 1/n`.
pub fn discrepancy_principle(
    op: &SpectralDecomposition,
    spec: &FilterSpec,
    y_bar: &CoefficientVector,
    delta_est: f64,
    q: f64,
    emergency_n: Option<usize>,
    k_max: usize,
) -> Result<ChoiceResult> {
    if !(delta_est > 0.0 && delta_est.is_finite()) {
        return Err(Error::input(format!("delta_est must be positive, got {delta_est}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::input(format!("q must lie in (0, 1), got {q}")));
    }
    if emergency_n == Some(0) {
        return Err(Error::input("emergency stop needs n >= 1"));
    }
    let floor = emergency_n.map(|n| 1.0 / n as f64);

    let mut k = 0;
    let mut alpha = 1.0;
    loop {
        let residual = residual_norm(op, spec, alpha, y_bar)?;
        let stop = |emergency_triggered| ChoiceResult {
            alpha,
            k,
            residual_at_stop: residual,
            emergency_triggered,
            delta_est_used: delta_est,
            iterations_evaluated: k + 1,
        };
        if residual <= delta_est {
            return Ok(stop(false));
        }
        if let Some(floor) = floor {
            if alpha <= floor {
                return Ok(stop(true));
            }
        }
        if k == k_max {
            return Err(Error::NonTermination {
                k_max,
                residual,
                delta: delta_est,
            });
        }
        k += 1;
        alpha *= q;
    }
}

/// Re-checks the stopping certificate of a non-emergency choice against an
/// independent residual evaluation: `r(q^k) ≤ δ` and, for `k ≥ 1`,
/// `r(q^{k−1}) > δ`.
pub fn certify_stop(
    op: &SpectralDecomposition,
    spec: &FilterSpec,
    y_bar: &CoefficientVector,
    q: f64,
    choice: &ChoiceResult,
) -> Result<bool> {
    if choice.emergency_triggered {
        return Ok(false);
    }
    let delta = choice.delta_est_used;
    if residual_norm(op, spec, choice.alpha, y_bar)? > delta {
        return Ok(false);
    }
    if choice.k == 0 {
        return Ok(choice.alpha == 1.0);
    }
    Ok(residual_norm(op, spec, choice.alpha / q, y_bar)? > delta)
}

/// A priori parameter choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AprioriRule {
    /// `α = c (δ/ρ)^{2/(ν+1)}`.
    ScaledSource { c: f64, nu: f64, rho: f64 },
    /// `α = 1/√n`.
    InvSqrtNAlpha,
}

impl AprioriRule {
    pub fn validate(&self) -> Result<()> {
        if let AprioriRule::ScaledSource { c, nu, rho } = *self {
            if !(c > 0.0 && nu > 0.0 && rho > 0.0) {
                return Err(Error::input(format!(
                    "a priori rule needs c, nu, rho > 0 (got {c}, {nu}, {rho})"
                )));
            }
        }
        Ok(())
    }
}

/// A priori `α`, clamped to `(0, 1]`.
pub fn apriori_alpha(rule: &AprioriRule, delta_est: f64, n: usize) -> Result<f64> {
    rule.validate()?;
    if !(delta_est > 0.0) {
        return Err(Error::input(format!("delta_est must be positive, got {delta_est}")));
    }
    let alpha = match *rule {
        AprioriRule::ScaledSource { c, nu, rho } => c * (delta_est / rho).powf(2.0 / (nu + 1.0)),
        AprioriRule::InvSqrtNAlpha => {
            if n == 0 {
                return Err(Error::input("n must be positive"));
            }
            1.0 / (n as f64).sqrt()
        }
    };
    Ok(alpha.clamp(f64::MIN_POSITIVE, 1.0))
}

/// Multiplicative constants of the error bounds; the theory only asserts
/// their existence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub apriori: f64,
    pub discrepancy: f64,
    pub classic: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            apriori: 1.0,
            discrepancy: 1.0,
            classic: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoreticalBounds {
    /// `C' δ_est^{ν/(ν+1)} ρ^{1/(ν+1)}`.
    pub apriori_rate: f64,
    /// `L ρ^{1/(ν+1)} max{δ_est^{ν/(ν+1)}, δ_true^{ν/(ν+1)} (δ_true/δ_est)^{1/(ν+1)}}`.
    pub dp_bound: f64,
    /// `C ρ^{1/(ν+1)} δ_true^{ν/(ν+1)}`.
    pub classic_bound: f64,
}

pub fn theoretical_bounds(
    nu: f64,
    rho: f64,
    delta_est: f64,
    delta_true: f64,
    constants: BoundConstants,
) -> Result<TheoreticalBounds> {
    if !(nu > 0.0 && rho > 0.0 && delta_est > 0.0 && delta_true > 0.0) {
        return Err(Error::input("bounds need positive nu, rho, delta_est, delta_true"));
    }
    let e = nu / (nu + 1.0);
    let r = rho.powf(1.0 / (nu + 1.0));
    let dp = delta_est
        .powf(e)
        .max(delta_true.powf(e) * (delta_true / delta_est).powf(1.0 / (nu + 1.0)));
    Ok(TheoreticalBounds {
        apriori_rate: constants.apriori * delta_est.powf(e) * r,
        dp_bound: constants.discrepancy * r * dp,
        classic_bound: constants.classic * r * delta_true.powf(e),
    })
}
