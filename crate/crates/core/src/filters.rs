//! Regularizing filters `F_α` and the induced regularizers
//! `R_α = F_α(K*K) K*`.
//!
//! Every filter here satisfies, for `α ∈ (0, 1]` and `λ ∈ (0, σ_1²]`:
//!
//! * `λ F_α(λ) ≤ C_R` and `|F_α(λ)| ≤ C_F / α`;
//! * `sup_λ λ^{ν/2} |1 − λ F_α(λ)| ≤ C_ν α^{ν/2}` for `ν` up to the
//!   qualification;
//! * `F_α(λ)` is non-increasing in `α`, so residuals are monotone in `α`.
//!
//! [`verify_filter_constants`] checks these on finite grids. Grid suprema
//! can only understate the true suprema.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{CoefficientVector, SpectralDecomposition};

/// Qualification used in grid checks for filters whose qualification is infinite.
pub const QUALIFICATION_CAP: f64 = 20.0;
/// Default Landweber step as a fraction of `1/σ_1²`.
pub const DEFAULT_LANDWEBER_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterKind {
    Tikhonov,
    IteratedTikhonov { order: u32 },
    Tsvd,
    /// `k(α) = ⌈1/α⌉` steps of size `relaxation`.
    Landweber { relaxation: f64 },
}

/// A filter family together with its declared constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub c_r: f64,
    pub c_f: f64,
    /// `None` for infinite qualification.
    pub qualification: Option<f64>,
}

impl FilterSpec {
    pub fn tikhonov() -> Self {
        Self {
            kind: FilterKind::Tikhonov,
            c_r: 1.0,
            c_f: 1.0,
            qualification: Some(2.0),
        }
    }

    pub fn iterated_tikhonov(order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::Configuration("iterated Tikhonov order must be >= 1".into()));
        }
        Ok(Self {
            kind: FilterKind::IteratedTikhonov { order },
            c_r: 1.0,
            c_f: order as f64,
            qualification: Some(2.0 * order as f64),
        })
    }

    pub fn tsvd() -> Self {
        Self {
            kind: FilterKind::Tsvd,
            c_r: 1.0,
            c_f: 1.0,
            qualification: None,
        }
    }

    pub fn landweber(relaxation: f64) -> Result<Self> {
        if !(relaxation > 0.0 && relaxation.is_finite()) {
            return Err(Error::Configuration(format!(
                "Landweber relaxation must be positive, got {relaxation}"
            )));
        }
        // α F_α ≤ a α ⌈1/α⌉ ≤ 2a on (0, 1].
        Ok(Self {
            kind: FilterKind::Landweber { relaxation },
            c_r: 1.0,
            c_f: 2.0 * relaxation.max(1.0),
            qualification: None,
        })
    }

    /// Landweber with the default step `0.9 / σ_1²`.
    pub fn landweber_for(sigma_max: f64) -> Result<Self> {
        Self::landweber(DEFAULT_LANDWEBER_FRACTION / (sigma_max * sigma_max))
    }

    /// Qualification with infinity replaced by [`QUALIFICATION_CAP`].
    pub fn effective_qualification(&self) -> f64 {
        self.qualification.unwrap_or(QUALIFICATION_CAP)
    }

    /// Declared `C_ν`, or `None` when `ν` exceeds the qualification.
    pub fn c_nu(&self, nu: f64) -> Option<f64> {
        if nu > self.effective_qualification() {
            return None;
        }
        match self.kind {
            FilterKind::Tikhonov | FilterKind::IteratedTikhonov { .. } | FilterKind::Tsvd => {
                Some(1.0)
            }
            // λ^{ν/2}(1−aλ)^k ≤ λ^{ν/2} e^{−akλ} ≤ (ν/(2eak))^{ν/2} and k ≥ 1/α.
            FilterKind::Landweber { relaxation } => {
                if nu == 0.0 {
                    Some(1.0)
                } else {
                    Some((nu / (2.0 * std::f64::consts::E * relaxation)).powf(nu / 2.0))
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            FilterKind::Tikhonov => "tikhonov".into(),
            FilterKind::IteratedTikhonov { order } => format!("iterated_tikhonov({order})"),
            FilterKind::Tsvd => "tsvd".into(),
            FilterKind::Landweber { relaxation } => format!("landweber(a={relaxation})"),
        }
    }

    /// Rejects a Landweber step that diverges on the spectrum of `op`.
    pub fn check_operator(&self, op: &SpectralDecomposition) -> Result<()> {
        if let FilterKind::Landweber { relaxation } = self.kind {
            let s = op.sigma_max();
            if relaxation * s * s > 1.0 {
                return Err(Error::Configuration(format!(
                    "Landweber relaxation {relaxation} exceeds 1/σ_1² = {}",
                    1.0 / (s * s)
                )));
            }
        }
        Ok(())
    }
}

/// Number of Landweber steps identified with parameter `α`.
pub fn landweber_steps(alpha: f64) -> f64 {
    (1.0 / alpha).ceil()
}

/// `F_α(λ)`.
pub fn filter_value(spec: &FilterSpec, alpha: f64, lambda: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::input(format!("alpha must be positive, got {alpha}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::input(format!("lambda must be positive, got {lambda}")));
    }
    if let FilterKind::Landweber { relaxation } = spec.kind {
        if relaxation * lambda > 1.0 {
            return Err(Error::Configuration(format!(
                "Landweber diverges: relaxation·λ = {} > 1",
                relaxation * lambda
            )));
        }
    }
    Ok(eval(spec.kind, alpha, lambda))
}

/// Unchecked evaluation; arguments are validated by the callers.
fn eval(kind: FilterKind, alpha: f64, lambda: f64) -> f64 {
    match kind {
        FilterKind::Tikhonov => 1.0 / (lambda + alpha),
        FilterKind::IteratedTikhonov { order } => {
            // 1 − (α/(α+λ))^p without cancellation for λ ≪ α.
            let log_t = (-lambda / (alpha + lambda)).ln_1p();
            -(order as f64 * log_t).exp_m1() / lambda
        }
        FilterKind::Tsvd => {
            if lambda >= alpha {
                1.0 / lambda
            } else {
                0.0
            }
        }
        FilterKind::Landweber { relaxation } => {
            let k = landweber_steps(alpha);
            let log_t = (-relaxation * lambda).ln_1p();
            -(k * log_t).exp_m1() / lambda
        }
    }
}

/// `1 − λ F_α(λ)`, evaluated without cancellation where possible.
fn residual_factor(kind: FilterKind, alpha: f64, lambda: f64) -> f64 {
    match kind {
        FilterKind::Tikhonov => alpha / (alpha + lambda),
        FilterKind::IteratedTikhonov { order } => {
            (order as f64 * (-lambda / (alpha + lambda)).ln_1p()).exp()
        }
        FilterKind::Tsvd => {
            if lambda >= alpha {
                0.0
            } else {
                1.0
            }
        }
        FilterKind::Landweber { relaxation } => {
            (landweber_steps(alpha) * (-relaxation * lambda).ln_1p()).exp()
        }
    }
}

/// Output of [`apply_regularizer`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedSolution {
    pub alpha: f64,
    pub x: CoefficientVector,
    /// `‖(K R_α − Id) y‖`.
    pub residual: f64,
    /// `‖R_α‖ = max_l σ_l F_α(σ_l²)`.
    pub operator_norm: f64,
}

fn check_args(
    op: &SpectralDecomposition,
    spec: &FilterSpec,
    alpha: f64,
    y: &CoefficientVector,
) -> Result<()> {
    if y.len() != op.rank() {
        return Err(Error::input(format!(
            "data has {} coefficients, operator rank is {}",
            y.len(),
            op.rank()
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::input(format!("alpha must be positive, got {alpha}")));
    }
    spec.check_operator(op)
}

/// `R_α y` together with its residual and the norm of `R_α`.
pub fn apply_regularizer(
    op: &SpectralDecomposition,
    spec: &FilterSpec,
    alpha: f64,
    y: &CoefficientVector,
) -> Result<RegularizedSolution> {
    check_args(op, spec, alpha, y)?;
    let mut x = Vec::with_capacity(op.rank());
    let mut residual_sq = y.orthogonal_norm * y.orthogonal_norm;
    let mut operator_norm: f64 = 0.0;
    for (s, yl) in op.singular_values().iter().zip(&y.coefficients) {
        let lambda = s * s;
        let f = eval(spec.kind, alpha, lambda);
        x.push(f * s * yl);
        let r = residual_factor(spec.kind, alpha, lambda) * yl;
        residual_sq += r * r;
        operator_norm = operator_norm.max(s * f);
    }
    Ok(RegularizedSolution {
        alpha,
        x: CoefficientVector::new(x),
        residual: residual_sq.sqrt(),
        operator_norm,
    })
}

/// `‖(K R_α − Id) y‖` without forming `R_α y`.
pub fn residual_norm(
    op: &SpectralDecomposition,
    spec: &FilterSpec,
    alpha: f64,
    y: &CoefficientVector,
) -> Result<f64> {
    check_args(op, spec, alpha, y)?;
    let mut residual_sq = y.orthogonal_norm * y.orthogonal_norm;
    for (s, yl) in op.singular_values().iter().zip(&y.coefficients) {
        let r = residual_factor(spec.kind, alpha, s * s) * yl;
        residual_sq += r * r;
    }
    Ok(residual_sq.sqrt())
}

/// `‖R_α‖ = max_l σ_l F_α(σ_l²)`.
pub fn regularizer_norm(op: &SpectralDecomposition, spec: &FilterSpec, alpha: f64) -> Result<f64> {
    check_args(op, spec, alpha, &CoefficientVector::zeros(op.rank()))?;
    Ok(op
        .singular_values()
        .iter()
        .map(|s| s * eval(spec.kind, alpha, s * s))
        .fold(0.0, f64::max))
}

/// Grids for [`verify_filter_constants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationGrid {
    pub lambda_points: usize,
    pub alpha_points: usize,
    /// λ ranges over `(lambda_floor·σ_max², σ_max²]`.
    pub lambda_floor: f64,
    /// α ranges over `(alpha_floor, 1]`.
    pub alpha_floor: f64,
}

impl Default for VerificationGrid {
    fn default() -> Self {
        Self {
            lambda_points: 400,
            alpha_points: 100,
            lambda_floor: 1e-12,
            alpha_floor: 1e-8,
        }
    }
}

/// Log-spaced points in `(lo, hi]`, ending exactly at `hi`.
fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (1..=points)
        .map(|i| {
            if i == points {
                hi
            } else {
                (a + (b - a) * i as f64 / points as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterReport {
    pub filter: String,
    pub nu: f64,
    pub c_r_observed: f64,
    pub c_f_observed: f64,
    pub c_nu_observed: f64,
    pub monotone: bool,
    /// Largest `|λ F_α(λ) − 1|` at the smallest grid α over λ ≥ 1e-4·σ_max².
    pub pointwise_gap: f64,
    /// Log-log slope of `sup_λ λ^{ν/2}|1−λF_α|/α^{ν/2}` against α over the
    /// smallest decade of α; clearly negative means growth as α → 0.
    pub c_nu_trend: f64,
    pub within_qualification: bool,
    pub violations: Vec<String>,
}

impl FilterReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const REL_TOL: f64 = 1e-9;

fn exceeds(observed: f64, declared: f64) -> bool {
    observed > declared * (1.0 + REL_TOL)
}

/// Grid certification of the declared filter constants.
pub fn verify_filter_constants(
    spec: &FilterSpec,
    sigma_max: f64,
    nu: f64,
    grid: &VerificationGrid,
) -> FilterReport {
    let lam_max = sigma_max * sigma_max;
    let lambdas = log_grid(grid.lambda_floor * lam_max, lam_max, grid.lambda_points);
    let alphas = log_grid(grid.alpha_floor, 1.0, grid.alpha_points);
    let mut violations = Vec::new();

    if let FilterKind::Landweber { relaxation } = spec.kind {
        if relaxation * lam_max > 1.0 {
            violations.push(format!("relaxation {relaxation} diverges at λ = σ_max²"));
            return FilterReport {
                filter: spec.label(),
                nu,
                c_r_observed: f64::INFINITY,
                c_f_observed: f64::INFINITY,
                c_nu_observed: f64::INFINITY,
                monotone: false,
                pointwise_gap: f64::INFINITY,
                c_nu_trend: 0.0,
                within_qualification: false,
                violations,
            };
        }
    }

    let mut c_r: f64 = 0.0;
    let mut c_f: f64 = 0.0;
    let mut sup_per_alpha = Vec::with_capacity(alphas.len());
    let mut bounded_by_inverse = true;
    let mut previous: Option<Vec<f64>> = None;
    let mut monotone = true;

    // α descending so that F must grow (weakly) from one row to the next.
    for &alpha in alphas.iter().rev() {
        let mut row = Vec::with_capacity(lambdas.len());
        let mut sup_nu: f64 = 0.0;
        for &lambda in &lambdas {
            let f = eval(spec.kind, alpha, lambda);
            row.push(f);
            c_r = c_r.max(lambda * f);
            c_f = c_f.max(alpha * f.abs());
            if f < 0.0 || lambda * f > 1.0 + REL_TOL {
                bounded_by_inverse = false;
            }
            let defect = residual_factor(spec.kind, alpha, lambda).abs();
            sup_nu = sup_nu.max(lambda.powf(nu / 2.0) * defect / alpha.powf(nu / 2.0));
        }
        if let Some(prev) = &previous {
            if row.iter().zip(prev).any(|(f, g)| *f < g * (1.0 - REL_TOL)) {
                monotone = false;
            }
        }
        previous = Some(row);
        sup_per_alpha.push((alpha, sup_nu));
    }
    sup_per_alpha.reverse();
    let c_nu_observed = sup_per_alpha.iter().map(|p| p.1).fold(0.0, f64::max);

    let smallest = alphas[0];
    let pointwise_gap = lambdas
        .iter()
        .filter(|&&l| l >= 1e-4 * lam_max)
        .map(|&l| (l * eval(spec.kind, smallest, l) - 1.0).abs())
        .fold(0.0, f64::max);

    // Slope over the smallest decade of α.
    let decade: Vec<(f64, f64)> = sup_per_alpha
        .iter()
        .filter(|p| p.0 <= 10.0 * smallest && p.1 > 0.0)
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    let c_nu_trend = if decade.len() >= 2 {
        let (x0, y0) = decade[0];
        let (x1, y1) = decade[decade.len() - 1];
        (y1 - y0) / (x1 - x0)
    } else {
        0.0
    };

    if exceeds(c_r, spec.c_r) {
        violations.push(format!("C_R observed {c_r} > declared {}", spec.c_r));
    }
    if exceeds(c_f, spec.c_f) {
        violations.push(format!("C_F observed {c_f} > declared {}", spec.c_f));
    }
    if !monotone {
        violations.push("F_α(λ) not non-increasing in α".into());
    }
    if !bounded_by_inverse {
        violations.push("0 ≤ F_α(λ) ≤ 1/λ violated".into());
    }
    if pointwise_gap > 1e-3 {
        violations.push(format!("F_α(λ) far from 1/λ at smallest α (gap {pointwise_gap})"));
    }
    let within_qualification = match spec.c_nu(nu) {
        Some(declared) => {
            if exceeds(c_nu_observed, declared) {
                violations.push(format!("C_ν observed {c_nu_observed} > declared {declared}"));
            }
            true
        }
        None => {
            violations.push(format!(
                "ν = {nu} beyond qualification {}; C_ν trend slope {c_nu_trend:.3} (unbounded as α → 0)",
                spec.effective_qualification()
            ));
            false
        }
    };

    FilterReport {
        filter: spec.label(),
        nu,
        c_r_observed: c_r,
        c_f_observed: c_f,
        c_nu_observed,
        monotone,
        pointwise_gap,
        c_nu_trend,
        within_qualification,
        violations,
    }
}

/// The four filter families with default constants, for `σ_max`.
pub fn default_filters(sigma_max: f64) -> Vec<FilterSpec> {
    vec![
        FilterSpec::tikhonov(),
        FilterSpec::iterated_tikhonov(2).expect("order 2 is valid"),
        FilterSpec::tsvd(),
        FilterSpec::landweber_for(sigma_max).expect("positive sigma_max"),
    ]
}
