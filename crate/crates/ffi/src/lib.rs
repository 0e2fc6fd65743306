//! C ABI for `avgreg`.
//!
//! Every fallible function returns an [`AvgregStatus`]; on failure the
//! message is available from [`avgreg_last_error`] on the same thread.
//! Operators are opaque handles created by `avgreg_operator_*` and released
//! with [`avgreg_operator_free`]. Matrices and sample sets are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use avgreg::filters::{apply_regularizer, filter_value, residual_norm, FilterSpec};
use avgreg::measurements::{delta_est, BatchStats, DeltaRule};
use avgreg::selection::{apriori_alpha, discrepancy_principle, AprioriRule, DEFAULT_K_MAX};
use avgreg::spectral::{svd, SpectralDecomposition};
use avgreg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvgregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    Configuration = 4,
    DegenerateBatch = 5,
    NonTermination = 6,
    Parse = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvgregFilterKind {
    Tikhonov = 0,
    IteratedTikhonov = 1,
    Tsvd = 2,
    Landweber = 3,
}

/// `order` is read for iterated Tikhonov. `relaxation` is the Landweber
/// step; a value ≤ 0 selects `0.9/σ_1²` where an operator is available.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvgregFilter {
    pub kind: AvgregFilterKind,
    pub order: u32,
    pub relaxation: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvgregDeltaRule {
    InvSqrtN = 0,
    SampleStd = 1,
    /// Uses the `tau` argument.
    Lil = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvgregRule {
    Discrepancy = 0,
    DiscrepancyEmergency = 1,
    /// `α = 1/√n`.
    AprioriInvSqrtN = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvgregChoice {
    pub alpha: f64,
    pub k: usize,
    pub residual: f64,
    pub emergency_triggered: bool,
    pub delta_est: f64,
    pub iterations_evaluated: usize,
}

/// Opaque singular system.
pub struct AvgregOperator {
    inner: SpectralDecomposition,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> AvgregStatus {
    match err {
        Error::Input(_) => AvgregStatus::InvalidInput,
        Error::Numerical(_) => AvgregStatus::Numerical,
        Error::Configuration(_) => AvgregStatus::Configuration,
        Error::DegenerateBatch(_) | Error::StudyFailed { .. } => AvgregStatus::DegenerateBatch,
        Error::NonTermination { .. } => AvgregStatus::NonTermination,
        Error::Parse(_) => AvgregStatus::Parse,
        Error::Io(_) => AvgregStatus::Io,
    }
}

/// Failure raised inside the wrapper before reaching the library.
struct Fail(AvgregStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AvgregStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AvgregStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside avgreg".into());
            AvgregStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(AvgregStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `data` must be null or point to `len` readable doubles.
unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// # Safety
/// `data` must point to `rows·cols` readable doubles.
unsafe fn rows_of(data: *const f64, rows: usize, cols: usize, what: &str) -> Result<Vec<Vec<f64>>, Fail> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Fail(AvgregStatus::InvalidInput, format!("{what}: size overflows")))?;
    let flat = slice(data, len, what)?;
    Ok(flat.chunks(cols.max(1)).take(rows).map(<[f64]>::to_vec).collect())
}

fn spec_of(filter: &AvgregFilter, sigma_max: Option<f64>) -> Result<FilterSpec, Fail> {
    Ok(match filter.kind {
        AvgregFilterKind::Tikhonov => FilterSpec::tikhonov(),
        AvgregFilterKind::IteratedTikhonov => FilterSpec::iterated_tikhonov(filter.order)?,
        AvgregFilterKind::Tsvd => FilterSpec::tsvd(),
        AvgregFilterKind::Landweber => {
            if filter.relaxation > 0.0 {
                FilterSpec::landweber(filter.relaxation)?
            } else if let Some(s) = sigma_max {
                FilterSpec::landweber_for(s)?
            } else {
                return Err(Fail(
                    AvgregStatus::Configuration,
                    "Landweber needs a positive relaxation without an operator".into(),
                ));
            }
        }
    })
}

fn delta_rule_of(rule: AvgregDeltaRule, tau: f64) -> DeltaRule {
    match rule {
        AvgregDeltaRule::InvSqrtN => DeltaRule::InvSqrtN,
        AvgregDeltaRule::SampleStd => DeltaRule::SampleStd,
        AvgregDeltaRule::Lil => DeltaRule::Lil { tau },
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn avgreg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Singular system of a dense `rows × cols` matrix.
///
/// # Safety
/// `data` must point to `rows·cols` readable doubles and `out` must be a
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn avgreg_operator_from_matrix(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut AvgregOperator,
) -> AvgregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let matrix = rows_of(data, rows, cols, "data")?;
        let inner = svd(&matrix)?;
        *out = Box::into_raw(Box::new(AvgregOperator { inner }));
        Ok(())
    })
}

/// Diagonal operator with positive, non-increasing singular values.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` must be a
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn avgreg_operator_diagonal(
    values: *const f64,
    len: usize,
    out: *mut *mut AvgregOperator,
) -> AvgregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sv = slice(values, len, "values")?.to_vec();
        let inner = SpectralDecomposition::diagonal(sv)?;
        *out = Box::into_raw(Box::new(AvgregOperator { inner }));
        Ok(())
    })
}

/// Releases an operator; null is ignored.
///
/// # Safety
/// `op` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn avgreg_operator_free(op: *mut AvgregOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Number of retained singular values, or 0 for null.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn avgreg_operator_rank(op: *const AvgregOperator) -> usize {
    op.as_ref().map_or(0, |o| o.inner.rank())
}

/// Row and column dimensions of the operator's matrix.
///
/// # Safety
/// `op` must be a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn avgreg_operator_shape(
    op: *const AvgregOperator,
    rows: *mut usize,
    cols: *mut usize,
) -> AvgregStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        if rows.is_null() || cols.is_null() {
            return Err(null("rows/cols"));
        }
        *rows = op.inner.data_dim();
        *cols = op.inner.solution_dim();
        Ok(())
    })
}

/// Copies the singular values into `out`, which must hold `rank` doubles.
///
/// # Safety
/// `op` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn avgreg_operator_singular_values(
    op: *const AvgregOperator,
    out: *mut f64,
    len: usize,
) -> AvgregStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        let sv = op.inner.singular_values();
        if len < sv.len() {
            return Err(Fail(
                AvgregStatus::BufferTooSmall,
                format!("buffer holds {len} values, rank is {}", sv.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(sv.as_ptr(), out, sv.len());
        Ok(())
    })
}

/// `F_α(λ)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn avgreg_filter_value(
    filter: AvgregFilter,
    alpha: f64,
    lambda: f64,
    out: *mut f64,
) -> AvgregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = spec_of(&filter, None)?;
        *out = filter_value(&spec, alpha, lambda)?;
        Ok(())
    })
}

/// Noise-level estimate of `n` samples of length `dim`.
///
/// # Safety
/// `samples` must point to `n·dim` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn avgreg_delta_est(
    samples: *const f64,
    n: usize,
    dim: usize,
    rule: AvgregDeltaRule,
    tau: f64,
    out: *mut f64,
) -> AvgregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let rows = rows_of(samples, n, dim, "samples")?;
        let stats = BatchStats::from_rows(&rows)?;
        *out = delta_est(&stats, delta_rule_of(rule, tau))?;
        Ok(())
    })
}

/// Averages `n` measurements of length `rows(op)`, estimates the noise
/// level, chooses `α` and writes the regularized solution (length
/// `cols(op)`) to `x_out`. `q` is the discrepancy grid factor.
///
/// # Safety
/// `op` must be a live handle, `samples` must point to `n·dim` readable
/// doubles, `x_out` to `x_len` writable doubles, and `choice_out` must be
/// null or writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn avgreg_solve(
    op: *const AvgregOperator,
    samples: *const f64,
    n: usize,
    dim: usize,
    filter: AvgregFilter,
    rule: AvgregRule,
    delta_rule: AvgregDeltaRule,
    tau: f64,
    q: f64,
    x_out: *mut f64,
    x_len: usize,
    choice_out: *mut AvgregChoice,
) -> AvgregStatus {
    guard(|| {
        let op = &op.as_ref().ok_or_else(|| null("op"))?.inner;
        if dim != op.data_dim() {
            return Err(Fail(
                AvgregStatus::InvalidInput,
                format!("samples have {dim} entries, the operator has {} rows", op.data_dim()),
            ));
        }
        if x_len < op.solution_dim() {
            return Err(Fail(
                AvgregStatus::BufferTooSmall,
                format!("x buffer holds {x_len} values, need {}", op.solution_dim()),
            ));
        }
        if x_out.is_null() {
            return Err(null("x_out"));
        }
        let spec = spec_of(&filter, Some(op.sigma_max()))?;
        spec.check_operator(op)?;
        let rows = rows_of(samples, n, dim, "samples")?;
        let stats = BatchStats::from_rows(&rows)?;
        let delta = delta_est(&stats, delta_rule_of(delta_rule, tau))?;
        let y_bar = op.project_data(&stats.mean.coefficients)?;
        let choice = match rule {
            AvgregRule::Discrepancy | AvgregRule::DiscrepancyEmergency => {
                let emergency = (rule == AvgregRule::DiscrepancyEmergency).then_some(stats.n);
                let c = discrepancy_principle(op, &spec, &y_bar, delta, q, emergency, DEFAULT_K_MAX)?;
                AvgregChoice {
                    alpha: c.alpha,
                    k: c.k,
                    residual: c.residual_at_stop,
                    emergency_triggered: c.emergency_triggered,
                    delta_est: c.delta_est_used,
                    iterations_evaluated: c.iterations_evaluated,
                }
            }
            AvgregRule::AprioriInvSqrtN => {
                let alpha = apriori_alpha(&AprioriRule::InvSqrtNAlpha, delta, stats.n)?;
                AvgregChoice {
                    alpha,
                    k: 0,
                    residual: residual_norm(op, &spec, alpha, &y_bar)?,
                    emergency_triggered: false,
                    delta_est: delta,
                    iterations_evaluated: 1,
                }
            }
        };
        let solution = apply_regularizer(op, &spec, choice.alpha, &y_bar)?;
        let x = op.solution_vector(&solution.x)?;
        ptr::copy_nonoverlapping(x.as_ptr(), x_out, x.len());
        if !choice_out.is_null() {
            *choice_out = choice;
        }
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn avgreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping_is_total() {
        assert_eq!(status_of(&Error::Parse("x".into())), AvgregStatus::Parse);
        assert_eq!(
            status_of(&Error::NonTermination {
                k_max: 1,
                residual: 1.0,
                delta: 0.5
            }),
            AvgregStatus::NonTermination
        );
    }

    #[test]
    fn landweber_without_operator_needs_a_step() {
        let f = AvgregFilter {
            kind: AvgregFilterKind::Landweber,
            order: 0,
            relaxation: 0.0,
        };
        assert!(spec_of(&f, None).is_err());
        assert!(spec_of(&f, Some(2.0)).is_ok());
    }
}
