//! C ABI for the chasm streaming detector.
//!
//! Every entry point returns a [`ChasmStatus`]. On failure a message is kept
//! per thread and can be read with [`chasm_last_error_message`]. Detectors
//! are opaque handles created by [`chasm_detector_new`] and released with
//! [`chasm_detector_free`]; a handle must not be used from two threads at
//! once.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chasm_core::mewma::MomentEstimator;
use chasm_core::pipeline::{Detector, DetectorConfig};
use chasm_core::spectrum::{solve_assignment, CostMatrix};
use chasm_core::ChasmError;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChasmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    NotReady = 5,
    /// Eigen solver failure, ill-conditioned covariance or a negative statistic.
    Numerical = 6,
    Panic = 7,
}

impl From<&ChasmError> for ChasmStatus {
    fn from(e: &ChasmError) -> Self {
        match e {
            ChasmError::InvalidParameter { .. } | ChasmError::BatchTooShort { .. } => {
                ChasmStatus::InvalidParameter
            }
            ChasmError::DimensionMismatch { .. } => ChasmStatus::DimensionMismatch,
            ChasmError::NonFinite(_) => ChasmStatus::NonFinite,
            ChasmError::NotReady => ChasmStatus::NotReady,
            ChasmError::EigenFailure
            | ChasmError::IllConditioned { .. }
            | ChasmError::NegativeStatistic(_) => ChasmStatus::Numerical,
        }
    }
}

/// Detector parameters. Obtain defaults from [`chasm_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChasmConfig {
    /// Forgetting factor in (0, 1].
    pub rho: f64,
    pub rank: usize,
    /// MEWMA smoothing weight in (0, 1].
    pub alpha: f64,
    pub threshold: f64,
    pub grace: u64,
    pub burn_in: u64,
    pub lag: usize,
    /// Prior precision of the operator estimate; zero or negative selects the default.
    pub epsilon: f64,
    pub ridge: f64,
    /// Non-zero to restart after each alarm.
    pub restart: u8,
    /// Zero for cumulative moments, otherwise the weight of the newest
    /// velocity under exponential forgetting.
    pub moment_weight: f64,
}

impl From<&DetectorConfig> for ChasmConfig {
    fn from(c: &DetectorConfig) -> Self {
        ChasmConfig {
            rho: c.rho,
            rank: c.rank,
            alpha: c.alpha,
            threshold: c.threshold,
            grace: c.grace,
            burn_in: c.burn_in,
            lag: c.lag,
            epsilon: c.epsilon.unwrap_or(0.0),
            ridge: c.ridge,
            restart: c.restart as u8,
            moment_weight: match c.moments {
                MomentEstimator::Cumulative => 0.0,
                MomentEstimator::Exponential { weight } => weight,
            },
        }
    }
}

impl From<&ChasmConfig> for DetectorConfig {
    fn from(c: &ChasmConfig) -> Self {
        DetectorConfig {
            rho: c.rho,
            rank: c.rank,
            alpha: c.alpha,
            threshold: c.threshold,
            grace: c.grace,
            burn_in: c.burn_in,
            lag: c.lag,
            epsilon: (c.epsilon > 0.0).then_some(c.epsilon),
            ridge: c.ridge,
            restart: c.restart != 0,
            moments: if c.moment_weight == 0.0 {
                MomentEstimator::Cumulative
            } else {
                MomentEstimator::Exponential { weight: c.moment_weight }
            },
        }
    }
}

/// Output of one detector step.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChasmRecord {
    pub t: u64,
    /// Non-zero when `statistic` holds a value.
    pub has_statistic: u8,
    pub statistic: f64,
    pub alarm: u8,
    pub segment: u64,
}

/// Opaque detector handle.
pub struct ChasmDetector {
    inner: Detector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> Result<(), ChasmStatus>) -> ChasmStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChasmStatus::Ok,
        Ok(Err(s)) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            ChasmStatus::Panic
        }
    }
}

fn fail(e: ChasmError) -> ChasmStatus {
    let status = ChasmStatus::from(&e);
    set_error(e.to_string());
    status
}

fn null(what: &str) -> ChasmStatus {
    set_error(format!("`{what}` is null"));
    ChasmStatus::NullPointer
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn chasm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chasm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Write the default configuration into `out`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `ChasmConfig`.
#[no_mangle]
pub unsafe extern "C" fn chasm_config_default(out: *mut ChasmConfig) -> ChasmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: non-null and writable per the contract.
        unsafe { out.write(ChasmConfig::from(&DetectorConfig::default())) };
        Ok(())
    })
}

/// Create a detector for `dim`-dimensional observations.
///
/// # Safety
/// `config` must be null or point to a valid `ChasmConfig`; `out` must point
/// to writable storage for a handle pointer.
#[no_mangle]
pub unsafe extern "C" fn chasm_detector_new(
    dim: usize,
    config: *const ChasmConfig,
    out: *mut *mut ChasmDetector,
) -> ChasmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: writable per the contract.
        unsafe { out.write(ptr::null_mut()) };
        let cfg = if config.is_null() {
            DetectorConfig::default()
        } else {
            // SAFETY: non-null and valid per the contract.
            DetectorConfig::from(unsafe { &*config })
        };
        let inner = Detector::new(dim, cfg).map_err(fail)?;
        let handle = Box::into_raw(Box::new(ChasmDetector { inner }));
        // SAFETY: as above.
        unsafe { out.write(handle) };
        Ok(())
    })
}

/// Feed one observation of `len` values (must equal the detector's
/// dimension) and write the step's record into `out`.
///
/// # Safety
/// `detector` must come from [`chasm_detector_new`] and not be freed; `x`
/// must point to `len` readable doubles; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn chasm_detector_step(
    detector: *mut ChasmDetector,
    x: *const f64,
    len: usize,
    out: *mut ChasmRecord,
) -> ChasmStatus {
    guard(|| {
        if detector.is_null() {
            return Err(null("detector"));
        }
        if x.is_null() {
            return Err(null("x"));
        }
        // SAFETY: live handle and `len` readable doubles per the contract.
        let (det, obs) = unsafe { (&mut *detector, std::slice::from_raw_parts(x, len)) };
        let rec = det.inner.step(obs).map_err(fail)?;
        if !out.is_null() {
            let r = ChasmRecord {
                t: rec.t,
                has_statistic: rec.statistic.is_some() as u8,
                statistic: rec.statistic.unwrap_or(f64::NAN),
                alarm: rec.alarm as u8,
                segment: rec.segment,
            };
            // SAFETY: non-null and writable per the contract.
            unsafe { out.write(r) };
        }
        Ok(())
    })
}

/// Dimension the detector was created with; zero for a null handle.
///
/// # Safety
/// `detector` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chasm_detector_dim(detector: *const ChasmDetector) -> usize {
    // SAFETY: null or live per the contract.
    unsafe { detector.as_ref() }.map_or(0, |d| d.inner.dim())
}

/// Release a detector. Null is ignored.
///
/// # Safety
/// `detector` must be null or a handle from [`chasm_detector_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn chasm_detector_free(detector: *mut ChasmDetector) {
    if !detector.is_null() {
        // SAFETY: ownership returns to Rust exactly once per the contract.
        drop(unsafe { Box::from_raw(detector) });
    }
}

/// Solve the `n × n` linear assignment problem for a row-major `cost`
/// matrix. `assignment[i]` receives the column matched to row `i`; ties
/// resolve to the lexicographically smallest assignment.
///
/// # Safety
/// `cost` must point to `n * n` readable doubles and `assignment` to `n`
/// writable `size_t` values.
#[no_mangle]
pub unsafe extern "C" fn chasm_solve_assignment(
    cost: *const f64,
    n: usize,
    assignment: *mut usize,
    objective: *mut f64,
) -> ChasmStatus {
    guard(|| {
        if cost.is_null() {
            return Err(null("cost"));
        }
        if assignment.is_null() {
            return Err(null("assignment"));
        }
        let len = n.checked_mul(n).ok_or_else(|| {
            fail(ChasmError::InvalidParameter { name: "n", reason: "n * n overflows".into() })
        })?;
        // SAFETY: `n * n` readable doubles per the contract.
        let data = unsafe { std::slice::from_raw_parts(cost, len) }.to_vec();
        let matrix = CostMatrix::new(n, data).map_err(fail)?;
        let perm = solve_assignment(&matrix).map_err(fail)?;
        // SAFETY: `n` writable values per the contract.
        let out = unsafe { std::slice::from_raw_parts_mut(assignment, n) };
        out.copy_from_slice(perm.as_slice());
        if !objective.is_null() {
            // SAFETY: non-null, caller-provided.
            unsafe { objective.write(matrix.objective(&perm)) };
        }
        Ok(())
    })
}
