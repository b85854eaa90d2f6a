//! C interface to `screenstat`.
//!
//! Every fallible function returns a [`ScreenstatStatus`]; on failure the
//! message is available from [`screenstat_last_error`] on the same thread.
//! Matrices are opaque handles released with [`screenstat_matrix_free`].
//! Strings returned by the library are released with [`screenstat_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use screenstat::io::{parse_matrix_str, to_stable_json};
use screenstat::{
    accuracy_estimate, adjust_control_counts, case_shares, collapse_cases, control_rates, marginal_estimate,
    midp_interval, run_study, truncated_moments, AdjustPolicy, CountMatrix, EstimateInterval, Error, IncidenceSpec,
    Method, PredictiveContext, PredictiveMetric, ScenarioSpec, DEFAULT_ADJUST_THRESHOLD,
};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScreenstatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Validation = 4,
    Io = 5,
    Panic = 6,
}

/// Half-count policy for the control row.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScreenstatAdjust {
    Auto = 0,
    On = 1,
    Off = 2,
}

impl From<ScreenstatAdjust> for AdjustPolicy {
    fn from(a: ScreenstatAdjust) -> Self {
        match a {
            ScreenstatAdjust::Auto => AdjustPolicy::Auto,
            ScreenstatAdjust::On => AdjustPolicy::On,
            ScreenstatAdjust::Off => AdjustPolicy::Off,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScreenstatMetric {
    Pvp = 0,
    Pvn = 1,
}

/// A point estimate with its interval. `degenerate` is 1 when the interval
/// came from a fallback construction.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenstatInterval {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub degenerate: u8,
}

impl From<&EstimateInterval> for ScreenstatInterval {
    fn from(e: &EstimateInterval) -> Self {
        ScreenstatInterval {
            point: e.point,
            lower: e.lower,
            upper: e.upper,
            degenerate: u8::from(e.method == Method::Degenerate),
        }
    }
}

/// Opaque count table.
pub struct ScreenstatMatrix {
    inner: CountMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(ScreenstatStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() {
            ScreenstatStatus::Validation
        } else {
            ScreenstatStatus::Io
        };
        Failure(status, e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ScreenstatStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ScreenstatStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ScreenstatStatus::Panic
        }
    }
}

fn null() -> Failure {
    Failure(ScreenstatStatus::NullPointer, "null pointer argument".into())
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(ScreenstatStatus::InvalidArgument, message.into())
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ScreenstatStatus::InvalidUtf8, "string is not UTF-8".into()))
}

unsafe fn matrix<'a>(m: *const ScreenstatMatrix) -> Result<&'a CountMatrix, Failure> {
    m.as_ref().map(|m| &m.inner).ok_or_else(null)
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn screenstat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a matrix from `rows * cols` row-major counts and label arrays of
/// length `rows` and `cols`.
///
/// # Safety
/// All pointers must be valid for the stated lengths; labels must be
/// NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn screenstat_matrix_new(
    counts: *const i64,
    rows: usize,
    cols: usize,
    state_labels: *const *const c_char,
    readout_labels: *const *const c_char,
    out: *mut *mut ScreenstatMatrix,
) -> ScreenstatStatus {
    guard(|| {
        if counts.is_null() || state_labels.is_null() || readout_labels.is_null() || out.is_null() {
            return Err(null());
        }
        let cells = std::slice::from_raw_parts(counts, rows.checked_mul(cols).ok_or_else(|| invalid("size overflow"))?);
        let grid: Vec<Vec<i64>> = cells.chunks(cols.max(1)).map(<[i64]>::to_vec).collect();
        let states = std::slice::from_raw_parts(state_labels, rows)
            .iter()
            .map(|p| text(*p))
            .collect::<Result<Vec<_>, _>>()?;
        let readouts = std::slice::from_raw_parts(readout_labels, cols)
            .iter()
            .map(|p| text(*p))
            .collect::<Result<Vec<_>, _>>()?;
        let inner = CountMatrix::new(&grid, &states, &readouts)?;
        write(out, Box::into_raw(Box::new(ScreenstatMatrix { inner })))
    })
}

/// Parses a matrix from CSV text (`state,<readouts...>` header, control row first).
///
/// # Safety
/// `csv` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn screenstat_matrix_from_csv(csv: *const c_char, out: *mut *mut ScreenstatMatrix) -> ScreenstatStatus {
    guard(|| {
        let inner = parse_matrix_str(text(csv)?)?;
        write(out, Box::into_raw(Box::new(ScreenstatMatrix { inner })))
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn screenstat_matrix_free(m: *mut ScreenstatMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of disease states `J`, or 0 for null.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn screenstat_matrix_num_states(m: *const ScreenstatMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.num_states())
}

/// Number of positive readouts `K`, or 0 for null.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn screenstat_matrix_num_readouts(m: *const ScreenstatMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.num_readouts())
}

/// `P(T_k | D_j)` with sample case shares.
///
/// # Safety
/// `m` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn screenstat_accuracy(
    m: *const ScreenstatMatrix,
    state: usize,
    readout: usize,
    alpha: f64,
    out: *mut ScreenstatInterval,
) -> ScreenstatStatus {
    guard(|| {
        let m = matrix(m)?;
        let shares = case_shares(m)?;
        let est = accuracy_estimate(m, state, readout, &shares, alpha)?;
        write(out, (&est.interval).into())
    })
}

/// `P(T_k | D_0)`; readout 0 gives the specificity.
///
/// # Safety
/// `m` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn screenstat_control_rate(
    m: *const ScreenstatMatrix,
    adjust: ScreenstatAdjust,
    readout: usize,
    alpha: f64,
    out: *mut ScreenstatInterval,
) -> ScreenstatStatus {
    guard(|| {
        let m = matrix(m)?;
        if readout > m.num_readouts() {
            return Err(invalid("readout out of range"));
        }
        let adjusted = adjust_control_counts(m, adjust.into(), DEFAULT_ADJUST_THRESHOLD);
        let rates = control_rates(m, &adjusted, alpha)?;
        write(out, (&rates.false_positive[readout]).into())
    })
}

/// PVP or PVN of readout `k` with sample case shares.
///
/// # Safety
/// `m` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn screenstat_predictive(
    m: *const ScreenstatMatrix,
    adjust: ScreenstatAdjust,
    overall_incidence: f64,
    metric: ScreenstatMetric,
    readout: usize,
    alpha: f64,
    out: *mut ScreenstatInterval,
) -> ScreenstatStatus {
    guard(|| {
        let m = matrix(m)?;
        let adjusted = adjust_control_counts(m, adjust.into(), DEFAULT_ADJUST_THRESHOLD);
        let incidence = IncidenceSpec::sample(overall_incidence)?;
        let metric = match metric {
            ScreenstatMetric::Pvp => PredictiveMetric::Pvp,
            ScreenstatMetric::Pvn => PredictiveMetric::Pvn,
        };
        let est = PredictiveContext::new(m, &adjusted, &incidence)?.estimate(readout, metric, alpha)?;
        write(out, (&est.interval).into())
    })
}

/// Marginal readout probability `P(T_k)`.
///
/// # Safety
/// `m` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn screenstat_marginal(
    m: *const ScreenstatMatrix,
    adjust: ScreenstatAdjust,
    overall_incidence: f64,
    readout: usize,
    alpha: f64,
    out: *mut ScreenstatInterval,
) -> ScreenstatStatus {
    guard(|| {
        let m = matrix(m)?;
        let adjusted = adjust_control_counts(m, adjust.into(), DEFAULT_ADJUST_THRESHOLD);
        let est = marginal_estimate(&collapse_cases(m), &adjusted, overall_incidence, readout, alpha)?;
        write(out, (&est).into())
    })
}

/// Mid-P interval for `successes` out of `trials`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn screenstat_midp_interval(
    successes: u64,
    trials: u64,
    alpha: f64,
    out: *mut ScreenstatInterval,
) -> ScreenstatStatus {
    guard(|| {
        let est = midp_interval(successes, trials, alpha)?;
        write(out, (&est).into())
    })
}

/// `P(n > 0)` and `E(1/n | n > 0)` for `n ~ Binomial(trials, p)`.
///
/// # Safety
/// Both out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn screenstat_truncated_moments(
    trials: u64,
    p: f64,
    prob_positive: *mut f64,
    mean_inverse: *mut f64,
) -> ScreenstatStatus {
    guard(|| {
        let m = truncated_moments(trials, p)?;
        write(prob_positive, m.prob_positive)?;
        write(mean_inverse, m.mean_inverse_given_positive)
    })
}

/// Runs a scenario given as JSON and returns the study report as JSON.
///
/// # Safety
/// `scenario_json` must be NUL-terminated; `out` must be valid. Release the
/// result with [`screenstat_string_free`].
#[no_mangle]
pub unsafe extern "C" fn screenstat_simulate_json(scenario_json: *const c_char, out: *mut *mut c_char) -> ScreenstatStatus {
    guard(|| {
        let spec = ScenarioSpec::from_json(text(scenario_json)?)?;
        let report = run_study(&spec)?;
        let json = to_stable_json(&report)?;
        let c = CString::new(json).map_err(|_| invalid("report contains NUL"))?;
        write(out, c.into_raw())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn screenstat_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midp_through_abi() {
        let mut out = ScreenstatInterval {
            point: 0.0,
            lower: 0.0,
            upper: 0.0,
            degenerate: 0,
        };
        let status = unsafe { screenstat_midp_interval(0, 10, 0.05, &mut out) };
        assert_eq!(status, ScreenstatStatus::Ok);
        assert_eq!(out.lower, 0.0);
    }

    #[test]
    fn null_out_is_reported() {
        let status = unsafe { screenstat_midp_interval(1, 10, 0.05, ptr::null_mut()) };
        assert_eq!(status, ScreenstatStatus::NullPointer);
        assert!(!screenstat_last_error().is_null());
    }
}
