//! C ABI over `gauge_arb`.
//!
//! Every function returns a [`GaStatus`]; on failure the message and the
//! module-qualified error code are kept per thread and read back with
//! [`ga_last_error_message`] / [`ga_last_error_code`]. Handles are opaque and
//! owned by the caller until passed to the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gauge_arb::arbitrage::zc_range_test;
use gauge_arb::laplacian::{analyze_scenario, is_complete, CompletenessVerdict, EigenOptions, NflvrVerdict, SpectrumConfig};
use gauge_arb::market_model::{portfolio_deflator, portfolio_short_rate, MarketScenario};
use gauge_arb::scenario_io::ScenarioDoc;
use gauge_arb::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigInvalid = 3,
    InvalidInput = 4,
    Numerical = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaVerdict {
    ArbitrageFree = 0,
    Arbitrage = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaCompleteness {
    Complete = 0,
    Incomplete = 1,
    /// Empty kernel.
    NoKernel = 2,
}

/// Outcome of the zero-curvature range test.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaZcResult {
    pub residual: f64,
    pub tolerance: f64,
    pub rank: usize,
    pub is_zc: bool,
}

/// Deterministic market scenario.
pub struct GaScenario {
    inner: MarketScenario,
}

/// Low spectrum of one scenario's connection Laplacian.
pub struct GaSpectrum {
    eigenvalues: Vec<f64>,
    epsilon_kernel: f64,
    verdict: GaVerdict,
    kernel_dim: usize,
    completeness: GaCompleteness,
}

struct LastError {
    message: CString,
    code: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn set_error(code: &str, message: String) {
    let clean = |s: String| CString::new(s.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = Some(LastError {
            message: clean(message),
            code: clean(code.to_string()),
        })
    });
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> GaStatus {
    match e {
        Error::ConfigInvalid(_) | Error::Io { .. } => GaStatus::ConfigInvalid,
        Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::GridMismatch(_) => GaStatus::InvalidInput,
        _ => GaStatus::Numerical,
    }
}

struct Fail(GaStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        set_error(e.code(), e.to_string());
        Fail(status_of(&e))
    }
}

fn null(what: &str) -> Fail {
    set_error("ffi.null_pointer", format!("{what} is null"));
    Fail(GaStatus::NullPointer)
}

// Runs `body`, maps errors and panics to a status.
fn guard<F: FnOnce() -> Result<(), Fail>>(body: F) -> GaStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => GaStatus::Ok,
        Ok(Err(Fail(s))) => s,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error("ffi.panic", msg);
            GaStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn scenario<'a>(s: *const GaScenario) -> Result<&'a MarketScenario, Fail> {
    s.as_ref().map(|s| &s.inner).ok_or_else(|| null("scenario"))
}

unsafe fn spectrum<'a>(s: *const GaSpectrum) -> Result<&'a GaSpectrum, Fail> {
    s.as_ref().ok_or_else(|| null("spectrum"))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ga_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the next
/// call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ga_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.message.as_ptr()))
}

/// Module-qualified code of the last failure on this thread, or null.
#[no_mangle]
pub extern "C" fn ga_last_error_code() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.code.as_ptr()))
}

/// Parses a scenario JSON document with explicit gauges.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_scenario_from_json(json: *const c_char, out: *mut *mut GaScenario) -> GaStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            set_error("ffi.invalid_utf8", e.to_string());
            Fail(GaStatus::InvalidUtf8)
        })?;
        let inner = ScenarioDoc::from_json(text)?.market_scenario()?;
        out.write(Box::into_raw(Box::new(GaScenario { inner })));
        Ok(())
    })
}

/// Releases a scenario; null is ignored.
///
/// # Safety
/// `s` must come from [`ga_scenario_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ga_scenario_free(s: *mut GaScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_scenario_asset_count(s: *const GaScenario, out: *mut usize) -> GaStatus {
    guard(|| write(out, scenario(s)?.asset_count(), "out"))
}

/// # Safety
/// `s` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_scenario_time_count(s: *const GaScenario, out: *mut usize) -> GaStatus {
    guard(|| write(out, scenario(s)?.time_grid().len(), "out"))
}

unsafe fn portfolio_value(
    s: *const GaScenario,
    x: *const f64,
    n: usize,
    t: usize,
    out: *mut f64,
    f: fn(&MarketScenario, &[f64], usize) -> gauge_arb::Result<f64>,
) -> GaStatus {
    guard(|| {
        let sc = scenario(s)?;
        let x = slice(x, n, "x")?;
        if t >= sc.time_grid().len() {
            set_error(
                "ffi.out_of_range",
                format!("time index {t} outside a grid of {} nodes", sc.time_grid().len()),
            );
            return Err(Fail(GaStatus::OutOfRange));
        }
        write(out, f(sc, x, t)?, "out")
    })
}

/// Portfolio deflator `D^x` at time index `t`.
///
/// # Safety
/// `x` must point to `n` doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn ga_scenario_deflator(
    s: *const GaScenario,
    x: *const f64,
    n: usize,
    t: usize,
    out: *mut f64,
) -> GaStatus {
    portfolio_value(s, x, n, t, out, portfolio_deflator)
}

/// Portfolio short rate `r^x` at time index `t`.
///
/// # Safety
/// `x` must point to `n` doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn ga_scenario_short_rate(
    s: *const GaScenario,
    x: *const f64,
    n: usize,
    t: usize,
    out: *mut f64,
) -> GaStatus {
    portfolio_value(s, x, n, t, out, portfolio_short_rate)
}

/// Range test `alpha - correction / 2 + r in range(sigma)` for `n` assets and
/// `k` Brownian drivers; `sigma` is row-major `n x k`, `correction` may be null.
///
/// # Safety
/// Array pointers must hold the stated lengths, `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ga_zc_test(
    alpha: *const f64,
    sigma: *const f64,
    r: *const f64,
    correction: *const f64,
    n: usize,
    k: usize,
    out: *mut GaZcResult,
) -> GaStatus {
    guard(|| {
        let alpha = slice(alpha, n, "alpha")?;
        let sigma = slice(sigma, n * k, "sigma")?;
        let r = slice(r, n, "r")?;
        let zeros = vec![0.0; n];
        let c = if correction.is_null() {
            &zeros[..]
        } else {
            slice(correction, n, "correction")?
        };
        let rep = zc_range_test(alpha, sigma, r, c)?;
        write(
            out,
            GaZcResult {
                residual: rep.residual,
                tolerance: rep.tolerance,
                rank: rep.rank,
                is_zc: rep.verdict == gauge_arb::arbitrage::ZcVerdict::Zc,
            },
            "out",
        )
    })
}

/// Computes the `k` smallest Laplacian eigenvalues on a grid of `grid_nodes`
/// per axis. `epsilon_kernel <= 0` selects the default threshold.
///
/// # Safety
/// `s` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_spectrum_compute(
    s: *const GaScenario,
    grid_nodes: usize,
    k: usize,
    tol: f64,
    epsilon_kernel: f64,
    out: *mut *mut GaSpectrum,
) -> GaStatus {
    guard(|| {
        let sc = scenario(s)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SpectrumConfig {
            grid_nodes,
            time_nodes: None,
            eigen: EigenOptions {
                k,
                tol,
                ..EigenOptions::default()
            },
            epsilon_kernel: (epsilon_kernel > 0.0).then_some(epsilon_kernel),
        };
        let sp = analyze_scenario(sc, &cfg)?;
        let completeness = match is_complete(&sp.result, sp.epsilon_kernel)? {
            CompletenessVerdict::Complete => GaCompleteness::Complete,
            CompletenessVerdict::Incomplete => GaCompleteness::Incomplete,
            CompletenessVerdict::Arbitrage => GaCompleteness::NoKernel,
        };
        let verdict = match sp.verdict {
            NflvrVerdict::ArbitrageFree => GaVerdict::ArbitrageFree,
            NflvrVerdict::Arbitrage => GaVerdict::Arbitrage,
            NflvrVerdict::Inconclusive => GaVerdict::Inconclusive,
        };
        out.write(Box::into_raw(Box::new(GaSpectrum {
            eigenvalues: sp.result.eigenvalues,
            epsilon_kernel: sp.epsilon_kernel,
            verdict,
            kernel_dim: sp.kernel_dim,
            completeness,
        })));
        Ok(())
    })
}

/// # Safety
/// `sp` must come from [`ga_spectrum_compute`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ga_spectrum_free(sp: *mut GaSpectrum) {
    if !sp.is_null() {
        drop(Box::from_raw(sp));
    }
}

/// # Safety
/// `sp` must be a live spectrum handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_spectrum_len(sp: *const GaSpectrum, out: *mut usize) -> GaStatus {
    guard(|| write(out, spectrum(sp)?.eigenvalues.len(), "out"))
}

/// Eigenvalue `i` in ascending order.
///
/// # Safety
/// `sp` must be a live spectrum handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_spectrum_eigenvalue(sp: *const GaSpectrum, i: usize, out: *mut f64) -> GaStatus {
    guard(|| {
        let sp = spectrum(sp)?;
        let v = *sp.eigenvalues.get(i).ok_or_else(|| {
            set_error(
                "ffi.out_of_range",
                format!("eigenvalue {i} of {}", sp.eigenvalues.len()),
            );
            Fail(GaStatus::OutOfRange)
        })?;
        write(out, v, "out")
    })
}

/// # Safety
/// `sp` must be a live spectrum handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_spectrum_verdict(sp: *const GaSpectrum, out: *mut GaVerdict) -> GaStatus {
    guard(|| write(out, spectrum(sp)?.verdict, "out"))
}

/// # Safety
/// `sp` must be a live spectrum handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_spectrum_completeness(sp: *const GaSpectrum, out: *mut GaCompleteness) -> GaStatus {
    guard(|| write(out, spectrum(sp)?.completeness, "out"))
}

/// # Safety
/// `sp` must be a live spectrum handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_spectrum_kernel_dim(sp: *const GaSpectrum, out: *mut usize) -> GaStatus {
    guard(|| write(out, spectrum(sp)?.kernel_dim, "out"))
}

/// # Safety
/// `sp` must be a live spectrum handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ga_spectrum_epsilon(sp: *const GaSpectrum, out: *mut f64) -> GaStatus {
    guard(|| write(out, spectrum(sp)?.epsilon_kernel, "out"))
}
