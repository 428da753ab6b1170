//! C ABI over the certification and simulation entry points.
//!
//! Every function returns a status code (`WC_OK` is zero, failures are
//! negative) and writes results through out-pointers. Composite results are
//! returned as opaque handles with accessor and free functions, so the
//! header never exposes Rust layouts. All entry points catch panics at the
//! boundary and translate them into `WC_ERR_PANIC`.
//!
//! The matching declarations live in `include/wavecert.h`, which is
//! maintained by hand and kept in sync by a test.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use wavecert::{
    CertificationResult, Config, ControllerParams, Error, GBound, Mode, PlantParams, SimConfig,
    SimTrace, UncertaintyBox,
};

pub const WC_OK: i32 = 0;
pub const WC_ERR_NULL: i32 = -1;
pub const WC_ERR_INVALID: i32 = -2;
pub const WC_ERR_SINGULAR: i32 = -3;
pub const WC_ERR_MODE: i32 = -4;
pub const WC_ERR_INFEASIBLE: i32 = -5;
pub const WC_ERR_SOLVER: i32 = -6;
pub const WC_ERR_SPECTRUM: i32 = -7;
pub const WC_ERR_UNBOUNDED: i32 = -8;
pub const WC_ERR_BUFFER: i32 = -9;
pub const WC_ERR_PANIC: i32 = -10;

fn code_of(err: &Error) -> i32 {
    match err {
        Error::NonPositiveSpeed(_)
        | Error::NonPositiveMultiplier(_)
        | Error::NegativeAlpha(_)
        | Error::BadBox(_)
        | Error::BadConfig(_)
        | Error::BadExpression(_)
        | Error::PreconditionViolated(_)
        | Error::InvalidSimConfig(_)
        | Error::IncompatibleInitialConditions(_) => WC_ERR_INVALID,
        Error::UnitReflectionSingularity { .. }
        | Error::ReflectionPole { .. }
        | Error::SingularGain { .. }
        | Error::NonDissipativeBoundary(_)
        | Error::PerfectAbsorption => WC_ERR_SINGULAR,
        Error::ModeMismatch(_) => WC_ERR_MODE,
        Error::InfeasibleAtZero => WC_ERR_INFEASIBLE,
        Error::SolverStall { .. } => WC_ERR_SOLVER,
        Error::WindingMismatch { .. } | Error::NewtonDivergence { .. } => WC_ERR_SPECTRUM,
        Error::UnboundedDelta { .. } => WC_ERR_UNBOUNDED,
    }
}

fn guarded<F: FnOnce() -> i32>(body: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(_) => WC_ERR_PANIC,
    }
}

fn mode_of(mode: i32) -> Result<Mode, i32> {
    match mode {
        0 => Ok(Mode::Full),
        1 => Ok(Mode::Reduced),
        _ => Err(WC_ERR_INVALID),
    }
}

fn gain_bound(g_max_is_inf: i32, g_max: f64) -> GBound {
    if g_max_is_inf != 0 {
        GBound::PosInf
    } else {
        GBound::Finite(g_max)
    }
}

/// Closed-form decay rate of the matched-speed loop; infinite rates are
/// reported as IEEE infinity.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_alpha_dyn(c: f64, g: f64, h: f64, out: *mut f64) -> i32 {
    guarded(|| {
        if out.is_null() {
            return WC_ERR_NULL;
        }
        match wavecert::alpha_dyn(c, g, h) {
            Ok(a) => {
                *out = a.as_f64();
                WC_OK
            }
            Err(e) => code_of(&e),
        }
    })
}

/// Decay rate of the backstepping target law.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_alpha_backstepping(c1: f64, k: f64, out: *mut f64) -> i32 {
    guarded(|| {
        if out.is_null() {
            return WC_ERR_NULL;
        }
        match wavecert::alpha_backstepping(c1, k) {
            Ok(a) => {
                *out = a.as_f64();
                WC_OK
            }
            Err(e) => code_of(&e),
        }
    })
}

/// The two backstepping gains whose target rate matches the dynamic loop's;
/// the larger root is IEEE infinity when it escapes.
///
/// # Safety
/// `out_k_small` and `out_k_large` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wc_match_k(
    c1: f64,
    g: f64,
    h: f64,
    out_k_small: *mut f64,
    out_k_large: *mut f64,
) -> i32 {
    guarded(|| {
        if out_k_small.is_null() || out_k_large.is_null() {
            return WC_ERR_NULL;
        }
        match wavecert::match_k(c1, g, h) {
            Ok((small, large)) => {
                *out_k_small = small;
                *out_k_large = large.as_f64();
                WC_OK
            }
            Err(e) => code_of(&e),
        }
    })
}

pub struct WcCertification(CertificationResult);

unsafe fn certification_call<F>(out: *mut *mut WcCertification, run: F) -> i32
where
    F: FnOnce() -> wavecert::Result<CertificationResult>,
{
    if out.is_null() {
        return WC_ERR_NULL;
    }
    match run() {
        Ok(r) => {
            *out = Box::into_raw(Box::new(WcCertification(r)));
            WC_OK
        }
        Err(e) => code_of(&e),
    }
}

/// Search for decay-certifying multipliers at the fixed rate `alpha`.
/// `mode` is 0 for the full certificate and 1 for the reduced one.
///
/// # Safety
/// `out` must be a valid pointer; the handle written through it must be
/// released with `wc_certification_free`.
#[no_mangle]
pub unsafe extern "C" fn wc_certify(
    c1: f64,
    g: f64,
    c2: f64,
    h: f64,
    q: f64,
    alpha: f64,
    mode: i32,
    out: *mut *mut WcCertification,
) -> i32 {
    guarded(|| {
        certification_call(out, || {
            let mode = mode_of(mode).map_err(|_| Error::BadConfig("mode must be 0 or 1".into()))?;
            let plant = PlantParams::new(c1, g)?;
            let ctrl = ControllerParams::new(c2, h, q)?;
            wavecert::feasibility(&plant, &ctrl, alpha, mode)
        })
    })
}

/// Maximize the certified decay rate by bisection to tolerance `tol`.
///
/// # Safety
/// `out` must be a valid pointer; the handle written through it must be
/// released with `wc_certification_free`.
#[no_mangle]
pub unsafe extern "C" fn wc_max_decay_rate(
    c1: f64,
    g: f64,
    c2: f64,
    h: f64,
    q: f64,
    mode: i32,
    tol: f64,
    out: *mut *mut WcCertification,
) -> i32 {
    guarded(|| {
        certification_call(out, || {
            let mode = mode_of(mode).map_err(|_| Error::BadConfig("mode must be 0 or 1".into()))?;
            let plant = PlantParams::new(c1, g)?;
            let ctrl = ControllerParams::new(c2, h, q)?;
            wavecert::max_decay_rate(&plant, &ctrl, mode, tol)
        })
    })
}

/// Whether the certification found a witness: 1, 0, or a negative status.
///
/// # Safety
/// `cert` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn wc_certification_feasible(cert: *const WcCertification) -> i32 {
    guarded(|| {
        let Some(c) = cert.as_ref() else {
            return WC_ERR_NULL;
        };
        i32::from(c.0.feasible)
    })
}

/// Verified top eigenvalue of the certificate matrix at the witness.
///
/// # Safety
/// `cert` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_certification_margin(
    cert: *const WcCertification,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let (Some(c), false) = (cert.as_ref(), out.is_null()) else {
            return WC_ERR_NULL;
        };
        *out = c.0.margin;
        WC_OK
    })
}

/// Certified maximal rate, or NaN when the call did not maximize.
///
/// # Safety
/// `cert` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_certification_alpha_star(
    cert: *const WcCertification,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let (Some(c), false) = (cert.as_ref(), out.is_null()) else {
            return WC_ERR_NULL;
        };
        *out = c.0.alpha_star.unwrap_or(f64::NAN);
        WC_OK
    })
}

/// Overshoot coefficient of the certified envelope, or NaN when infeasible.
///
/// # Safety
/// `cert` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_certification_gamma(
    cert: *const WcCertification,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let (Some(c), false) = (cert.as_ref(), out.is_null()) else {
            return WC_ERR_NULL;
        };
        *out = c.0.gamma.unwrap_or(f64::NAN);
        WC_OK
    })
}

/// Copy the witness multipliers into `buf` (4 entries in reduced mode, 5 in
/// full mode) and report how many were written.
///
/// # Safety
/// `cert` must be a live handle; `buf` must point to at least `cap` doubles;
/// `n_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_certification_multipliers(
    cert: *const WcCertification,
    buf: *mut f64,
    cap: usize,
    n_out: *mut usize,
) -> i32 {
    guarded(|| {
        let (Some(c), false, false) = (cert.as_ref(), buf.is_null(), n_out.is_null()) else {
            return WC_ERR_NULL;
        };
        let Some(w) = c.0.witness.as_ref() else {
            *n_out = 0;
            return WC_ERR_INFEASIBLE;
        };
        let weights = w.weights();
        if cap < weights.len() {
            return WC_ERR_BUFFER;
        }
        for (i, v) in weights.iter().enumerate() {
            *buf.add(i) = *v;
        }
        *n_out = weights.len();
        WC_OK
    })
}

/// Release a certification handle. Null is ignored.
///
/// # Safety
/// `cert` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wc_certification_free(cert: *mut WcCertification) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Supremum of the reflection magnitude over a parameter box. Pass
/// `g_max_is_inf = 1` for a gain unbounded above (then `g_max` is ignored).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_delta_max(
    c_min: f64,
    c_max: f64,
    g_min: f64,
    g_max_is_inf: i32,
    g_max: f64,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            return WC_ERR_NULL;
        }
        let run = || -> wavecert::Result<f64> {
            let bx = UncertaintyBox::new(c_min, c_max, g_min, gain_bound(g_max_is_inf, g_max))?;
            Ok(wavecert::delta_max(&bx)?.delta_max)
        };
        match run() {
            Ok(v) => {
                *out = v;
                WC_OK
            }
            Err(e) => code_of(&e),
        }
    })
}

/// Certify marginal stability over a whole parameter box with one witness.
/// Writes 1 or 0 through `feasible_out` and the verified worst margin
/// through `margin_out`.
///
/// # Safety
/// `feasible_out` and `margin_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wc_certify_robust(
    c_min: f64,
    c_max: f64,
    g_min: f64,
    g_max_is_inf: i32,
    g_max: f64,
    c2: f64,
    h: f64,
    q: f64,
    mode: i32,
    feasible_out: *mut i32,
    margin_out: *mut f64,
) -> i32 {
    guarded(|| {
        if feasible_out.is_null() || margin_out.is_null() {
            return WC_ERR_NULL;
        }
        let run = || -> wavecert::Result<wavecert::RobustReport> {
            let mode = mode_of(mode).map_err(|_| Error::BadConfig("mode must be 0 or 1".into()))?;
            let bx = UncertaintyBox::new(c_min, c_max, g_min, gain_bound(g_max_is_inf, g_max))?;
            let ctrl = ControllerParams::new(c2, h, q)?;
            wavecert::certify_robust(&bx, &ctrl, mode)
        };
        match run() {
            Ok(r) => {
                *feasible_out = i32::from(r.feasible);
                *margin_out = r.margin;
                WC_OK
            }
            Err(e) => code_of(&e),
        }
    })
}

#[repr(C)]
pub struct WcTraceRow {
    pub t: f64,
    pub seminorm_h: f64,
    pub norm_h0: f64,
    pub u0: f64,
    pub w: f64,
    pub y: f64,
    pub v1: f64,
}

pub struct WcSimTrace(SimTrace);

/// Run a simulation described by a key-value configuration text (the same
/// format the command-line tool reads) and return a trace handle.
///
/// # Safety
/// `config_text` must be a valid NUL-terminated string; `out` must be a
/// valid pointer; the handle written through it must be released with
/// `wc_sim_trace_free`.
#[no_mangle]
pub unsafe extern "C" fn wc_simulate(
    config_text: *const c_char,
    out: *mut *mut WcSimTrace,
) -> i32 {
    guarded(|| {
        if config_text.is_null() || out.is_null() {
            return WC_ERR_NULL;
        }
        let Ok(text) = CStr::from_ptr(config_text).to_str() else {
            return WC_ERR_INVALID;
        };
        let run = || -> wavecert::Result<SimTrace> {
            let cfg = Config::parse(text)?;
            let sc = SimConfig::from_config(&cfg)?;
            wavecert::run(&sc)
        };
        match run() {
            Ok(tr) => {
                *out = Box::into_raw(Box::new(WcSimTrace(tr)));
                WC_OK
            }
            Err(e) => code_of(&e),
        }
    })
}

/// Number of sampled rows in the trace.
///
/// # Safety
/// `trace` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_sim_trace_len(trace: *const WcSimTrace, out: *mut usize) -> i32 {
    guarded(|| {
        let (Some(t), false) = (trace.as_ref(), out.is_null()) else {
            return WC_ERR_NULL;
        };
        *out = t.0.rows.len();
        WC_OK
    })
}

/// Copy row `idx` of the trace.
///
/// # Safety
/// `trace` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_sim_trace_row(
    trace: *const WcSimTrace,
    idx: usize,
    out: *mut WcTraceRow,
) -> i32 {
    guarded(|| {
        let (Some(t), false) = (trace.as_ref(), out.is_null()) else {
            return WC_ERR_NULL;
        };
        let Some(r) = t.0.rows.get(idx) else {
            return WC_ERR_BUFFER;
        };
        *out = WcTraceRow {
            t: r.t,
            seminorm_h: r.seminorm_h,
            norm_h0: r.norm_h0,
            u0: r.u0,
            w: r.w,
            y: r.y,
            v1: r.v1,
        };
        WC_OK
    })
}

/// Fitted decay rate of the trace, or NaN when the fit was inconclusive.
///
/// # Safety
/// `trace` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_sim_trace_fitted_rate(
    trace: *const WcSimTrace,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let (Some(t), false) = (trace.as_ref(), out.is_null()) else {
            return WC_ERR_NULL;
        };
        *out = if t.0.inconclusive {
            f64::NAN
        } else {
            t.0.fitted_rate.unwrap_or(f64::NAN)
        };
        WC_OK
    })
}

/// Release a trace handle. Null is ignored.
///
/// # Safety
/// `trace` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wc_sim_trace_free(trace: *mut WcSimTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Closed-form matched-speed pole line: real part and imaginary spacing.
///
/// # Safety
/// `re_out` and `spacing_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wc_pole_line(
    c: f64,
    g: f64,
    h: f64,
    re_out: *mut f64,
    spacing_out: *mut f64,
) -> i32 {
    guarded(|| {
        if re_out.is_null() || spacing_out.is_null() {
            return WC_ERR_NULL;
        }
        match wavecert::closed_form_poles(c, g, h, 0..=0) {
            Ok(p) => {
                *re_out = p[0].re;
                *spacing_out = std::f64::consts::PI * c / 2.0;
                WC_OK
            }
            Err(e) => code_of(&e),
        }
    })
}

/// Backstepping target pole line: real part and imaginary spacing.
///
/// # Safety
/// `re_out` and `spacing_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wc_backstepping_poles(
    c1: f64,
    k: f64,
    re_out: *mut f64,
    spacing_out: *mut f64,
) -> i32 {
    guarded(|| {
        if re_out.is_null() || spacing_out.is_null() {
            return WC_ERR_NULL;
        }
        match wavecert::backstepping_poles(c1, k, 0..=0) {
            Ok(p) => {
                *re_out = p[0].re;
                *spacing_out = std::f64::consts::PI * c1;
                WC_OK
            }
            Err(e) => code_of(&e),
        }
    })
}

/// Locate closed-loop eigenvalues in a rectangle. Writes up to `cap` roots
/// into the parallel `re`/`im` buffers and the count found into `n_out`.
///
/// # Safety
/// `re`, `im` must point to at least `cap` doubles; `n_out` must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn wc_find_roots(
    c1: f64,
    g: f64,
    c2: f64,
    h: f64,
    q: f64,
    re_min: f64,
    re_max: f64,
    im_min: f64,
    im_max: f64,
    nx: usize,
    ny: usize,
    re: *mut f64,
    im: *mut f64,
    cap: usize,
    n_out: *mut usize,
) -> i32 {
    guarded(|| {
        if re.is_null() || im.is_null() || n_out.is_null() {
            return WC_ERR_NULL;
        }
        let run = || -> wavecert::Result<Vec<wavecert::Complex64>> {
            let plant = PlantParams::new(c1, g)?;
            let ctrl = ControllerParams::new(c2, h, q)?;
            let rect = wavecert::Rect::new(re_min, re_max, im_min, im_max)?;
            wavecert::find_system_roots(&plant, &ctrl, &rect, nx, ny)
        };
        match run() {
            Ok(roots) => {
                if roots.len() > cap {
                    *n_out = roots.len();
                    return WC_ERR_BUFFER;
                }
                for (i, r) in roots.iter().enumerate() {
                    *re.add(i) = r.re;
                    *im.add(i) = r.im;
                }
                *n_out = roots.len();
                WC_OK
            }
            Err(e) => code_of(&e),
        }
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn wc_status_message(code: i32) -> *const c_char {
    let msg: &'static CStr = match code {
        WC_OK => c"ok",
        WC_ERR_NULL => c"null pointer argument",
        WC_ERR_INVALID => c"invalid argument or configuration",
        WC_ERR_SINGULAR => c"singular parameter combination",
        WC_ERR_MODE => c"certificate mode does not match the controller",
        WC_ERR_INFEASIBLE => c"no certificate exists at this point",
        WC_ERR_SOLVER => c"multiplier search stalled before a verdict",
        WC_ERR_SPECTRUM => c"root search failed to isolate the spectrum",
        WC_ERR_UNBOUNDED => c"reflection magnitude is unbounded on the box",
        WC_ERR_BUFFER => c"buffer too small or index out of range",
        WC_ERR_PANIC => c"internal panic caught at the boundary",
        _ => c"unknown status code",
    };
    msg.as_ptr()
}
