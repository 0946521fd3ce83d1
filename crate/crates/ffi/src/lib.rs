//! C ABI for the cvqkd crate.
//!
//! Scenarios are opaque handles created with [`cvqkd_scenario_new`],
//! configured through setters, evaluated, and released with
//! [`cvqkd_scenario_free`]. Every fallible call returns a [`CvqkdStatus`]
//! code and stores a message retrievable via [`cvqkd_last_error_message`]
//! (thread-local, valid until the next failing call on the same thread).
//!
//! The matching C header lives at `include/cvqkd.h` and is maintained by
//! hand; `tests/header_sync.rs` keeps it aligned with the exported symbols.

// Validation guards use `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;

use cvqkd::error::Error;
use cvqkd::estimation::normal_quantile_half;
use cvqkd::finite_size::{delta_n_raw, expected_keyrate, KeyStatus, SecurityBudget};
use cvqkd::gaussian::{holevo_bound, mutual_info_at, TwoModeCov};
use cvqkd::modulation::{correlation_strength, Modulation, ProtocolSpec};
use cvqkd::scenario::{estimate_from_file, optimize_va, Scenario};

/// Result codes of the C API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqkdStatus {
    CvqkdOk = 0,
    CvqkdErrDomain = 1,
    CvqkdErrUnphysical = 2,
    CvqkdErrNonConverged = 3,
    CvqkdErrBudget = 4,
    CvqkdErrParse = 5,
    CvqkdErrIo = 6,
    CvqkdErrNullArgument = 7,
    CvqkdErrInvalidUtf8 = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn status_from(err: &Error) -> CvqkdStatus {
    match err {
        Error::Domain(_) => CvqkdStatus::CvqkdErrDomain,
        Error::Unphysical(_) => CvqkdStatus::CvqkdErrUnphysical,
        Error::NonConverged(_) => CvqkdStatus::CvqkdErrNonConverged,
        Error::Budget(_) => CvqkdStatus::CvqkdErrBudget,
        Error::Parse { .. } => CvqkdStatus::CvqkdErrParse,
        Error::Io(_) => CvqkdStatus::CvqkdErrIo,
    }
}

fn fail(err: Error) -> CvqkdStatus {
    let code = status_from(&err);
    set_last_error(err.to_string());
    code
}

fn fail_null(what: &str) -> CvqkdStatus {
    set_last_error(format!("null pointer passed for `{what}`"));
    CvqkdStatus::CvqkdErrNullArgument
}

/// Message of the most recent failure on this thread. Never null; the
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cvqkd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Static version string of the library.
#[no_mangle]
pub extern "C" fn cvqkd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque scenario handle.
pub struct CvqkdScenario(Scenario);

/// New scenario with the reference defaults (four-state modulation,
/// xi = 0.005, eta = 0.6, beta = 0.8, every epsilon at 1e-10, N = 1e10,
/// half the signals disclosed). The channel still needs a distance or a
/// transmission before evaluation. Free with [`cvqkd_scenario_free`].
#[no_mangle]
pub extern "C" fn cvqkd_scenario_new() -> *mut CvqkdScenario {
    Box::into_raw(Box::new(CvqkdScenario(Scenario::default())))
}

/// Releases a scenario handle. Accepts null.
///
/// # Safety
/// `sc` must be a pointer returned by [`cvqkd_scenario_new`] that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_free(sc: *mut CvqkdScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

unsafe fn scenario_mut<'a>(sc: *mut CvqkdScenario) -> Option<&'a mut Scenario> {
    sc.as_mut().map(|s| &mut s.0)
}

unsafe fn scenario_ref<'a>(sc: *const CvqkdScenario) -> Option<&'a Scenario> {
    sc.as_ref().map(|s| &s.0)
}

unsafe fn parse_utf8<'a>(ptr: *const c_char) -> Result<&'a str, CvqkdStatus> {
    if ptr.is_null() {
        return Err(fail_null("string"));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8".to_string());
        CvqkdStatus::CvqkdErrInvalidUtf8
    })
}

/// Sets the modulation scheme by name:
/// "gaussian", "twostate", "fourstate", or "eightdim".
///
/// # Safety
/// `sc` must be a live scenario handle; `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_set_scheme(
    sc: *mut CvqkdScenario,
    name: *const c_char,
) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    let name = match parse_utf8(name) {
        Ok(n) => n,
        Err(code) => return code,
    };
    match Modulation::from_name(name) {
        Ok(m) => {
            s.scheme = m;
            CvqkdStatus::CvqkdOk
        }
        Err(e) => fail(e),
    }
}

/// Fixes the modulation variance (shot-noise units).
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_set_va(sc: *mut CvqkdScenario, va: f64) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    if !(va > 0.0) || !va.is_finite() {
        return fail(Error::Domain(format!("va must be positive and finite, got {va}")));
    }
    s.va = Some(va);
    CvqkdStatus::CvqkdOk
}

/// Requests modulation-variance optimization (the default).
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_optimize_va(sc: *mut CvqkdScenario) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    s.va = None;
    CvqkdStatus::CvqkdOk
}

/// Sets the fiber distance in km (clears any fixed transmission).
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_set_distance_km(
    sc: *mut CvqkdScenario,
    dist_km: f64,
) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    if !(dist_km >= 0.0) || !dist_km.is_finite() {
        return fail(Error::Domain(format!("distance must be >= 0 km, got {dist_km}")));
    }
    s.dist_km = Some(dist_km);
    s.transmission = None;
    CvqkdStatus::CvqkdOk
}

/// Sets the total transmission (clears any fixed distance).
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_set_transmission(
    sc: *mut CvqkdScenario,
    t_lin: f64,
) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    if !(t_lin > 0.0 && t_lin <= 1.0) {
        return fail(Error::Domain(format!("transmission must lie in (0, 1], got {t_lin}")));
    }
    s.transmission = Some(t_lin);
    s.dist_km = None;
    CvqkdStatus::CvqkdOk
}

/// Sets the excess noise xi (shot-noise units, channel input).
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_set_xi(sc: *mut CvqkdScenario, xi: f64) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    if !(xi >= 0.0) || !xi.is_finite() {
        return fail(Error::Domain(format!("xi must be >= 0, got {xi}")));
    }
    s.xi = xi;
    CvqkdStatus::CvqkdOk
}

/// Sets the detector quantum efficiency eta in (0, 1].
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_set_eta(sc: *mut CvqkdScenario, eta: f64) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    if !(eta > 0.0 && eta <= 1.0) {
        return fail(Error::Domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    s.eta = eta;
    CvqkdStatus::CvqkdOk
}

/// Sets the total number of exchanged signals N.
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_set_block_size(
    sc: *mut CvqkdScenario,
    n_total: u64,
) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    if n_total < 2 {
        return fail(Error::Domain(format!("N must be >= 2, got {n_total}")));
    }
    s.n_total = Some(n_total);
    CvqkdStatus::CvqkdOk
}

/// Sets the fraction of N disclosed for parameter estimation.
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_set_est_fraction(
    sc: *mut CvqkdScenario,
    fraction: f64,
) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    if !(0.0..1.0).contains(&fraction) {
        return fail(Error::Domain(format!("fraction must lie in [0, 1), got {fraction}")));
    }
    s.est_fraction = fraction;
    CvqkdStatus::CvqkdOk
}

/// Sets the reconciliation efficiency beta in (0, 1].
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_set_beta(sc: *mut CvqkdScenario, beta: f64) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    if !(beta > 0.0 && beta <= 1.0) {
        return fail(Error::Domain(format!("beta must lie in (0, 1], got {beta}")));
    }
    s.beta = beta;
    CvqkdStatus::CvqkdOk
}

/// Sets the four failure probabilities of the security budget.
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_set_budget(
    sc: *mut CvqkdScenario,
    eps_pe: f64,
    eps_ec: f64,
    eps_bar: f64,
    eps_pa: f64,
) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    match SecurityBudget::new(eps_pe, eps_ec, eps_bar, eps_pa) {
        Ok(b) => {
            s.budget = b;
            CvqkdStatus::CvqkdOk
        }
        Err(e) => fail(e),
    }
}

/// Sets the seed of randomized operations.
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_scenario_set_seed(sc: *mut CvqkdScenario, seed: u64) -> CvqkdStatus {
    let Some(s) = scenario_mut(sc) else { return fail_null("scenario") };
    s.seed = seed;
    CvqkdStatus::CvqkdOk
}

/// Finite-size key-rate evaluation result.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CvqkdKeyRateReport {
    /// Modulation variance used (the optimum when the scenario optimizes).
    pub va: f64,
    /// Mutual information I(x:y), bits per channel use.
    pub i_xy: f64,
    /// Worst-case Holevo bound chi(y:E), bits per channel use.
    pub chi_ye: f64,
    /// Privacy-amplification penalty Delta(n).
    pub delta_n: f64,
    /// Secret-key rate, bits per channel use (negative when aborting).
    pub rate: f64,
    /// Worst-case channel slope t_min.
    pub worst_t: f64,
    /// Worst-case noise variance sigma2_max.
    pub worst_sigma2: f64,
    /// 1 when the rate is positive, 0 otherwise.
    pub distillable: i32,
    /// 1 when the variance optimizer stopped at the search boundary.
    pub va_at_boundary: i32,
}

/// Evaluates the finite-size key rate of the scenario, optimizing the
/// modulation variance when none is fixed.
///
/// # Safety
/// `sc` must be a live scenario handle; `out` a writable report pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_keyrate(
    sc: *const CvqkdScenario,
    out: *mut CvqkdKeyRateReport,
) -> CvqkdStatus {
    let Some(s) = scenario_ref(sc) else { return fail_null("scenario") };
    if out.is_null() {
        return fail_null("out");
    }
    let inner = || -> Result<CvqkdKeyRateReport, Error> {
        let ch = s.channel()?;
        let plan = s.plan()?;
        let (va, report, boundary) = match s.va {
            Some(va) => {
                let spec = ProtocolSpec::new(s.scheme, va)?;
                (va, expected_keyrate(&spec, &ch, &plan, &s.budget, s.beta)?, false)
            }
            None => {
                let opt = optimize_va(s.scheme, &ch, &plan, &s.budget, s.beta)?;
                let report = opt.report.ok_or_else(|| {
                    Error::Unphysical(
                        "estimation too weak at every modulation variance".to_string(),
                    )
                })?;
                (opt.va, report, opt.at_boundary)
            }
        };
        Ok(CvqkdKeyRateReport {
            va,
            i_xy: report.i_xy,
            chi_ye: report.chi_ye,
            delta_n: report.delta_n,
            rate: report.rate,
            worst_t: report.worst_t,
            worst_sigma2: report.worst_sigma2,
            distillable: i32::from(report.status == KeyStatus::Distillable),
            va_at_boundary: i32::from(boundary),
        })
    };
    match inner() {
        Ok(report) => {
            out.write(report);
            CvqkdStatus::CvqkdOk
        }
        Err(e) => fail(e),
    }
}

/// Channel-estimation result of [`cvqkd_estimate_file`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CvqkdEstimateReport {
    /// Number of disclosed sample pairs.
    pub m: u64,
    pub t_hat: f64,
    pub sigma2_hat: f64,
    pub t_min: f64,
    pub sigma2_max: f64,
    /// Raw-key size n = N - m.
    pub n_key: u64,
    pub i_xy: f64,
    pub chi_ye: f64,
    pub delta_n: f64,
    pub rate: f64,
    pub distillable: i32,
    /// 1 when m is below the Gaussian-approximation floor of the
    /// chi-squared bound.
    pub below_gaussian_floor: i32,
}

/// Estimates the channel from a two-column x,y CSV file and evaluates the
/// finite-size rate on the remaining signals. The scenario must carry a
/// fixed modulation variance.
///
/// # Safety
/// `sc` must be a live scenario handle; `path` a NUL-terminated string;
/// `out` a writable report pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_estimate_file(
    sc: *const CvqkdScenario,
    path: *const c_char,
    out: *mut CvqkdEstimateReport,
) -> CvqkdStatus {
    let Some(s) = scenario_ref(sc) else { return fail_null("scenario") };
    if out.is_null() {
        return fail_null("out");
    }
    let path = match parse_utf8(path) {
        Ok(p) => PathBuf::from(p),
        Err(code) => return code,
    };
    match estimate_from_file(&path, s) {
        Ok(rep) => {
            out.write(CvqkdEstimateReport {
                m: rep.outcome.m,
                t_hat: rep.outcome.t_hat,
                sigma2_hat: rep.outcome.sigma2_hat,
                t_min: rep.outcome.t_min,
                sigma2_max: rep.outcome.sigma2_max,
                n_key: rep.n_key,
                i_xy: rep.report.i_xy,
                chi_ye: rep.report.chi_ye,
                delta_n: rep.report.delta_n,
                rate: rep.report.rate,
                distillable: i32::from(rep.report.status == KeyStatus::Distillable),
                below_gaussian_floor: i32::from(rep.outcome.below_gaussian_floor),
            });
            CvqkdStatus::CvqkdOk
        }
        Err(e) => fail(e),
    }
}

/// z solving (1 - erf(z/sqrt(2)))/2 = eps/2.
///
/// # Safety
/// `out` must be a writable f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_normal_quantile_half(eps: f64, out: *mut f64) -> CvqkdStatus {
    if out.is_null() {
        return fail_null("out");
    }
    match normal_quantile_half(eps) {
        Ok(z) => {
            out.write(z);
            CvqkdStatus::CvqkdOk
        }
        Err(e) => fail(e),
    }
}

/// Privacy-amplification penalty Delta(n) for a raw key of `n_key` symbols
/// over an alphabet of dimension `dim`.
///
/// # Safety
/// `out` must be a writable f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_delta_n(
    n_key: u64,
    dim: u32,
    eps_bar: f64,
    eps_pa: f64,
    out: *mut f64,
) -> CvqkdStatus {
    if out.is_null() {
        return fail_null("out");
    }
    if n_key == 0 || dim < 2 {
        return fail(Error::Domain(format!("need n_key >= 1 and dim >= 2, got ({n_key}, {dim})")));
    }
    if !(eps_bar > 0.0 && eps_bar < 1.0 && eps_pa > 0.0 && eps_pa < 1.0) {
        return fail(Error::Domain("failure probabilities must lie in (0, 1)".to_string()));
    }
    out.write(delta_n_raw(n_key, dim, eps_bar, eps_pa));
    CvqkdStatus::CvqkdOk
}

/// Samples required to keep the estimation-induced excess noise at
/// `target_dxi` for transmission `t_lin`.
///
/// # Safety
/// `out` must be a writable u64 pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_required_samples(
    t_lin: f64,
    target_dxi: f64,
    eps_pe: f64,
    out: *mut u64,
) -> CvqkdStatus {
    if out.is_null() {
        return fail_null("out");
    }
    match cvqkd::estimation::required_samples(t_lin, target_dxi, eps_pe) {
        Ok(m) => {
            out.write(m);
            CvqkdStatus::CvqkdOk
        }
        Err(e) => fail(e),
    }
}

/// Estimation-induced effective excess noise for m disclosed samples.
///
/// # Safety
/// `out` must be a writable f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_effective_excess_noise(
    t_lin: f64,
    m: u64,
    eps_pe: f64,
    out: *mut f64,
) -> CvqkdStatus {
    if out.is_null() {
        return fail_null("out");
    }
    match cvqkd::estimation::effective_excess_noise(t_lin, m, eps_pe) {
        Ok(dxi) => {
            out.write(dxi);
            CvqkdStatus::CvqkdOk
        }
        Err(e) => fail(e),
    }
}

/// Correlation strength Z of a modulation scheme at variance `va`.
///
/// # Safety
/// `scheme` must be a NUL-terminated string; `out` a writable f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_correlation_strength(
    scheme: *const c_char,
    va: f64,
    out: *mut f64,
) -> CvqkdStatus {
    if out.is_null() {
        return fail_null("out");
    }
    let name = match parse_utf8(scheme) {
        Ok(n) => n,
        Err(code) => return code,
    };
    let inner = || -> Result<f64, Error> {
        let spec = ProtocolSpec::new(Modulation::from_name(name)?, va)?;
        Ok(correlation_strength(&spec))
    };
    match inner() {
        Ok(z) => {
            out.write(z);
            CvqkdStatus::CvqkdOk
        }
        Err(e) => fail(e),
    }
}

/// Holevo bound chi(y:E) of the covariance matrix (a, b, c).
///
/// # Safety
/// `out` must be a writable f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_holevo_bound(
    a: f64,
    b: f64,
    c: f64,
    out: *mut f64,
) -> CvqkdStatus {
    if out.is_null() {
        return fail_null("out");
    }
    let inner = || -> Result<f64, Error> { holevo_bound(&TwoModeCov::new(a, b, c)?) };
    match inner() {
        Ok(chi) => {
            out.write(chi);
            CvqkdStatus::CvqkdOk
        }
        Err(e) => fail(e),
    }
}

/// Mutual information (1/2) log2(1 + t^2 va / sigma2).
///
/// # Safety
/// `out` must be a writable f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_mutual_info(
    va: f64,
    t: f64,
    sigma2: f64,
    out: *mut f64,
) -> CvqkdStatus {
    if out.is_null() {
        return fail_null("out");
    }
    if !(va > 0.0) || !(sigma2 > 0.0) {
        return fail(Error::Domain(format!(
            "need va > 0 and sigma2 > 0, got ({va}, {sigma2})"
        )));
    }
    out.write(mutual_info_at(va, t, sigma2));
    CvqkdStatus::CvqkdOk
}
