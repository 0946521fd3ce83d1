//! Parameter estimation for the normal linear model y = t x + z relating
//! Alice's and Bob's quadrature data.
//!
//! The maximum-likelihood estimators of the slope t = sqrt(T) and the noise
//! variance sigma^2 = 1 + T xi are turned into one-sided confidence bounds
//! (t_min, sigma2_max) at failure probability eps_PE/2 each, which define the
//! worst-case covariance matrix used for the secret-key-rate evaluation. The
//! module also plans the number of disclosed samples needed to reach a target
//! estimation-induced excess noise.

use crate::error::{Error, Result};
use crate::gaussian::{ChannelModel, TwoModeCov};
use crate::modulation::ProtocolSpec;
use crate::special::{erfc, normal_pdf};

/// Below this sample count the Gaussian approximation of the chi-squared law
/// backing the sigma^2 bound is not trustworthy; results carry a flag.
pub const GAUSSIAN_APPROX_FLOOR: u64 = 10_000;

/// Absolute accuracy target of the quantile solver.
const QUANTILE_TOL: f64 = 1e-13;

/// Solves (1 - erf(z / sqrt(2))) / 2 = eps / 2 for z.
///
/// The root is polished with safeguarded Newton steps against the
/// tail-accurate `erfc`, reaching well below 1e-10 absolute error.
pub fn normal_quantile_half(eps_pe: f64) -> Result<f64> {
    if !(eps_pe > 0.0 && eps_pe < 1.0) {
        return Err(Error::domain(format!(
            "failure probability must lie in (0, 1), got {eps_pe}"
        )));
    }
    if eps_pe < 1e-300 {
        return Err(Error::domain(format!(
            "failure probability {eps_pe} is below the f64 tail resolution"
        )));
    }
    // f(z) = erfc(z / sqrt 2)/2 - eps/2 is strictly decreasing on [0, inf)
    let f = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2) - 0.5 * eps_pe;
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    let mut z = if eps_pe < 0.5 {
        (-2.0 * eps_pe.ln()).sqrt().min(hi)
    } else {
        0.5
    };
    for _ in 0..200 {
        let fz = f(z);
        if fz > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        // Newton step; f'(z) = -phi(z)
        let step = fz / normal_pdf(z);
        let mut next = z + step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= QUANTILE_TOL * z.abs().max(1.0) {
            return Ok(next);
        }
        z = next;
    }
    Err(Error::NonConverged(format!("quantile iteration stalled at eps={eps_pe}")))
}

/// Maximum-likelihood estimators of the normal linear model:
/// t_hat = sum(x y) / sum(x^2), sigma2_hat = (1/m) sum((y - t_hat x)^2).
pub fn ml_estimators(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::domain(format!(
            "sample vectors differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let m = x.len();
    if m < 2 {
        return Err(Error::domain(format!("need at least 2 samples, got {m}")));
    }
    let sum_xx: f64 = x.iter().map(|v| v * v).sum();
    if sum_xx <= 0.0 {
        return Err(Error::domain("degenerate sample: sum of x^2 is zero".to_string()));
    }
    let sum_xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let t_hat = sum_xy / sum_xx;
    let sigma2_hat =
        x.iter().zip(y).map(|(a, b)| (b - t_hat * a).powi(2)).sum::<f64>() / m as f64;
    Ok((t_hat, sigma2_hat))
}

/// One-sided confidence bounds derived from observed estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceBounds {
    pub t_min: f64,
    pub sigma2_max: f64,
    /// Set when the sample count is below [`GAUSSIAN_APPROX_FLOOR`], where
    /// the normal approximation of the chi-squared law degrades.
    pub below_gaussian_floor: bool,
}

/// Lower bound on t and upper bound on sigma^2, each failing with
/// probability eps_PE/2:
/// t_min = t_hat - z sqrt(sigma2_hat / (m V_A)),
/// sigma2_max = sigma2_hat + z sigma2_hat sqrt(2) / sqrt(m).
pub fn confidence_bounds(
    t_hat: f64,
    sigma2_hat: f64,
    m: u64,
    va: f64,
    eps_pe: f64,
) -> Result<ConfidenceBounds> {
    if m == 0 {
        return Err(Error::domain("estimation sample count is zero".to_string()));
    }
    if !(va > 0.0) {
        return Err(Error::domain(format!("modulation variance must be positive, got {va}")));
    }
    if !(sigma2_hat >= 0.0) {
        return Err(Error::domain(format!("negative noise estimate {sigma2_hat}")));
    }
    let z = normal_quantile_half(eps_pe)?;
    let mf = m as f64;
    Ok(ConfidenceBounds {
        t_min: t_hat - z * (sigma2_hat / (mf * va)).sqrt(),
        sigma2_max: sigma2_hat + z * sigma2_hat * std::f64::consts::SQRT_2 / mf.sqrt(),
        below_gaussian_floor: m < GAUSSIAN_APPROX_FLOOR,
    })
}

/// Confidence bounds at the estimators' expected values
/// E[t_hat] = sqrt(T), E[sigma2_hat] = 1 + T xi.
pub fn expected_bounds(ch: &ChannelModel, m: u64, va: f64, eps_pe: f64) -> Result<ConfidenceBounds> {
    confidence_bounds(ch.t_slope(), ch.sigma2(), m, va, eps_pe)
}

/// Worst-case covariance matrix compatible with the estimation except with
/// probability eps_PE, built by exact substitution of (t_min, sigma2_max).
///
/// An unphysical result (in particular t_min <= 0) signals that m is too
/// small for the requested eps_PE.
pub fn worst_case_cov(
    spec: &ProtocolSpec,
    ch: &ChannelModel,
    m: u64,
    eps_pe: f64,
) -> Result<TwoModeCov> {
    let bounds = expected_bounds(ch, m, spec.va(), eps_pe)?;
    worst_case_cov_from_bounds(spec, &bounds)
}

/// Worst-case covariance from explicit bounds (used both for the expected
/// values and for observed estimators).
pub fn worst_case_cov_from_bounds(
    spec: &ProtocolSpec,
    bounds: &ConfidenceBounds,
) -> Result<TwoModeCov> {
    if bounds.t_min <= 0.0 {
        return Err(Error::unphysical(format!(
            "t_min = {} <= 0: too few estimation samples for the requested \
             failure probability",
            bounds.t_min
        )));
    }
    TwoModeCov::from_t_sigma2(spec, bounds.t_min, bounds.sigma2_max)
}

/// First-order expansion (Delta_Z, Delta_B) of the worst-case covariance
/// around the true one, kept as a diagnostic:
/// Delta_Z = -z sqrt((1 + T xi) / (m V_A)),
/// Delta_B = (z/sqrt(m)) ((1 + T xi) sqrt(2) - 2 sqrt(T V_A)) + z^2 (1 + T xi)/m.
///
/// Note that the exact substitution used by [`worst_case_cov`] differs from
/// this expansion in the cross term, which here carries sqrt(T V_A) rather
/// than sqrt(T V_A (1 + T xi)); the two coincide at xi = 0.
pub fn worst_case_expansion(ch: &ChannelModel, m: u64, va: f64, eps_pe: f64) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::domain("estimation sample count is zero".to_string()));
    }
    if !(va > 0.0) {
        return Err(Error::domain(format!("modulation variance must be positive, got {va}")));
    }
    let z = normal_quantile_half(eps_pe)?;
    let mf = m as f64;
    let s2 = ch.sigma2();
    let delta_z = -z * (s2 / (mf * va)).sqrt();
    let delta_b = z / mf.sqrt() * (s2 * std::f64::consts::SQRT_2 - 2.0 * (ch.t_lin() * va).sqrt())
        + z * z * s2 / mf;
    Ok((delta_z, delta_b))
}

/// Excess noise equivalent of the estimation uncertainty:
/// Delta_m xi = z sqrt(2) / (T sqrt(m)).
pub fn effective_excess_noise(t_lin: f64, m: u64, eps_pe: f64) -> Result<f64> {
    if !(t_lin > 0.0) {
        return Err(Error::domain(format!("transmission must be positive, got {t_lin}")));
    }
    if m == 0 {
        return Err(Error::domain("estimation sample count is zero".to_string()));
    }
    let z = normal_quantile_half(eps_pe)?;
    Ok(z * std::f64::consts::SQRT_2 / (t_lin * (m as f64).sqrt()))
}

/// Number of samples needed to keep the estimation-induced excess noise at
/// `target_dxi`, before rounding: 2 z^2 / (T^2 dxi^2).
pub fn required_samples_exact(t_lin: f64, target_dxi: f64, eps_pe: f64) -> Result<f64> {
    if !(t_lin > 0.0) {
        return Err(Error::domain(format!("transmission must be positive, got {t_lin}")));
    }
    if !(target_dxi > 0.0) {
        return Err(Error::domain(format!(
            "target excess noise must be positive, got {target_dxi}"
        )));
    }
    let z = normal_quantile_half(eps_pe)?;
    Ok(2.0 * z * z / (t_lin * t_lin * target_dxi * target_dxi))
}

/// Ceiling of [`required_samples_exact`].
pub fn required_samples(t_lin: f64, target_dxi: f64, eps_pe: f64) -> Result<u64> {
    Ok(required_samples_exact(t_lin, target_dxi, eps_pe)?.ceil() as u64)
}

/// Result of estimating the channel from disclosed sample pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationOutcome {
    pub t_hat: f64,
    pub sigma2_hat: f64,
    pub m: u64,
    pub t_min: f64,
    pub sigma2_max: f64,
    pub eps_pe: f64,
    pub below_gaussian_floor: bool,
}

/// Runs the ML estimators and confidence bounds on disclosed data.
pub fn estimate_channel(x: &[f64], y: &[f64], va: f64, eps_pe: f64) -> Result<EstimationOutcome> {
    let (t_hat, sigma2_hat) = ml_estimators(x, y)?;
    let m = x.len() as u64;
    let bounds = confidence_bounds(t_hat, sigma2_hat, m, va, eps_pe)?;
    Ok(EstimationOutcome {
        t_hat,
        sigma2_hat,
        m,
        t_min: bounds.t_min,
        sigma2_max: bounds.sigma2_max,
        eps_pe,
        below_gaussian_floor: bounds.below_gaussian_floor,
    })
}
