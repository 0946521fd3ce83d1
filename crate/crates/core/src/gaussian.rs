//! Two-mode Gaussian state analysis: covariance matrix of the
//! entanglement-based protocol, symplectic spectrum, Holevo bound for
//! reverse reconciliation with homodyne detection, and the Alice-Bob
//! mutual information of the Gaussian channel.

use crate::error::{Error, Result};
use crate::modulation::{correlation_strength, ProtocolSpec};

/// Tolerance on the physicality constraints a,b >= 1 and a*b - c^2 >= 1.
/// Violations within the tolerance are treated as rounding and clamped;
/// anything larger is rejected.
const PHYSICALITY_TOL: f64 = 1e-9;

/// Fiber loss model: 0.2 dB/km, i.e. 10^(-0.02 d) power transmission.
const LOSS_EXPONENT_PER_KM: f64 = 0.02;

/// Gaussian channel parameters in shot-noise units.
///
/// `t_lin` is the total power transmission including the detector
/// efficiency `eta`; `xi` is the excess noise referred to the channel input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    t_lin: f64,
    xi: f64,
    eta: f64,
    dist_km: f64,
}

impl ChannelModel {
    /// Channel at a fiber distance of `dist_km` kilometers:
    /// T = eta * 10^(-0.02 d).
    pub fn from_distance(eta: f64, dist_km: f64, xi: f64) -> Result<Self> {
        Self::validate_eta_xi(eta, xi)?;
        if !(dist_km >= 0.0) || !dist_km.is_finite() {
            return Err(Error::domain(format!("distance must be >= 0 km, got {dist_km}")));
        }
        let t_lin = eta * 10f64.powf(-LOSS_EXPONENT_PER_KM * dist_km);
        Ok(ChannelModel { t_lin, xi, eta, dist_km })
    }

    /// Channel with a given total transmission; the equivalent fiber
    /// distance is derived from the 0.2 dB/km loss model.
    pub fn from_transmission(t_lin: f64, eta: f64, xi: f64) -> Result<Self> {
        Self::validate_eta_xi(eta, xi)?;
        if !(t_lin > 0.0 && t_lin <= 1.0) {
            return Err(Error::domain(format!(
                "transmission must lie in (0, 1], got {t_lin}"
            )));
        }
        if t_lin > eta {
            return Err(Error::domain(format!(
                "transmission {t_lin} exceeds detector efficiency {eta}"
            )));
        }
        let dist_km = -(t_lin / eta).log10() / LOSS_EXPONENT_PER_KM;
        Ok(ChannelModel { t_lin, xi, eta, dist_km })
    }

    fn validate_eta_xi(eta: f64, xi: f64) -> Result<()> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::domain(format!("eta must lie in (0, 1], got {eta}")));
        }
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(Error::domain(format!("excess noise must be >= 0, got {xi}")));
        }
        Ok(())
    }

    pub fn t_lin(&self) -> f64 {
        self.t_lin
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dist_km(&self) -> f64 {
        self.dist_km
    }

    /// sqrt(T), the slope of the normal linear model relating Alice's and
    /// Bob's quadratures.
    pub fn t_slope(&self) -> f64 {
        self.t_lin.sqrt()
    }

    /// 1 + T xi, the noise variance of Bob's quadrature conditioned on x.
    pub fn sigma2(&self) -> f64 {
        1.0 + self.t_lin * self.xi
    }
}

/// Symmetrized two-mode covariance matrix
/// [[a I2, c sigma_z], [c sigma_z, b I2]] in shot-noise units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeCov {
    a: f64,
    b: f64,
    c: f64,
}

impl TwoModeCov {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::unphysical(format!("non-finite entries (a={a}, b={b}, c={c})")));
        }
        if a < 1.0 - PHYSICALITY_TOL || b < 1.0 - PHYSICALITY_TOL {
            return Err(Error::unphysical(format!(
                "mode variance below shot noise (a={a}, b={b})"
            )));
        }
        let det = a * b - c * c;
        if det < 1.0 - PHYSICALITY_TOL {
            return Err(Error::unphysical(format!(
                "uncertainty bound violated: a*b - c^2 = {det} < 1 \
                 (a={a}, b={b}, c={c})"
            )));
        }
        Ok(TwoModeCov { a, b, c })
    }

    /// Covariance matrix for channel parameters expressed as the linear-model
    /// pair (t, sigma^2) = (sqrt(T), 1 + T xi):
    /// a = V_A + 1, b = t^2 V_A + sigma^2, c = t Z.
    pub fn from_t_sigma2(spec: &ProtocolSpec, t: f64, sigma2: f64) -> Result<Self> {
        if !t.is_finite() || !sigma2.is_finite() {
            return Err(Error::domain(format!("non-finite channel pair (t={t}, s2={sigma2})")));
        }
        let va = spec.va();
        let z = correlation_strength(spec);
        TwoModeCov::new(va + 1.0, t * t * va + sigma2, t * z)
    }

    /// Covariance matrix of the state shared through the channel.
    pub fn from_channel(spec: &ProtocolSpec, ch: &ChannelModel) -> Result<Self> {
        TwoModeCov::from_t_sigma2(spec, ch.t_slope(), ch.sigma2())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// The two symplectic eigenvalues (nu1 >= nu2 >= 1) of the covariance matrix.
///
/// nu^2 = (Delta +/- sqrt(Delta^2 - 4 D^2)) / 2 with Delta = a^2 + b^2 - 2c^2
/// and D = a b - c^2. The discriminant is evaluated in the factored form
/// (a-b)^2 ((a+b)^2 - 4c^2), which cannot go negative for physical input
/// except through rounding.
pub fn symplectic_spectrum(cov: &TwoModeCov) -> Result<(f64, f64)> {
    let (a, b, c) = (cov.a, cov.b, cov.c);
    let delta = a * a + b * b - 2.0 * c * c;
    let d = a * b - c * c;
    let sum2 = (a + b) * (a + b);
    let mut factor = sum2 - 4.0 * c * c;
    if factor < 0.0 {
        if factor < -PHYSICALITY_TOL * sum2 {
            return Err(Error::domain(format!(
                "negative symplectic discriminant for (a={a}, b={b}, c={c})"
            )));
        }
        factor = 0.0;
    }
    let disc = ((a - b) * (a - b) * factor).sqrt();
    let nu1 = ((delta + disc) / 2.0).sqrt();
    // nu1 * nu2 = D; dividing avoids the cancellation of Delta - disc
    let nu2 = if nu1 > 0.0 { d / nu1 } else { 0.0 };
    let (nu1, nu2) = (clamp_nu(nu1)?, clamp_nu(nu2)?);
    Ok((nu1.max(nu2), nu1.min(nu2)))
}

fn clamp_nu(nu: f64) -> Result<f64> {
    if nu < 1.0 - PHYSICALITY_TOL {
        return Err(Error::unphysical(format!("symplectic eigenvalue {nu} < 1")));
    }
    Ok(nu.max(1.0))
}

/// Symplectic eigenvalue of Alice's mode conditioned on a homodyne
/// measurement of Bob's quadrature: nu3 = sqrt(a (a - c^2 / b)).
pub fn conditional_eigenvalue_homodyne(cov: &TwoModeCov) -> Result<f64> {
    let (a, b, c) = (cov.a, cov.b, cov.c);
    let reduced = a - c * c / b;
    if reduced < 0.0 {
        return Err(Error::unphysical(format!(
            "conditional variance a - c^2/b = {reduced} < 0"
        )));
    }
    clamp_nu((a * reduced).sqrt())
}

/// Von Neumann entropy of a thermal state with symplectic eigenvalue nu,
/// in bits: g(nu) = ((nu+1)/2) log2((nu+1)/2) - ((nu-1)/2) log2((nu-1)/2).
pub fn g_entropy(nu: f64) -> Result<f64> {
    let nu = clamp_nu(nu)?;
    let hi = (nu + 1.0) / 2.0;
    let lo = (nu - 1.0) / 2.0;
    let tail = if lo > 0.0 { lo * lo.log2() } else { 0.0 };
    Ok(hi * hi.log2() - tail)
}

/// Holevo information chi(y:E) between Eve and Bob's measurement outcome,
/// in bits per channel use: g(nu1) + g(nu2) - g(nu3).
pub fn holevo_bound(cov: &TwoModeCov) -> Result<f64> {
    let (nu1, nu2) = symplectic_spectrum(cov)?;
    let nu3 = conditional_eigenvalue_homodyne(cov)?;
    let chi = g_entropy(nu1)? + g_entropy(nu2)? - g_entropy(nu3)?;
    if chi < -PHYSICALITY_TOL {
        return Err(Error::domain(format!("Holevo bound came out negative: {chi}")));
    }
    Ok(chi.max(0.0))
}

/// Alice-Bob mutual information of the additive-Gaussian-noise channel,
/// in bits per channel use: (1/2) log2(1 + SNR) with SNR = T V_A / (1 + T xi).
pub fn mutual_info(spec: &ProtocolSpec, ch: &ChannelModel) -> f64 {
    mutual_info_at(spec.va(), ch.t_slope(), ch.sigma2())
}

/// Mutual information expressed through the linear-model pair (t, sigma^2);
/// SNR = t^2 V_A / sigma^2.
pub fn mutual_info_at(va: f64, t: f64, sigma2: f64) -> f64 {
    0.5 * (1.0 + t * t * va / sigma2).log2()
}

/// Which effective-dimension functional to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectiveDimensionKind {
    /// 1 / tr(rho^2), the inverse purity.
    Purity,
    /// (tr sqrt(rho))^2, the exponential of the Renyi entropy of order 1/2.
    RenyiHalf,
}

/// Effective dimension of a state given its eigenvalue spectrum.
pub fn effective_dimension(spectrum: &[f64], kind: EffectiveDimensionKind) -> Result<f64> {
    if spectrum.is_empty() {
        return Err(Error::domain("empty spectrum".to_string()));
    }
    let mut total = 0.0;
    for &p in spectrum {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::domain(format!("spectrum entry {p} is not a probability")));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("spectrum sums to {total}, expected 1")));
    }
    Ok(match kind {
        EffectiveDimensionKind::Purity => 1.0 / spectrum.iter().map(|p| p * p).sum::<f64>(),
        EffectiveDimensionKind::RenyiHalf => {
            let s: f64 = spectrum.iter().map(|p| p.sqrt()).sum();
            s * s
        }
    })
}
