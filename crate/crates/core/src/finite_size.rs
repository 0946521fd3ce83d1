//! Finite-size corrections and secret-key-rate assembly.
//!
//! The finite-size rate per channel use is
//! k = (n/N) (beta I(x:y) - chi_worst(y:E) - Delta(n)),
//! where Delta(n) penalizes privacy amplification on a finite raw key and
//! chi_worst is the Holevo bound at the worst-case channel compatible with
//! the parameter estimation. Negative rates are reported as such, never
//! clamped: scans need the location of the sign change.

use crate::error::{Error, Result};
use crate::estimation::{expected_bounds, worst_case_cov_from_bounds, ConfidenceBounds};
use crate::gaussian::{holevo_bound, mutual_info_at, ChannelModel};
use crate::modulation::ProtocolSpec;

/// Failure probabilities of the protocol components. The total failure
/// probability is their sum (valid in the small-parameter limit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityBudget {
    eps_pe: f64,
    eps_ec: f64,
    eps_bar: f64,
    eps_pa: f64,
}

impl SecurityBudget {
    pub fn new(eps_pe: f64, eps_ec: f64, eps_bar: f64, eps_pa: f64) -> Result<Self> {
        for (name, e) in [
            ("eps_pe", eps_pe),
            ("eps_ec", eps_ec),
            ("eps_bar", eps_bar),
            ("eps_pa", eps_pa),
        ] {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Budget(format!("{name} must lie in (0, 1), got {e}")));
            }
        }
        let total = eps_pe + eps_ec + eps_bar + eps_pa;
        if total >= 1.0 {
            return Err(Error::Budget(format!("total failure probability {total} >= 1")));
        }
        Ok(SecurityBudget { eps_pe, eps_ec, eps_bar, eps_pa })
    }

    /// The reference budget: every component at 1e-10.
    pub fn defaults() -> Self {
        SecurityBudget::new(1e-10, 1e-10, 1e-10, 1e-10).expect("default budget is valid")
    }

    pub fn eps_pe(&self) -> f64 {
        self.eps_pe
    }

    pub fn eps_ec(&self) -> f64 {
        self.eps_ec
    }

    pub fn eps_bar(&self) -> f64 {
        self.eps_bar
    }

    pub fn eps_pa(&self) -> f64 {
        self.eps_pa
    }

    /// Total failure probability eps = eps_PE + eps_EC + eps_bar + eps_PA.
    pub fn total(&self) -> f64 {
        self.eps_pe + self.eps_ec + self.eps_bar + self.eps_pa
    }

    /// Same budget with the smoothing / privacy-amplification pair replaced.
    pub fn with_split(&self, eps_bar: f64, eps_pa: f64) -> Result<Self> {
        SecurityBudget::new(self.eps_pe, self.eps_ec, eps_bar, eps_pa)
    }
}

/// How the N exchanged signals are divided between key establishment (n)
/// and parameter estimation (m), and the alphabet of the raw-key variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    n_key: u64,
    n_est: u64,
    dim_key_alphabet: u32,
}

impl BlockPlan {
    pub fn new(n_key: u64, n_est: u64, dim_key_alphabet: u32) -> Result<Self> {
        if n_key == 0 {
            return Err(Error::domain("raw-key size n must be positive".to_string()));
        }
        if dim_key_alphabet < 2 {
            return Err(Error::domain(format!(
                "raw-key alphabet dimension must be >= 2, got {dim_key_alphabet}"
            )));
        }
        Ok(BlockPlan { n_key, n_est, dim_key_alphabet })
    }

    /// Splits a total block of N signals, disclosing round(frac * N) of them
    /// for estimation. The raw key is encoded on bits (dim 2).
    pub fn split(n_total: u64, est_fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&est_fraction) {
            return Err(Error::domain(format!(
                "estimation fraction must lie in [0, 1), got {est_fraction}"
            )));
        }
        if n_total == 0 {
            return Err(Error::domain("total block size must be positive".to_string()));
        }
        let n_est = ((n_total as f64) * est_fraction).round() as u64;
        let n_est = n_est.min(n_total - 1);
        BlockPlan::new(n_total - n_est, n_est, 2)
    }

    pub fn n_total(&self) -> u64 {
        self.n_key + self.n_est
    }

    pub fn n_key(&self) -> u64 {
        self.n_key
    }

    pub fn n_est(&self) -> u64 {
        self.n_est
    }

    pub fn dim_key_alphabet(&self) -> u32 {
        self.dim_key_alphabet
    }

    /// n / N, the fraction of signals contributing to the key.
    pub fn key_fraction(&self) -> f64 {
        self.n_key as f64 / self.n_total() as f64
    }
}

/// Privacy-amplification penalty
/// Delta(n) = (2 dim + 3) sqrt(log2(2/eps_bar) / n) + (2/n) log2(1/eps_PA).
pub fn delta_n(plan: &BlockPlan, budget: &SecurityBudget) -> f64 {
    delta_n_raw(plan.n_key, plan.dim_key_alphabet, budget.eps_bar, budget.eps_pa)
}

/// Delta(n) with the parameters spelled out.
pub fn delta_n_raw(n_key: u64, dim: u32, eps_bar: f64, eps_pa: f64) -> f64 {
    let n = n_key as f64;
    f64::from(2 * dim + 3) * ((2.0 / eps_bar).log2() / n).sqrt()
        + 2.0 / n * (1.0 / eps_pa).log2()
}

/// Reconciliation-efficiency conversion for symmetric binary variables:
/// f_EC = (1 - beta (1 - H(x|y))) / H(x|y). beta = 0 is allowed as the
/// no-information limit, where f_EC = 1/H(x|y).
pub fn fec_from_beta(beta: f64, h_xy: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::domain(format!("beta must lie in [0, 1], got {beta}")));
    }
    if !(h_xy > 0.0 && h_xy < 1.0) {
        return Err(Error::domain(format!(
            "conditional entropy must lie in (0, 1), got {h_xy}"
        )));
    }
    Ok((1.0 - beta * (1.0 - h_xy)) / h_xy)
}

/// Reconciliation leakage per key symbol:
/// leak_EC / n = f_EC H(x|y) + (1/n) log2(2/eps_EC).
pub fn leak_ec(plan: &BlockPlan, f_ec: f64, h_xy: f64, eps_ec: f64) -> f64 {
    f_ec * h_xy + (2.0 / eps_ec).log2() / plan.n_key as f64
}

/// Whether a report corresponds to a distillable key or an aborted run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyStatus {
    /// The finite-size rate is positive.
    Distillable,
    /// beta I <= chi + Delta: the parties abort.
    Abort,
}

/// Finite-size secret-key-rate evaluation at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateReport {
    /// Alice-Bob mutual information, bits per channel use.
    pub i_xy: f64,
    /// Worst-case Holevo bound chi(y:E), bits per channel use.
    pub chi_ye: f64,
    /// Privacy-amplification penalty Delta(n).
    pub delta_n: f64,
    /// (n/N)(beta I - chi - Delta); negative when not distillable.
    pub rate: f64,
    /// Worst-case channel slope used for chi.
    pub worst_t: f64,
    /// Worst-case noise variance used for chi.
    pub worst_sigma2: f64,
    pub status: KeyStatus,
}

/// Assembles the finite-size rate from precomputed ingredients.
pub fn keyrate_finite(
    plan: &BlockPlan,
    budget: &SecurityBudget,
    beta: f64,
    i_xy: f64,
    chi_worst: f64,
    worst_t: f64,
    worst_sigma2: f64,
) -> KeyRateReport {
    let delta = delta_n(plan, budget);
    let rate = plan.key_fraction() * (beta * i_xy - chi_worst - delta);
    KeyRateReport {
        i_xy,
        chi_ye: chi_worst,
        delta_n: delta,
        rate,
        worst_t,
        worst_sigma2,
        status: if rate > 0.0 { KeyStatus::Distillable } else { KeyStatus::Abort },
    }
}

/// Asymptotic rate beta I(x:y) - chi(y:E), bits per channel use.
pub fn keyrate_asymptotic(beta: f64, i_xy: f64, chi: f64) -> f64 {
    beta * i_xy - chi
}

/// Finite-size rate for estimators at given observed values
/// (t_hat, sigma2_hat): confidence bounds, worst-case covariance, Holevo
/// bound and assembly in one call. This is f(t_hat, sigma2_hat) in the
/// expected-rate analysis.
pub fn keyrate_from_estimates(
    spec: &ProtocolSpec,
    t_hat: f64,
    sigma2_hat: f64,
    plan: &BlockPlan,
    budget: &SecurityBudget,
    beta: f64,
) -> Result<KeyRateReport> {
    let bounds = crate::estimation::confidence_bounds(
        t_hat,
        sigma2_hat,
        plan.n_est(),
        spec.va(),
        budget.eps_pe(),
    )?;
    keyrate_from_bounds(spec, t_hat, sigma2_hat, &bounds, plan, budget, beta)
}

/// Expected finite-size rate k1: the pipeline evaluated at the estimators'
/// expected values (sqrt(T), 1 + T xi).
pub fn expected_keyrate(
    spec: &ProtocolSpec,
    ch: &ChannelModel,
    plan: &BlockPlan,
    budget: &SecurityBudget,
    beta: f64,
) -> Result<KeyRateReport> {
    let bounds = expected_bounds(ch, plan.n_est(), spec.va(), budget.eps_pe())?;
    keyrate_from_bounds(spec, ch.t_slope(), ch.sigma2(), &bounds, plan, budget, beta)
}

fn keyrate_from_bounds(
    spec: &ProtocolSpec,
    t_hat: f64,
    sigma2_hat: f64,
    bounds: &ConfidenceBounds,
    plan: &BlockPlan,
    budget: &SecurityBudget,
    beta: f64,
) -> Result<KeyRateReport> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::domain(format!("beta must lie in (0, 1], got {beta}")));
    }
    let cov = worst_case_cov_from_bounds(spec, bounds)?;
    let chi = holevo_bound(&cov)?;
    let i_xy = mutual_info_at(spec.va(), t_hat, sigma2_hat);
    Ok(keyrate_finite(plan, budget, beta, i_xy, chi, bounds.t_min, bounds.sigma2_max))
}
