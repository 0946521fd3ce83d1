//! Synthetic-channel sampling and statistical validation of the estimation
//! procedure.
//!
//! Trials draw from the normal linear model y = t x + z with x distributed
//! according to the modulation scheme. Each trial consumes its own
//! counter-indexed random stream, so results are reproducible from the seed
//! and independent of scheduling; all floating-point reductions happen in
//! trial order after the parallel phase.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{confidence_bounds, ml_estimators};
use crate::finite_size::{keyrate_from_estimates, BlockPlan, SecurityBudget};
use crate::gaussian::ChannelModel;
use crate::modulation::{ProtocolSpec, SampleLaw};
use crate::quadrature::adaptive_simpson;
use crate::special::{chi2_cdf, kolmogorov_sf, normal_cdf, normal_pdf};

/// Configuration of a batch of synthetic estimation trials.
#[derive(Debug, Clone, Copy)]
pub struct TrialConfig {
    true_t: f64,
    true_sigma2: f64,
    spec: ProtocolSpec,
    m: usize,
    trials: usize,
    seed: u64,
}

impl TrialConfig {
    pub fn new(
        true_t: f64,
        true_sigma2: f64,
        spec: ProtocolSpec,
        m: usize,
        trials: usize,
        seed: u64,
    ) -> Result<Self> {
        if !true_t.is_finite() {
            return Err(Error::domain(format!("slope must be finite, got {true_t}")));
        }
        if !(true_sigma2 >= 0.0) || !true_sigma2.is_finite() {
            return Err(Error::domain(format!(
                "noise variance must be >= 0, got {true_sigma2}"
            )));
        }
        if m < 2 {
            return Err(Error::domain(format!("need at least 2 samples per trial, got {m}")));
        }
        if trials == 0 {
            return Err(Error::domain("need at least one trial".to_string()));
        }
        Ok(TrialConfig { true_t, true_sigma2, spec, m, trials, seed })
    }

    pub fn true_t(&self) -> f64 {
        self.true_t
    }

    pub fn true_sigma2(&self) -> f64 {
        self.true_sigma2
    }

    pub fn spec(&self) -> &ProtocolSpec {
        &self.spec
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    /// Whether the scheme has no specified estimation-sample law and the
    /// Gaussian proxy is drawn instead.
    pub fn uses_gaussian_proxy(&self) -> bool {
        self.spec.scheme().sample_law() == SampleLaw::NormalProxy
    }
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One batch of correlated samples (x, y) from stream 0.
pub fn sample_pairs(cfg: &TrialConfig) -> (Vec<f64>, Vec<f64>) {
    sample_pairs_for_trial(cfg, 0)
}

/// The sample batch of a given trial index; disjoint streams per index.
pub fn sample_pairs_for_trial(cfg: &TrialConfig, trial: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = trial_rng(cfg.seed, trial);
    let sqrt_va = cfg.spec.va().sqrt();
    let sigma = cfg.true_sigma2.sqrt();
    let mut xs = Vec::with_capacity(cfg.m);
    let mut ys = Vec::with_capacity(cfg.m);
    for _ in 0..cfg.m {
        let x = match cfg.spec.scheme().sample_law() {
            SampleLaw::Normal | SampleLaw::NormalProxy => {
                sqrt_va * rng.sample::<f64, _>(StandardNormal)
            }
            SampleLaw::BernoulliSymmetric => {
                if rng.random::<bool>() {
                    sqrt_va
                } else {
                    -sqrt_va
                }
            }
        };
        let z: f64 = rng.sample::<f64, _>(StandardNormal);
        xs.push(x);
        ys.push(cfg.true_t * x + sigma * z);
    }
    (xs, ys)
}

/// Kolmogorov-Smirnov statistic of `values` against the uniform law on
/// (0, 1), together with the asymptotic p-value.
fn ks_uniform(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
    let n = values.len() as f64;
    let mut d = 0.0f64;
    for (i, &u) in values.iter().enumerate() {
        let lo = u - i as f64 / n;
        let hi = (i + 1) as f64 / n - u;
        d = d.max(lo).max(hi);
    }
    let sqrt_n = n.sqrt();
    let p = kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
    (d, p)
}

/// Outcome of the estimator-law validation.
#[derive(Debug, Clone, Copy)]
pub struct DistributionReport {
    pub trials: usize,
    /// KS statistic and p-value of t_hat against N(t, sigma^2 / sum x_i^2),
    /// conditioned per trial on the realized sum x_i^2.
    pub ks_stat_t: f64,
    pub p_value_t: f64,
    /// KS statistic and p-value of m sigma2_hat / sigma^2 against
    /// chi-squared with m - 1 degrees of freedom.
    pub ks_stat_sigma2: f64,
    pub p_value_sigma2: f64,
    /// Empirical Pearson correlation between the two estimators.
    pub corr_t_sigma2: f64,
    /// Set when the scheme's sample law is the Gaussian proxy.
    pub gaussian_proxy: bool,
}

/// Draws `trials` independent batches, estimates each, and tests the
/// estimator sampling laws via the probability integral transform.
pub fn estimator_distribution_check(cfg: &TrialConfig) -> Result<DistributionReport> {
    if cfg.true_sigma2 <= 0.0 {
        return Err(Error::domain(
            "estimator laws are degenerate at zero noise variance".to_string(),
        ));
    }
    let per_trial: Vec<(f64, f64, f64, f64)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let (xs, ys) = sample_pairs_for_trial(cfg, trial);
            let (t_hat, s2_hat) = ml_estimators(&xs, &ys).expect("synthetic batch is non-degenerate");
            let sum_xx: f64 = xs.iter().map(|v| v * v).sum();
            let u = normal_cdf((t_hat - cfg.true_t) * sum_xx.sqrt() / cfg.true_sigma2.sqrt());
            let v = chi2_cdf(cfg.m as f64 * s2_hat / cfg.true_sigma2, (cfg.m - 1) as f64);
            (u, v, t_hat, s2_hat)
        })
        .collect();

    let mut u: Vec<f64> = per_trial.iter().map(|r| r.0).collect();
    let mut v: Vec<f64> = per_trial.iter().map(|r| r.1).collect();
    let (ks_t, p_t) = ks_uniform(&mut u);
    let (ks_s, p_s) = ks_uniform(&mut v);

    let n = cfg.trials as f64;
    let mean_t = per_trial.iter().map(|r| r.2).sum::<f64>() / n;
    let mean_s = per_trial.iter().map(|r| r.3).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_t = 0.0;
    let mut var_s = 0.0;
    for r in &per_trial {
        let dt = r.2 - mean_t;
        let ds = r.3 - mean_s;
        cov += dt * ds;
        var_t += dt * dt;
        var_s += ds * ds;
    }
    let corr = if var_t > 0.0 && var_s > 0.0 { cov / (var_t * var_s).sqrt() } else { 0.0 };

    Ok(DistributionReport {
        trials: cfg.trials,
        ks_stat_t: ks_t,
        p_value_t: p_t,
        ks_stat_sigma2: ks_s,
        p_value_sigma2: p_s,
        corr_t_sigma2: corr,
        gaussian_proxy: cfg.uses_gaussian_proxy(),
    })
}

/// Fraction of trials whose confidence rectangle contains the true
/// parameters: t >= t_min and sigma^2 <= sigma2_max.
pub fn coverage_experiment(cfg: &TrialConfig, eps_pe: f64) -> Result<f64> {
    // probe the bound computation once so parameter errors surface eagerly
    confidence_bounds(cfg.true_t, cfg.true_sigma2, cfg.m as u64, cfg.spec.va(), eps_pe)?;
    let hits: u64 = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let (xs, ys) = sample_pairs_for_trial(cfg, trial);
            let (t_hat, s2_hat) = ml_estimators(&xs, &ys).expect("synthetic batch is non-degenerate");
            let b = confidence_bounds(t_hat, s2_hat, cfg.m as u64, cfg.spec.va(), eps_pe)
                .expect("bounds on synthetic estimates");
            u64::from(cfg.true_t >= b.t_min && cfg.true_sigma2 <= b.sigma2_max)
        })
        .sum();
    Ok(hits as f64 / cfg.trials as f64)
}

/// Expectation of `f` under a normal law, integrated over
/// mean +/- half_width_sds standard deviations by adaptive quadrature.
pub fn gaussian_expectation<F>(
    mean: f64,
    sd: f64,
    half_width_sds: f64,
    abs_tol: f64,
    f: F,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(sd > 0.0) {
        return Err(Error::domain(format!("standard deviation must be positive, got {sd}")));
    }
    let integrand = |s: f64| {
        let w = normal_pdf((s - mean) / sd) / sd;
        Ok(w * f(s)?)
    };
    adaptive_simpson(
        &integrand,
        mean - half_width_sds * sd,
        mean + half_width_sds * sd,
        abs_tol,
        48,
    )
}

/// Quadrature half-width, in standard deviations of sigma2_hat. Truncation
/// outside +/- 8 sd leaves less than 1e-15 of the mass.
const K2_HALF_WIDTH_SDS: f64 = 8.0;

/// Absolute quadrature tolerance on the expected rate, in bits.
const K2_ABS_TOL: f64 = 1e-6;

/// Expected secret-key rate k2 = E[f(t_hat, sigma2_hat)], integrating the
/// full finite-size pipeline over the sampling law of sigma2_hat
/// (normal with variance 2 sigma^4 / m for large m) while holding t_hat at
/// its expectation sqrt(T).
pub fn expected_keyrate_k2(
    spec: &ProtocolSpec,
    ch: &ChannelModel,
    plan: &BlockPlan,
    budget: &SecurityBudget,
    beta: f64,
) -> Result<f64> {
    let m = plan.n_est();
    if m == 0 {
        return Err(Error::domain(
            "expected key rate requires estimation samples (m >= 1)".to_string(),
        ));
    }
    let sigma2 = ch.sigma2();
    let sd = sigma2 * (2.0 / m as f64).sqrt();
    let t = ch.t_slope();
    gaussian_expectation(sigma2, sd, K2_HALF_WIDTH_SDS, K2_ABS_TOL, |s| {
        Ok(keyrate_from_estimates(spec, t, s, plan, budget, beta)?.rate)
    })
}
