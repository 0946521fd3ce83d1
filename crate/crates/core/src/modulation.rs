//! Modulation-dependent correlation strength Z of the entanglement-based
//! protocol picture.
//!
//! Four modulations are supported: Gaussian, two-state, four-state, and the
//! continuous eight-dimensional modulation. Their correlation strengths obey
//! Z2 < Z4 < Z8 < Z_Gauss for every modulation variance, and all converge to
//! sqrt(2 V_A) as V_A -> 0.

use crate::error::{Error, Result};

/// Modulation scheme of the prepare-and-measure protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    /// Continuous Gaussian modulation of coherent states.
    Gaussian,
    /// Binary modulation (two coherent states).
    TwoState,
    /// Quaternary modulation (four coherent states).
    FourState,
    /// Continuous eight-dimensional modulation.
    EightDim,
}

/// Distribution of Alice's disclosed quadrature samples under a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLaw {
    /// x ~ N(0, V_A).
    Normal,
    /// x = +/- sqrt(V_A), equiprobable.
    BernoulliSymmetric,
    /// No law is specified for this scheme; x ~ N(0, V_A) is used as a proxy.
    NormalProxy,
}

impl Modulation {
    /// All supported schemes, in increasing order of correlation strength.
    pub const ALL: [Modulation; 4] = [
        Modulation::TwoState,
        Modulation::FourState,
        Modulation::EightDim,
        Modulation::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Gaussian => "gaussian",
            Modulation::TwoState => "twostate",
            Modulation::FourState => "fourstate",
            Modulation::EightDim => "eightdim",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Modulation::Gaussian),
            "twostate" | "two-state" | "2state" => Ok(Modulation::TwoState),
            "fourstate" | "four-state" | "4state" => Ok(Modulation::FourState),
            "eightdim" | "eight-dim" | "8dim" => Ok(Modulation::EightDim),
            other => Err(Error::domain(format!("unknown modulation scheme `{other}`"))),
        }
    }

    /// The distribution of the disclosed estimation samples for this scheme.
    pub fn sample_law(self) -> SampleLaw {
        match self {
            Modulation::Gaussian => SampleLaw::Normal,
            Modulation::TwoState | Modulation::FourState => SampleLaw::BernoulliSymmetric,
            Modulation::EightDim => SampleLaw::NormalProxy,
        }
    }
}

/// Modulation scheme together with Alice's modulation variance V_A
/// (shot-noise units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSpec {
    scheme: Modulation,
    va: f64,
}

impl ProtocolSpec {
    pub fn new(scheme: Modulation, va: f64) -> Result<Self> {
        if !(va > 0.0) || !va.is_finite() {
            return Err(Error::domain(format!(
                "modulation variance must be positive and finite, got {va}"
            )));
        }
        Ok(ProtocolSpec { scheme, va })
    }

    pub fn scheme(&self) -> Modulation {
        self.scheme
    }

    pub fn va(&self) -> f64 {
        self.va
    }

    /// Same scheme, different modulation variance.
    pub fn with_va(&self, va: f64) -> Result<Self> {
        ProtocolSpec::new(self.scheme, va)
    }
}

/// Relative term size below which the eight-dimensional series is truncated.
const Z8_SERIES_TOL: f64 = 1e-15;

/// Correlation strength Z of the scheme at its modulation variance.
pub fn correlation_strength(spec: &ProtocolSpec) -> f64 {
    let va = spec.va;
    match spec.scheme {
        Modulation::Gaussian => z_gaussian(va),
        Modulation::TwoState => z_two_state(va),
        Modulation::FourState => z_four_state(va),
        Modulation::EightDim => z_eight_dim(va),
    }
}

fn z_gaussian(va: f64) -> f64 {
    (va * va + 2.0 * va).sqrt()
}

fn z_two_state(va: f64) -> f64 {
    // 1 - e^{-2 V_A} via expm1 keeps the small-V_A limit sqrt(2 V_A) exact.
    va * (1.0 + (-2.0 * va).exp()) / (-(-2.0 * va).exp_m1()).sqrt()
}

fn z_four_state(va: f64) -> f64 {
    let (l0, l1, l2, l3) = lambdas(va);
    va * (l0.powf(1.5) / l1.sqrt()
        + l1.powf(1.5) / l2.sqrt()
        + l2.powf(1.5) / l3.sqrt()
        + l3.powf(1.5) / l0.sqrt())
}

/// Z8 = (1/2) e^{-2 V_A} sum_k sqrt(k+4)/k! (2 V_A)^{k+1/2}.
///
/// The series argument must be 2 V_A for the chain Z2 < Z4 < Z8 < Z_Gauss to
/// hold (with V_A instead, Z8 would decay exponentially and fall below Z2
/// already at small variances).
fn z_eight_dim(va: f64) -> f64 {
    let w = 2.0 * va;
    let mut term = 2.0; // k = 0: sqrt(4) * w^0 / 0!
    let mut sum = term;
    let mut k = 0u32;
    loop {
        let kf = f64::from(k);
        term *= w / (kf + 1.0) * ((kf + 5.0) / (kf + 4.0)).sqrt();
        sum += term;
        k += 1;
        if term < Z8_SERIES_TOL * sum && w < kf + 1.0 {
            break;
        }
        assert!(k < 10_000, "eight-dimensional series failed to converge");
    }
    0.5 * (-w).exp() * w.sqrt() * sum
}

/// The four state-occupation weights of the four-state protocol.
///
/// For small variances the closed forms lose the trailing weights to
/// cancellation, so the defining power series (all terms positive) is used
/// below V_A = 1.
pub fn fourstate_lambdas(va: f64) -> Result<(f64, f64, f64, f64)> {
    if !(va > 0.0) || !va.is_finite() {
        return Err(Error::domain(format!(
            "modulation variance must be positive and finite, got {va}"
        )));
    }
    Ok(lambdas(va))
}

fn lambdas(va: f64) -> (f64, f64, f64, f64) {
    let x = va / 2.0;
    if va < 1.0 {
        // lambda_k = e^{-x} sum_j x^{4j+k} / (4j+k)!
        let scale = (-x).exp();
        let mut l = [0.0f64; 4];
        for (k, lk) in l.iter_mut().enumerate() {
            let mut term = x.powi(k as i32) / factorial(k as u32);
            let mut sum = term;
            let mut p = k as u32;
            while term > f64::EPSILON * sum {
                term *= x.powi(4)
                    / (f64::from(p + 1) * f64::from(p + 2) * f64::from(p + 3) * f64::from(p + 4));
                sum += term;
                p += 4;
            }
            *lk = scale * sum;
        }
        (l[0], l[1], l[2], l[3])
    } else {
        // e^{-x} cosh x = (1 + e^{-2x})/2, e^{-x} sinh x = -expm1(-2x)/2
        let even = (1.0 + (-va).exp()) / 4.0;
        let odd = -(-va).exp_m1() / 4.0;
        let osc = 0.5 * (-x).exp();
        (
            even + osc * x.cos(),
            odd + osc * x.sin(),
            even - osc * x.cos(),
            odd - osc * x.sin(),
        )
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(scheme: Modulation, va: f64) -> ProtocolSpec {
        ProtocolSpec::new(scheme, va).unwrap()
    }

    #[test]
    fn gaussian_at_unit_variance() {
        assert_relative_eq!(
            correlation_strength(&spec(Modulation::Gaussian, 1.0)),
            3f64.sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn two_state_small_variance_limit() {
        // Z2(V_A) -> sqrt(2 V_A), within 0.1% already at V_A = 1e-6
        let va = 1e-6;
        let z = correlation_strength(&spec(Modulation::TwoState, va));
        assert_relative_eq!(z, (2.0 * va).sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn four_state_oracle_value() {
        // arbitrary-precision evaluation of the lambda-series formula
        let z = correlation_strength(&spec(Modulation::FourState, 0.5));
        assert_relative_eq!(z, 1.096544019795163624, max_relative = 1e-13);
        let z1 = correlation_strength(&spec(Modulation::FourState, 1.0));
        assert_relative_eq!(z1, 1.6554190361611755243, max_relative = 1e-13);
    }

    #[test]
    fn eight_dim_oracle_values() {
        // arbitrary-precision sums of the series
        let cases = [
            (0.5, 1.1127929357284736729),
            (1.0, 1.7204413397447569555),
            (2.0, 2.8064805930977840648),
        ];
        for (va, want) in cases {
            let z = correlation_strength(&spec(Modulation::EightDim, va));
            assert_relative_eq!(z, want, max_relative = 1e-13);
        }
    }

    #[test]
    fn lambdas_oracle_values() {
        let (l0, l1, l2, l3) = fourstate_lambdas(2.0).unwrap();
        assert_relative_eq!(l0, 0.38321687598235964329, max_relative = 1e-14);
        assert_relative_eq!(l1, 0.37094611701740292625, max_relative = 1e-14);
        assert_relative_eq!(l2, 0.18445076563594670266, max_relative = 1e-14);
        assert_relative_eq!(l3, 0.061386241364290727805, max_relative = 1e-14);

        let (l0, l1, l2, l3) = fourstate_lambdas(0.5).unwrap();
        assert_relative_eq!(l0, 0.77892754130608906647, max_relative = 1e-14);
        assert_relative_eq!(l1, 0.19470653367303584459, max_relative = 1e-14);
        assert_relative_eq!(l2, 0.024337788550227645331, max_relative = 1e-14);
        assert_relative_eq!(l3, 0.0020281364706474436114, max_relative = 1e-14);
    }

    #[test]
    fn lambdas_sum_to_one_and_nonnegative() {
        for &va in &[1e-3, 1e-2, 0.1, 0.5, 0.999, 1.0, 1.001, 2.0, 10.0, 50.0, 100.0] {
            let (l0, l1, l2, l3) = fourstate_lambdas(va).unwrap();
            assert_relative_eq!(l0 + l1 + l2 + l3, 1.0, max_relative = 1e-14);
            for l in [l0, l1, l2, l3] {
                assert!(l >= 0.0, "lambda < 0 at va={va}: {l}");
            }
        }
    }

    #[test]
    fn lambdas_series_matches_closed_form_at_crossover() {
        // both branches evaluated just around the va = 1 switch
        let a = lambdas(1.0 - 1e-9);
        let b = lambdas(1.0 + 1e-9);
        assert_relative_eq!(a.0, b.0, max_relative = 1e-8);
        assert_relative_eq!(a.1, b.1, max_relative = 1e-8);
        assert_relative_eq!(a.2, b.2, max_relative = 1e-7);
        assert_relative_eq!(a.3, b.3, max_relative = 1e-7);
    }

    #[test]
    fn z_ordering_on_log_grid() {
        // Z2 < Z4 < Z8 < Z_Gauss. Above V_A ~ 35 the Z4 - Z2 gap,
        // ~ (3/2) V_A e^{-V_A}, falls below one ulp of V_A and the strict
        // comparison is not representable in f64, so strictness is asserted
        // up to 10^1.5 and non-strict ordering beyond.
        for i in 0..100 {
            let va = 10f64.powf(-3.0 + 5.0 * f64::from(i) / 99.0);
            let z2 = correlation_strength(&spec(Modulation::TwoState, va));
            let z4 = correlation_strength(&spec(Modulation::FourState, va));
            let z8 = correlation_strength(&spec(Modulation::EightDim, va));
            let zg = correlation_strength(&spec(Modulation::Gaussian, va));
            if va <= 10f64.powf(1.5) {
                assert!(z2 < z4, "Z2 < Z4 failed at va={va}: {z2} vs {z4}");
            } else {
                assert!(z2 <= z4 * (1.0 + 1e-14), "Z2 <= Z4 failed at va={va}");
            }
            assert!(z4 < z8, "Z4 < Z8 failed at va={va}: {z4} vs {z8}");
            assert!(z8 < zg, "Z8 < ZG failed at va={va}: {z8} vs {zg}");
        }
    }

    #[test]
    fn z_strictly_increasing_in_va() {
        for scheme in Modulation::ALL {
            let mut prev = 0.0;
            for i in 0..200 {
                let va = 10f64.powf(-3.0 + 5.0 * f64::from(i) / 199.0);
                let z = correlation_strength(&spec(scheme, va));
                assert!(
                    z > prev,
                    "{} not increasing at va={va}: {z} <= {prev}",
                    scheme.name()
                );
                prev = z;
            }
        }
    }

    #[test]
    fn z8_truncation_is_converged() {
        // doubling the term count changes the result by < 1e-12 relative
        for &va in &[0.01, 0.5, 1.0, 10.0, 100.0] {
            let w = 2.0 * va;
            let reference = |n_terms: u32| -> f64 {
                let mut term = 2.0;
                let mut sum = term;
                for k in 0..n_terms {
                    let kf = f64::from(k);
                    term *= w / (kf + 1.0) * ((kf + 5.0) / (kf + 4.0)).sqrt();
                    sum += term;
                }
                0.5 * (-w).exp() * w.sqrt() * sum
            };
            // enough terms that the tolerance rule must have triggered
            let n = (4.0 * w + 60.0) as u32;
            let once = reference(n);
            let twice = reference(2 * n);
            assert_relative_eq!(once, twice, max_relative = 1e-12);
            let z = correlation_strength(&spec(Modulation::EightDim, va));
            assert_relative_eq!(z, twice, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_variance() {
        assert!(ProtocolSpec::new(Modulation::Gaussian, 0.0).is_err());
        assert!(ProtocolSpec::new(Modulation::Gaussian, -1.0).is_err());
        assert!(ProtocolSpec::new(Modulation::Gaussian, f64::NAN).is_err());
        assert!(fourstate_lambdas(0.0).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for scheme in Modulation::ALL {
            assert_eq!(Modulation::from_name(scheme.name()).unwrap(), scheme);
        }
        assert!(Modulation::from_name("hexagonal").is_err());
    }
}
