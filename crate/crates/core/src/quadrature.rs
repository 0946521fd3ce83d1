//! Adaptive Simpson quadrature over fallible integrands.

use crate::error::{Error, Result};

/// Integrates `f` over [a, b] to the requested absolute tolerance using
/// adaptive Simpson subdivision with Richardson acceptance. Errors from the
/// integrand propagate; exceeding the recursion budget reports
/// non-convergence.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, abs_tol: f64, max_depth: u32) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(abs_tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {abs_tol}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let fa = f(a)?;
    let fm = f(m)?;
    let fb = f(b)?;
    let whole = simpson(a, b, fa, fm, fb);
    simpson_step(f, a, b, fa, fm, fb, whole, abs_tol, max_depth)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let refined = left + right;
    if (refined - whole).abs() <= 15.0 * tol {
        return Ok(refined + (refined - whole) / 15.0);
    }
    if depth == 0 {
        return Err(Error::NonConverged(format!(
            "adaptive Simpson exhausted its subdivision budget on [{a}, {b}]"
        )));
    }
    let half_tol = 0.5 * tol;
    Ok(simpson_step(f, a, m, fa, flm, fm, left, half_tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, half_tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        let cubic = |x: f64| Ok(x * x * x - 2.0 * x + 1.0);
        let got = adaptive_simpson(&cubic, -1.0, 2.0, 1e-12, 40).unwrap();
        // antiderivative x^4/4 - x^2 + x
        assert_relative_eq!(got, 15.0 / 4.0 - 3.0 + 3.0, max_relative = 1e-12);
    }

    #[test]
    fn integrates_gaussian_kernel() {
        let pdf = |x: f64| Ok((-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt());
        let got = adaptive_simpson(&pdf, -8.0, 8.0, 1e-10, 50).unwrap();
        assert_relative_eq!(got, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn propagates_integrand_errors() {
        let f = |x: f64| {
            if x > 0.5 {
                Err(Error::domain("boom".to_string()))
            } else {
                Ok(x)
            }
        };
        assert!(adaptive_simpson(&f, 0.0, 1.0, 1e-6, 20).is_err());
    }

    #[test]
    fn reports_nonconvergence() {
        // a needle the subdivision budget cannot resolve at this tolerance
        let f = |x: f64| Ok(1.0 / (1e-14 + (x - 0.123456).abs()));
        let r = adaptive_simpson(&f, 0.0, 1.0, 1e-12, 4);
        assert!(matches!(r, Err(Error::NonConverged(_))));
    }

    #[test]
    fn empty_interval_is_zero() {
        let f = |_: f64| Ok(3.0);
        assert_eq!(adaptive_simpson(&f, 2.0, 2.0, 1e-9, 10).unwrap(), 0.0);
    }
}
