//! Integral representation of non-integer powers on the right half-plane:
//!
//! `w^s = (-1)^S B(s) int_0^inf (sum_{l<=S} (-lw)^l/l! - e^{-lw}) l^{-(s+1)} dl`
//!
//! with `s = S + sigma`, `B(s) = (sigma)_{S+1} / Gamma(1 - sigma)`, and its
//! `L^1` bound `C(s) |w|^s`, `C(s) = e / min(sigma, 1-sigma) + 1/s`.
//!
//! Evaluation uses homogeneity: with `mu = |w| lambda` and `u = w/|w|` the
//! integral is `|w|^s` times a function of `u` alone, split at `mu = 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracPowerParams {
    s: f64,
    big_s: u32,
    sigma: f64,
    b_coeff: f64,
}

/// Largest exponent handled; beyond it the factorials overflow.
pub const MAX_S: f64 = 30.0;

impl FracPowerParams {
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Integer part `S`.
    pub fn integer_part(&self) -> u32 {
        self.big_s
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `(sigma)_{S+1} / Gamma(1 - sigma)`.
    pub fn b_coeff(&self) -> f64 {
        self.b_coeff
    }
}

pub fn decompose_s(s: f64) -> Result<FracPowerParams> {
    if !(s > 0.0) || !s.is_finite() || s > MAX_S {
        return Err(Error::Domain(format!("s must lie in (0, {MAX_S}], got {s}")));
    }
    if (s - s.round()).abs() <= 1e-9 {
        return Err(Error::Domain(format!("s = {s} is (within 1e-9 of) an integer")));
    }
    let big_s = s.floor();
    let sigma = s - big_s;
    // (sigma)_{S+1} = Gamma(s + 1) / Gamma(sigma)
    let b_coeff = (ln_gamma(s + 1.0) - ln_gamma(sigma) - ln_gamma(1.0 - sigma)).exp();
    Ok(FracPowerParams { s, big_s: big_s as u32, sigma, b_coeff })
}

/// `alpha (alpha + 1) ... (alpha + n - 1)`.
pub fn rising_factorial(alpha: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, k| acc * (alpha + k as f64))
}

/// `e / min(sigma, 1 - sigma) + 1/s`.
pub fn c_bound(p: &FracPowerParams) -> f64 {
    std::f64::consts::E / p.sigma.min(1.0 - p.sigma) + 1.0 / p.s
}

fn check_w(w: Complex64) -> Result<()> {
    if !w.re.is_finite() || !w.im.is_finite() {
        return Err(Error::Domain(format!("w must be finite, got {w}")));
    }
    if w != Complex64::new(0.0, 0.0) && !(w.re > 0.0) {
        return Err(Error::Domain(format!("w must satisfy Re w > 0, got {w}")));
    }
    Ok(())
}

/// `sum_{l<=S} (-x)^l / l!`.
fn taylor_head(x: Complex64, big_s: u32) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut acc = term;
    for l in 1..=big_s {
        term *= -x / l as f64;
        acc += term;
    }
    acc
}

/// `-(sum_{l>S} (-x)^l / l!)`, summed until terms stop mattering.
fn taylor_remainder(x: Complex64, big_s: u32) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    for l in 1..=big_s {
        term *= -x / l as f64;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for l in big_s + 1..big_s + 400 {
        term *= -x / l as f64;
        acc += term;
        if term.norm() <= 1e-18 * acc.norm() {
            break;
        }
    }
    -acc
}

/// Bracket `sum_{l<=S} (-x)^l/l! - e^{-x}` computed directly.
pub fn bracket_naive(x: Complex64, big_s: u32) -> Complex64 {
    taylor_head(x, big_s) - (-x).exp()
}

/// Same bracket through its Taylor remainder; stable for `|x| <= 1`.
pub fn bracket_taylor(x: Complex64, big_s: u32) -> Complex64 {
    taylor_remainder(x, big_s)
}

fn bracket(x: Complex64, big_s: u32) -> Complex64 {
    if x.norm() <= 1.0 {
        bracket_taylor(x, big_s)
    } else {
        bracket_naive(x, big_s)
    }
}

/// Full integrand at `lambda`, without the `(-1)^S B` prefactor.
pub fn integrand(lambda: f64, w: Complex64, p: &FracPowerParams) -> Complex64 {
    bracket(lambda * w, p.big_s) * lambda.powf(-(p.s + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HValue {
    pub value: Complex64,
    /// Bound on the absolute error: quadrature estimates, series truncation
    /// and the analytic tail.
    pub error_estimate: f64,
}

/// Default absolute tolerance, relative to `|w|^s`.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_PANELS: usize = 20_000;

pub fn h_integral(w: Complex64, p: &FracPowerParams, tol: f64) -> Result<Complex64> {
    h_integral_detailed(w, p, tol).map(|h| h.value)
}

/// Evaluates the representation to absolute accuracy `tol |w|^s`.
pub fn h_integral_detailed(w: Complex64, p: &FracPowerParams, tol: f64) -> Result<HValue> {
    check_w(w)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be positive, got {tol}")));
    }
    let r = w.norm();
    if r == 0.0 {
        return Ok(HValue { value: w, error_estimate: 0.0 });
    }
    let u = w / r;
    let s = p.s;
    let big_s = p.big_s;
    // normalized target so the final error is at most tol |w|^s
    let target = tol / p.b_coeff;

    // mu in (0, 1]: termwise integral of the Taylor remainder
    let mut inner = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    for l in 1..=big_s {
        term *= -u / l as f64;
    }
    let mut trunc = f64::INFINITY;
    for l in big_s + 1..big_s + 400 {
        term *= -u / l as f64;
        let piece = term / (l as f64 - s);
        inner -= piece;
        // remaining terms are dominated by a geometric tail of ratio 1/(l+1)
        trunc = piece.norm() / l as f64;
        if trunc < target / 100.0 {
            break;
        }
    }

    // mu >= 1, polynomial part in closed form
    let mut outer_poly = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    for l in 0..=big_s {
        if l > 0 {
            term *= -u / l as f64;
        }
        outer_poly += term / (s - l as f64);
    }

    // mu >= 1, exponential part by quadrature over panels plus a tail bound
    let c = u.re;
    let tail = |m: f64| {
        let decay = (-m * c).exp() * m.powf(-s - 1.0);
        (decay / c).min(decay + m.powf(-s - 1.0))
    };
    let width_cap = if u.im.abs() > 0.05 { 4.0 } else { f64::INFINITY };
    let mut lo = 1.0f64;
    let mut exp_part = Complex64::new(0.0, 0.0);
    let mut quad_err = 0.0;
    let mut panels = 0usize;
    while tail(lo) > target / 4.0 {
        panels += 1;
        if panels > MAX_PANELS {
            let achieved = p.b_coeff * (tail(lo) + quad_err + trunc) * r.powf(s);
            return Err(Error::Tolerance { achieved, requested: tol * r.powf(s) });
        }
        let hi = lo + lo.min(width_cap);
        let f = |mu: f64| (-mu * u).exp() * mu.powf(-s - 1.0);
        let re = quadrature::integrate(|mu| f(mu).re, lo, hi, target / 1e4);
        let im = quadrature::integrate(|mu| f(mu).im, lo, hi, target / 1e4);
        exp_part += Complex64::new(re.integral, im.integral);
        quad_err += re.error_estimate + im.error_estimate;
        lo = hi;
    }
    let err_n = trunc + quad_err + tail(lo);
    let sign = if big_s.is_multiple_of(2) { 1.0 } else { -1.0 };
    let scale = p.b_coeff * r.powf(s);
    let value = (inner + outer_poly - exp_part) * (sign * scale);
    let error_estimate = err_n * scale;
    if !(error_estimate <= tol * r.powf(s)) {
        return Err(Error::Tolerance { achieved: error_estimate, requested: tol * r.powf(s) });
    }
    Ok(HValue { value, error_estimate })
}

/// `int_0^inf |bracket(lambda w)| lambda^{-(s+1)} d lambda`, without `B`.
pub fn l1_norm(w: Complex64, p: &FracPowerParams) -> Result<f64> {
    check_w(w)?;
    let r = w.norm();
    if r == 0.0 {
        return Ok(0.0);
    }
    let u = w / r;
    let (s, sigma, big_s) = (p.s, p.sigma, p.big_s);
    // mu = v^{1/(1-sigma)} absorbs the mu^{-sigma} endpoint behaviour
    let inner = quadrature::integrate(
        |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let mu = v.powf(1.0 / (1.0 - sigma));
            let jac = mu / ((1.0 - sigma) * v);
            bracket(mu * u, big_s).norm() * mu.powf(-s - 1.0) * jac
        },
        0.0,
        1.0,
        1e-11,
    );
    // mu = v^{-1/sigma} maps [1, inf) onto (0, 1]
    let outer = quadrature::integrate(
        |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let mu = v.powf(-1.0 / sigma);
            let jac = mu / (sigma * v);
            bracket(mu * u, big_s).norm() * mu.powf(-s - 1.0) * jac
        },
        0.0,
        1.0,
        1e-11,
    );
    Ok((inner.integral + outer.integral) * r.powf(s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub w: Complex64,
    pub s: f64,
    pub h: Complex64,
    pub exact: Complex64,
    pub abs_error: f64,
    pub allowed: f64,
    pub l1: f64,
    pub l1_bound: f64,
    /// Relative error of the forward difference of `h(.; s)` against
    /// `s h(w; s-1)`, for `s > 1`.
    pub derivative_rel_error: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub points: Vec<PointReport>,
    pub failures: Vec<String>,
    pub tol: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Relative tolerance for the finite-difference derivative check.
pub const DERIVATIVE_TOL: f64 = 1e-4;

pub fn default_grid() -> Vec<(Complex64, f64)> {
    let ws = [0.1, 1.0, 4.0, 10.0].map(|x| Complex64::new(x, 0.0));
    let mut grid = Vec::new();
    for s in [0.5, 1.5, 2.5, 3.7] {
        for w in ws.iter().chain([Complex64::new(1.0, 1.0)].iter()) {
            grid.push((*w, s));
        }
    }
    grid
}

fn validate_point(w: Complex64, s: f64, tol: f64) -> Result<PointReport> {
    let p = decompose_s(s)?;
    let h = h_integral(w, &p, tol.min(1e-12))?;
    let exact = w.powf(s);
    let abs_error = (h - exact).norm();
    let allowed = tol * w.norm().powf(s);
    let l1 = l1_norm(w, &p)?;
    let l1_bound = c_bound(&p) * w.norm().powf(s);
    let derivative_rel_error = if s > 1.0 {
        let lower = decompose_s(s - 1.0)?;
        let delta = 1e-5 * w.norm();
        let ahead = h_integral(w + delta, &p, 1e-13)?;
        let here = h_integral(w, &p, 1e-13)?;
        let fd = (ahead - here) / delta;
        let expect = h_integral(w, &lower, 1e-13)? * s;
        Some((fd - expect).norm() / expect.norm())
    } else {
        None
    };
    let passed = abs_error <= allowed && l1 <= l1_bound && derivative_rel_error.is_none_or(|e| e <= DERIVATIVE_TOL);
    Ok(PointReport { w, s, h, exact, abs_error, allowed, l1, l1_bound, derivative_rel_error, passed })
}

/// Checks `h(w; s) = w^s`, the `L^1` bound and the derivative relation at
/// every grid point. Failures are collected rather than returned early.
pub fn validate_representation(grid: &[(Complex64, f64)], tol: f64, exec: Exec) -> Result<ValidationReport> {
    for &(w, s) in grid {
        check_w(w)?;
        decompose_s(s)?;
        if w.norm() == 0.0 {
            return Err(Error::Domain("validation points need w != 0".into()));
        }
    }
    let results = exec.map_slice(grid, |&(w, s)| validate_point(w, s, tol));
    let mut points = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    for (r, &(w, s)) in results.into_iter().zip(grid) {
        match r {
            Ok(pt) => {
                if !pt.passed {
                    failures.push(format!(
                        "w={w}, s={s}: error {:.3e} (allowed {:.3e}), L1 {:.4} (bound {:.4}), derivative {:?}",
                        pt.abs_error, pt.allowed, pt.l1, pt.l1_bound, pt.derivative_rel_error
                    ));
                }
                points.push(pt);
            }
            Err(e) => failures.push(format!("w={w}, s={s}: {e}")),
        }
    }
    Ok(ValidationReport { points, failures, tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn decomposition_and_constants() {
        let p = decompose_s(3.7).unwrap();
        assert_eq!(p.integer_part(), 3);
        assert!((p.sigma() - 0.7).abs() < 1e-15);
        let p = decompose_s(1.5).unwrap();
        assert!((p.b_coeff() - 0.75 / std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!(decompose_s(2.0).is_err());
        assert!(decompose_s(2.0 + 1e-10).is_err());
        assert_eq!(rising_factorial(0.4, 0), 1.0);
        assert!((rising_factorial(0.5, 3) - 1.875).abs() < 1e-15);
        assert!((rising_factorial(0.3, 4) - 2.9601).abs() < 1e-13);
        let p = decompose_s(0.5).unwrap();
        assert!((c_bound(&p) - (2.0 * std::f64::consts::E + 2.0)).abs() < 1e-13);
        let p = decompose_s(1.5).unwrap();
        assert!((c_bound(&p) - (2.0 * std::f64::consts::E + 2.0 / 3.0)).abs() < 1e-13);
    }

    #[test]
    fn b_coeff_matches_rising_factorial_over_gamma() {
        for k in 0..10 {
            for frac in [0.1, 0.5, 0.9] {
                let s = k as f64 + frac;
                let p = decompose_s(s).unwrap();
                let direct = rising_factorial(frac, k + 1) / statrs::function::gamma::gamma(1.0 - frac);
                assert!(p.b_coeff() > 0.0);
                assert!((p.b_coeff() / direct - 1.0).abs() < 1e-12, "s={s}");
            }
        }
    }

    #[test]
    fn representation_reproduces_powers() {
        let p = decompose_s(0.5).unwrap();
        assert!((h_integral(c(1.0, 0.0), &p, 1e-10).unwrap() - 1.0).norm() < 1e-10);
        assert!((h_integral(c(4.0, 0.0), &p, 1e-8).unwrap() - 2.0).norm() < 4e-8);
        let p = decompose_s(1.5).unwrap();
        let h = h_integral(c(1.0, 1.0), &p, 1e-10).unwrap();
        let expect = Complex64::from_polar(2f64.powf(0.75), 3.0 * std::f64::consts::PI / 8.0);
        assert!((h - expect).norm() < 1e-9);
        assert!((h.re - 0.6436).abs() < 1e-4 && (h.im - 1.5538).abs() < 1e-4);
        assert_eq!(h_integral(c(0.0, 0.0), &p, 1e-10).unwrap(), c(0.0, 0.0));
        assert!(h_integral(c(-1.0, 0.0), &p, 1e-10).is_err());
    }

    #[test]
    fn small_w_limit_vanishes() {
        let p = decompose_s(2.5).unwrap();
        let mut prev = f64::INFINITY;
        for w in [1e-1, 1e-2, 1e-3, 1e-4] {
            let h = h_integral(c(w, 0.0), &p, 1e-10).unwrap().norm();
            assert!(h < prev);
            prev = h;
        }
        assert!(prev < 1e-9);
    }

    #[test]
    fn homogeneity() {
        for s in [0.5, 1.5, 3.7] {
            let p = decompose_s(s).unwrap();
            let w = c(0.7, 0.4);
            let base = h_integral(w, &p, 1e-12).unwrap();
            for k in [0.3, 2.0, 9.0] {
                let scaled = h_integral(w * k, &p, 1e-12).unwrap();
                assert!((scaled - base * k.powf(s)).norm() <= 1e-8 * scaled.norm());
            }
        }
    }

    #[test]
    fn taylor_and_naive_brackets_agree_in_overlap() {
        for s in [0.5, 1.5, 2.5, 3.7] {
            let p = decompose_s(s).unwrap();
            for x in [0.5, 0.75, 1.0] {
                for u in [c(1.0, 0.0), c(0.6, 0.8)] {
                    let a = bracket_taylor(u * x, p.integer_part());
                    let b = bracket_naive(u * x, p.integer_part());
                    assert!((a - b).norm() <= 1e-10 * a.norm(), "s={s} x={x}");
                }
            }
        }
    }

    #[test]
    fn l1_norm_respects_bound() {
        let p = decompose_s(1.5).unwrap();
        let l1 = l1_norm(c(3.0, 0.0), &p).unwrap();
        assert!(l1 > 0.0 && l1 <= c_bound(&p) * 3f64.powf(1.5));
    }

    #[test]
    fn default_grid_validates() {
        let r = validate_representation(&default_grid(), 1e-6, Exec::default()).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
        let d = r.points.iter().filter_map(|pt| pt.derivative_rel_error).fold(0.0f64, f64::max);
        assert!(d <= DERIVATIVE_TOL);
    }

    #[test]
    fn derivative_relation_at_two() {
        let p = decompose_s(2.5).unwrap();
        let lower = decompose_s(1.5).unwrap();
        let w = c(2.0, 0.0);
        let delta = 1e-5;
        let fd = (h_integral(w + delta, &p, 1e-13).unwrap() - h_integral(w, &p, 1e-13).unwrap()) / delta;
        let expect = h_integral(w, &lower, 1e-13).unwrap() * 2.5;
        assert!((fd - expect).norm() / expect.norm() <= 1e-4);
    }
}
