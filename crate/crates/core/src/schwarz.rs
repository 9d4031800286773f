//! The two-point (Schwarz) necessary condition on the slice `y = 0`.
//!
//! With `z = x^2`, positive-definiteness forces
//! `g(z; t, a) = (1+z)^2 - 1 + 2a z^t ((1+z) - 2^(t-1)) + a^2 z^(2t) >= 0`.
//! Minimizing in `a` gives `a_tilde(z)` and the closed-form threshold
//! `a0(t) = a_tilde(z0)` above which the condition is violated.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow};
use serde::{Deserialize, Serialize};

use crate::definiteness::{pd_check, Verdict};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kernel::{self, pow0, KernelParams, PointConfig};

/// Largest `t` accepted by [`boundary_report`] unless overridden.
pub const DEFAULT_T_CAP: f64 = 30.0;

fn require_t_gt_1(t: f64) -> Result<()> {
    if t.is_finite() && t > 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("the y = 0 slice argument needs t > 1, got t = {t}")))
    }
}

/// `2^(t-1) - 1`, accurate as `t -> 1+`.
fn two_pow_tm1_minus_1(t: f64) -> f64 {
    ((t - 1.0) * std::f64::consts::LN_2).exp_m1()
}

/// `g(z; t, a)` without the `t > 1` guard, for exploring other exponents.
pub fn g_fn_unchecked(z: f64, t: f64, a: f64) -> f64 {
    let zt = pow0(z, t);
    z * (2.0 + z) + 2.0 * a * zt * ((1.0 + z) - 2f64.powf(t - 1.0)) + a * a * zt * zt
}

pub fn g_fn(z: f64, t: f64, a: f64) -> Result<f64> {
    require_t_gt_1(t)?;
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("g needs z >= 0, got {z}")));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("g needs a > 0, got {a}")));
    }
    Ok(g_fn_unchecked(z, t, a))
}

/// Exact `g(z; t, a)` for integer exponents.
pub fn g_fn_exact(z: &BigRational, t: u32, a: &BigRational) -> BigRational {
    let one = BigRational::one();
    let zt: BigRational = Pow::pow(z, t);
    let two_pow = BigRational::from_integer(BigInt::from(2).pow(t - 1));
    let zp1 = &one + z;
    &zp1 * &zp1 - &one + BigRational::from_integer(2.into()) * a * &zt * (&zp1 - two_pow) + a * a * &zt * &zt
}

/// Rounding scale of a `g` evaluation: the sum of the absolute terms.
fn g_scale(z: f64, t: f64, a: f64) -> f64 {
    let zt = pow0(z, t);
    z * (2.0 + z) + (2.0 * a * zt * ((1.0 + z) - 2f64.powf(t - 1.0))).abs() + a * a * zt * zt
}

/// The minimizer in `a` of `g(z; t, .)`: `(2^(t-1) - (1+z)) / z^t`.
pub fn a_tilde(z: f64, t: f64) -> Result<f64> {
    require_t_gt_1(t)?;
    let zmax = two_pow_tm1_minus_1(t);
    if !(z > 0.0 && z < zmax) {
        return Err(Error::Range(format!("a_tilde needs 0 < z < 2^(t-1) - 1 = {zmax:e}, got z = {z:e}")));
    }
    Ok((zmax - z) / z.powf(t))
}

/// `(2^(t-1) - 1)^2 / 2^t`.
pub fn z0(t: f64) -> Result<f64> {
    require_t_gt_1(t)?;
    let m = two_pow_tm1_minus_1(t);
    Ok(m * m / 2f64.powf(t))
}

/// `(2^(t^2-1) + 2^(t^2-t)) / (2^(t-1) - 1)^(2t-1)`, evaluated in log space.
pub fn a0(t: f64) -> Result<f64> {
    require_t_gt_1(t)?;
    let ln2 = std::f64::consts::LN_2;
    let ln_num = (t * t - t) * ln2 + (2f64.powf(t - 1.0) + 1.0).ln();
    let ln_den = (2.0 * t - 1.0) * two_pow_tm1_minus_1(t).ln();
    let v = (ln_num - ln_den).exp();
    if !v.is_finite() || v == 0.0 {
        return Err(Error::Range(format!("a0({t}) is not representable")));
    }
    Ok(v)
}

/// `D(x,y)^2 - D(x,x) D(y,y)` with `D = 1 + base`; the two-point Schwarz
/// condition holds iff this is nonnegative. On `y = 0` it equals `g(x^2)`.
pub fn schwarz_surface(params: &KernelParams, x: f64, y: f64) -> Result<f64> {
    let dxy = kernel::denominator(params, x, y)?;
    let dxx = kernel::denominator(params, x, x)?;
    let dyy = kernel::denominator(params, y, y)?;
    Ok(dxy * dxy - dxx * dyy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchwarzViolation {
    pub z: f64,
    pub g_value: f64,
    pub x: f64,
    /// Points `(sqrt z, 0)` with the eigenvector of the negative eigenvalue.
    pub config: PointConfig,
    pub min_eigenvalue: f64,
    pub quadratic_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub t: f64,
    pub z0: f64,
    pub a0: f64,
    /// `a_tilde(z0, t)`, agreeing with `a0` to relative 1e-12.
    pub a0_cross_check: f64,
    pub violation: Option<SchwarzViolation>,
}

pub fn boundary_report(t: f64) -> Result<BoundaryReport> {
    boundary_report_capped(t, DEFAULT_T_CAP)
}

pub fn boundary_report_capped(t: f64, t_cap: f64) -> Result<BoundaryReport> {
    require_t_gt_1(t)?;
    if t > t_cap {
        return Err(Error::Range(format!("t = {t} exceeds the cap {t_cap}")));
    }
    let z0 = z0(t)?;
    let a0 = a0(t)?;
    let check = a_tilde_at_z0(t, z0)?;
    if ((check - a0) / a0).abs() > 1e-12 {
        return Err(Error::Range(format!("a0 closed form {a0:e} disagrees with a_tilde(z0) = {check:e}")));
    }
    Ok(BoundaryReport { t, z0, a0, a0_cross_check: check, violation: None })
}

/// `a_tilde(z0)` without the open-interval check (z0 lies inside it anyway).
fn a_tilde_at_z0(t: f64, z0: f64) -> Result<f64> {
    a_tilde(z0, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotFoundReport {
    pub grid_points: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub min_g: f64,
    pub argmin_z: f64,
}

/// Result of a violation search. `NotFound` is never a positive-definiteness
/// claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SchwarzOutcome {
    Found(SchwarzViolation),
    NotFound(NotFoundReport),
}

impl SchwarzOutcome {
    pub fn violation(&self) -> Option<&SchwarzViolation> {
        match self {
            SchwarzOutcome::Found(v) => Some(v),
            SchwarzOutcome::NotFound(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationOptions {
    pub max_bisections: usize,
    pub grid_points: usize,
    pub exec: Exec,
}

impl Default for ViolationOptions {
    fn default() -> Self {
        Self { max_bisections: 200, grid_points: 8192, exec: Exec::default() }
    }
}

pub fn find_schwarz_violation(t: f64, a: f64) -> Result<SchwarzOutcome> {
    find_schwarz_violation_with(t, a, ViolationOptions::default())
}

/// Looks for `z > 0` with `g(z; t, a) < 0`.
///
/// For `a > a0(t)` the root of `a_tilde(z) = a` on `(0, z0)` is bracketed and
/// bisected. Otherwise (or if bisection lands within rounding of zero) the
/// interval `(0, 2^(t-1) - 1)` is scanned and the best grid point refined.
pub fn find_schwarz_violation_with(t: f64, a: f64, opts: ViolationOptions) -> Result<SchwarzOutcome> {
    require_t_gt_1(t)?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    let a0 = a0(t)?;
    if a > a0 {
        if let Some(z) = bisect_a_tilde(t, a, opts.max_bisections)? {
            let g = g_fn_unchecked(z, t, a);
            if g < -1e-12 * g_scale(z, t, a) {
                return build_violation(t, a, z, g).map(SchwarzOutcome::Found);
            }
        }
    }
    scan(t, a, opts)
}

fn bisect_a_tilde(t: f64, a: f64, max_iter: usize) -> Result<Option<f64>> {
    let z0 = z0(t)?;
    let mut lo = z0 * 1e-12;
    while a_tilde(lo, t)? <= a {
        lo *= 1e-3;
        if lo < 1e-300 {
            return Ok(None);
        }
    }
    let mut hi = z0;
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if a_tilde(mid, t)? > a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

fn scan(t: f64, a: f64, opts: ViolationOptions) -> Result<SchwarzOutcome> {
    let z_hi = two_pow_tm1_minus_1(t);
    let z_lo = z_hi * 1e-12;
    let m = opts.grid_points.max(16);
    let half = m / 2;
    // Half geometric (resolves z -> 0), half uniform.
    let grid: Vec<f64> = (0..m)
        .map(|i| {
            if i < half {
                z_lo * (z_hi / z_lo).powf(i as f64 / half as f64)
            } else {
                z_hi * ((i - half) as f64 + 0.5) / (m - half) as f64
            }
        })
        .collect();
    let vals = opts.exec.map_slice(&grid, |&z| g_fn_unchecked(z, t, a));
    let (imin, gmin) =
        vals.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let mut zbest = grid[imin];
    let mut gbest = gmin;

    // Golden-section refinement between the sorted neighbours of the best node.
    let mut sorted = grid.clone();
    sorted.sort_by(f64::total_cmp);
    let pos = sorted.partition_point(|&v| v < zbest);
    let (mut l, mut r) = (sorted[pos.saturating_sub(1)], sorted[(pos + 1).min(sorted.len() - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = r - phi * (r - l);
        let d = l + phi * (r - l);
        if g_fn_unchecked(c, t, a) < g_fn_unchecked(d, t, a) {
            r = d;
        } else {
            l = c;
        }
    }
    let zr = 0.5 * (l + r);
    let gr = g_fn_unchecked(zr, t, a);
    if gr < gbest {
        zbest = zr;
        gbest = gr;
    }

    if gbest < -1e-12 * g_scale(zbest, t, a) {
        return build_violation(t, a, zbest, gbest).map(SchwarzOutcome::Found);
    }
    Ok(SchwarzOutcome::NotFound(NotFoundReport { grid_points: m, z_lo, z_hi, min_g: gbest, argmin_z: zbest }))
}

fn build_violation(t: f64, a: f64, z: f64, g: f64) -> Result<SchwarzViolation> {
    let params = KernelParams::new(t, a)?;
    let x = z.sqrt();
    let gram = kernel::gram_matrix(&params, &PointConfig::from_points(vec![x, 0.0])?)?;
    let verdict = pd_check(&gram, 0.0)?;
    if verdict.verdict != Verdict::Fail {
        return Err(Error::Domain(format!(
            "g({z:e}) = {g:e} < 0 but the 2-point Gram matrix has no negative eigenvalue"
        )));
    }
    let config = verdict.worst_config.expect("FAIL carries a configuration");
    let q = kernel::quadratic_form(&params, &config)?;
    Ok(SchwarzViolation { z, g_value: g, x, config, min_eigenvalue: verdict.min_eigenvalue, quadratic_form: q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn ratio(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    #[test]
    fn g_basic_values() {
        for t in [1.5, 2.0, 3.7] {
            for a in [0.1, 12.0, 300.0] {
                assert_eq!(g_fn(0.0, t, a).unwrap(), 0.0);
            }
        }
        assert!(g_fn(0.25, 2.0, 12.0).unwrap().abs() < 1e-15);
        assert!((g_fn(0.2, 2.0, 13.0).unwrap() + 0.1216).abs() < 1e-14);
        assert!(matches!(g_fn(0.2, 1.0, 13.0), Err(Error::Domain(_))));
        assert!(g_fn(-0.1, 2.0, 1.0).is_err());
    }

    #[test]
    fn g_exact_rational() {
        assert_eq!(g_fn_exact(&ratio(1, 5), 2, &ratio(13, 1)), ratio(-1216, 10000));
        assert_eq!(g_fn_exact(&ratio(1, 4), 2, &ratio(12, 1)), ratio(0, 1));
        assert!(g_fn_exact(&BigRational::zero(), 3, &ratio(5, 1)).is_zero());
    }

    #[test]
    fn a_tilde_values_and_range() {
        assert!((a_tilde(0.25, 2.0).unwrap() - 12.0).abs() < 1e-12);
        assert!((a_tilde(0.5, 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(a_tilde(1.0, 2.0), Err(Error::Range(_))));
        assert!(matches!(a_tilde(0.0, 2.0), Err(Error::Range(_))));
    }

    #[test]
    fn minimum_in_a_identity() {
        for t in [1.2, 1.5, 2.0, 2.5, 3.0, 5.0, 8.5] {
            let zmax = 2f64.powf(t - 1.0) - 1.0;
            for k in 1..40 {
                let z = zmax * k as f64 / 40.0;
                let at = a_tilde(z, t).unwrap();
                let lhs = g_fn(z, t, at).unwrap();
                let rhs = 2f64.powf(t) * z - zmax * zmax;
                let scale = g_scale(z, t, at);
                assert!((lhs - rhs).abs() <= 1e-12 * scale, "t={t} z={z}");
            }
        }
    }

    #[test]
    fn a_tilde_decreasing_by_finite_differences() {
        for t in [1.5, 2.0, 3.0] {
            let z0 = z0(t).unwrap();
            let mut prev = f64::INFINITY;
            for k in 1..=400 {
                let z = z0 * k as f64 / 400.0 * (1.0 - 1e-9);
                let v = a_tilde(z, t).unwrap();
                assert!(v < prev, "t={t} k={k}");
                let h = z * 1e-6;
                assert!(a_tilde(z + h, t).unwrap() - a_tilde(z - h, t).unwrap() < 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn boundary_at_t2() {
        let r = boundary_report(2.0).unwrap();
        assert!((r.a0 - 12.0).abs() <= 12.0 * 1e-12);
        assert!((r.z0 - 0.25).abs() < 1e-15);
        assert!(r.violation.is_none());
    }

    #[test]
    fn boundary_cross_check_over_grid() {
        let mut t = 1.05;
        while t <= 30.0 {
            let r = boundary_report(t).unwrap();
            assert!(((r.a0_cross_check - r.a0) / r.a0).abs() <= 1e-12, "t={t}");
            t += 0.35;
        }
        assert!(matches!(boundary_report(31.0), Err(Error::Range(_))));
        assert!(boundary_report(1.0).is_err());
    }

    #[test]
    fn a0_diverges_slowly_near_one() {
        // a0 ~ 2 / ((t-1) ln 2) as t -> 1+.
        let a = a0(1.0 + 1e-6).unwrap();
        assert!(a > 1e6);
        let z = z0(1.01).unwrap();
        let independent = (2f64.powf(0.01) - 1.0 - z) / z.powf(1.01);
        assert!((a0(1.01).unwrap() - independent).abs() < 1e-9 * independent);
        assert!((a0(1.01).unwrap() - 321.0).abs() < 1.0);
    }

    #[test]
    fn violation_at_13() {
        let out = find_schwarz_violation(2.0, 13.0).unwrap();
        let v = out.violation().unwrap();
        let root = (-1.0 + 53f64.sqrt()) / 26.0;
        assert!((v.z - root).abs() < 1e-12);
        assert!(v.g_value < 0.0);
        assert!(v.quadratic_form < 0.0);
        assert!(v.min_eigenvalue < 0.0);
    }

    #[test]
    fn slice_fails_below_a0() {
        // a0(2) = 12 is not sharp on the slice: g(1/5; 2, 12) = -0.0976.
        assert_eq!(g_fn_exact(&ratio(1, 5), 2, &ratio(12, 1)), ratio(-976, 10000));
        let v = find_schwarz_violation(2.0, 12.0).unwrap();
        assert!(v.violation().unwrap().g_value < 0.0);
        // Below the slice threshold (~8.818) nothing is found.
        match find_schwarz_violation(2.0, 8.0).unwrap() {
            SchwarzOutcome::NotFound(r) => assert!(r.min_g >= -1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn surface_matches_g_on_slice() {
        let p = KernelParams::new(2.5, 4.0).unwrap();
        for z in [0.01f64, 0.1, 0.3, 2.0] {
            let s = schwarz_surface(&p, z.sqrt(), 0.0).unwrap();
            let g = g_fn(z, 2.5, 4.0).unwrap();
            assert!((s - g).abs() < 1e-12 * g_scale(z, 2.5, 4.0));
        }
    }
}
