//! The anisotropic kernel `K(x, y) = 1 / (pi (1 + (x-y)^2 + a (x^2+y^2)^t))`,
//! its conditionally negative-definite base, Gram matrices and quadratic forms.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hp::{Hp, HpCtx};
use crate::sum::Neumaier;

/// The exponent `t` and anisotropy weight `a` of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    t: f64,
    a: f64,
}

impl KernelParams {
    pub fn new(t: f64, a: f64) -> Result<Self> {
        if !t.is_finite() || !a.is_finite() {
            return Err(Error::InvalidParams(format!("t and a must be finite (t={t}, a={a})")));
        }
        if t <= 0.0 || a <= 0.0 {
            return Err(Error::InvalidParams(format!("t and a must be strictly positive (t={t}, a={a})")));
        }
        Ok(Self { t, a })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

/// A finite point set with one real coefficient per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfig {
    points: Vec<f64>,
    coeffs: Vec<f64>,
}

impl PointConfig {
    pub fn new(points: Vec<f64>, coeffs: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParams("a configuration needs n >= 1 points".into()));
        }
        if points.len() != coeffs.len() {
            return Err(Error::InvalidParams(format!("{} points but {} coefficients", points.len(), coeffs.len())));
        }
        if points.iter().chain(&coeffs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite point or coefficient".into()));
        }
        Ok(Self { points, coeffs })
    }

    /// Points with all coefficients set to one.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        let coeffs = vec![1.0; points.len()];
        Self::new(points, coeffs)
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(self.points.clone(), coeffs)
    }
}

/// Symmetric matrix of kernel values at a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    points: Vec<f64>,
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps an arbitrary symmetric matrix, e.g. a rescaled Gram matrix or
    /// one built from a different kernel over the same points.
    pub fn from_entries(points: Vec<f64>, entries: DMatrix<f64>) -> Result<Self> {
        let n = points.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::InvalidParams(format!("{}x{} matrix for {n} points", entries.nrows(), entries.ncols())));
        }
        for j in 0..n {
            if !(entries[(j, j)] > 0.0) {
                return Err(Error::InvalidParams(format!("diagonal entry {j} is not positive")));
            }
            for k in 0..j {
                if entries[(j, k)] != entries[(k, j)] {
                    return Err(Error::InvalidParams(format!("entry ({j},{k}) is not symmetric")));
                }
            }
        }
        Ok(Self { points, entries })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[(j, k)]
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.order()).map(|j| self.entries[(j, j)]).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_entries(self.points.clone(), &self.entries * factor)
    }

    /// `sum_jk c_j c_k G_jk`, compensated, row-major.
    pub fn quadratic_form(&self, coeffs: &[f64]) -> f64 {
        let n = self.order();
        let mut acc = Neumaier::new();
        for j in 0..n {
            for k in 0..n {
                acc.add(coeffs[j] * coeffs[k] * self.entries[(j, k)]);
            }
        }
        acc.total()
    }
}

/// `base^t` with `0^t = 0`.
#[inline]
pub fn pow0(base: f64, t: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        base.powf(t)
    }
}

fn check_finite(x: f64, y: f64) -> Result<()> {
    if x.is_finite() && y.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite kernel argument ({x}, {y})")))
    }
}

#[inline]
fn cnd_base_unchecked(params: &KernelParams, x: f64, y: f64) -> f64 {
    let d = x - y;
    d * d + params.a * pow0(x * x + y * y, params.t)
}

/// `(x-y)^2 + a (x^2+y^2)^t`.
pub fn eval_cnd_base(params: &KernelParams, x: f64, y: f64) -> Result<f64> {
    check_finite(x, y)?;
    Ok(cnd_base_unchecked(params, x, y))
}

/// `1 + (x-y)^2 + a (x^2+y^2)^t`, the kernel's reciprocal up to `1/pi`.
pub fn denominator(params: &KernelParams, x: f64, y: f64) -> Result<f64> {
    Ok(1.0 + eval_cnd_base(params, x, y)?)
}

pub fn eval_kernel(params: &KernelParams, x: f64, y: f64) -> Result<f64> {
    check_finite(x, y)?;
    Ok(1.0 / (PI * (1.0 + cnd_base_unchecked(params, x, y))))
}

/// Gram matrix built over the upper triangle and mirrored.
pub fn gram_matrix(params: &KernelParams, config: &PointConfig) -> Result<GramMatrix> {
    gram_from_fn(config.points(), |x, y| eval_kernel(params, x, y))
}

pub(crate) fn gram_from_fn<F>(points: &[f64], f: F) -> Result<GramMatrix>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let v = f(points[j], points[k])?;
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    GramMatrix::from_entries(points.to_vec(), m)
}

/// `sum_jk c_j c_k K(x_j, x_k)` for the configuration.
pub fn quadratic_form(params: &KernelParams, config: &PointConfig) -> Result<f64> {
    Ok(gram_matrix(params, config)?.quadratic_form(config.coeffs()))
}

/// Extended-precision counterparts used to replay certificates whose values
/// sit far below double-precision cancellation limits.
pub mod precise {
    use super::*;

    pub fn cnd_base(ctx: &mut HpCtx, params: &KernelParams, x: &Hp, y: &Hp) -> Hp {
        let d = ctx.sub(x, y);
        let d2 = ctx.mul(&d, &d);
        let x2 = ctx.mul(x, x);
        let y2 = ctx.mul(y, y);
        let s = ctx.add(&x2, &y2);
        let t = ctx.f(params.t());
        let p = ctx.powf(&s, &t);
        let a = ctx.f(params.a());
        let ap = ctx.mul(&a, &p);
        ctx.add(&d2, &ap)
    }

    pub fn denominator(ctx: &mut HpCtx, params: &KernelParams, x: &Hp, y: &Hp) -> Hp {
        let b = cnd_base(ctx, params, x, y);
        let one = ctx.one();
        ctx.add(&one, &b)
    }

    pub fn kernel(ctx: &mut HpCtx, params: &KernelParams, x: &Hp, y: &Hp) -> Hp {
        let d = denominator(ctx, params, x, y);
        let pi = ctx.pi();
        let pd = ctx.mul(&pi, &d);
        let one = ctx.one();
        ctx.div(&one, &pd)
    }

    /// `sum_jk c_j c_k K(x_j, x_k)` at working precision.
    pub fn quadratic_form(ctx: &mut HpCtx, params: &KernelParams, points: &[Hp], coeffs: &[Hp]) -> Hp {
        let n = points.len();
        let mut acc = ctx.zero();
        for j in 0..n {
            for k in j..n {
                let kv = kernel(ctx, params, &points[j], &points[k]);
                let cc = ctx.mul(&coeffs[j], &coeffs[k]);
                let mut term = ctx.mul(&cc, &kv);
                if j != k {
                    let two = ctx.f(2.0);
                    term = ctx.mul(&two, &term);
                }
                acc = ctx.add(&acc, &term);
            }
        }
        acc
    }

    /// The quadratic form with all denominators cleared:
    /// `sum_jk c_j c_k prod_{(p,q) != (j,k)} D(x_p, x_q)`, where `D = 1 + base`.
    /// It equals `pi * prod_{pq} D_pq` times the quadratic form, so it has the
    /// same sign.
    pub fn cleared_form(ctx: &mut HpCtx, params: &KernelParams, points: &[Hp], coeffs: &[Hp]) -> Hp {
        let n = points.len();
        let mut dens = Vec::with_capacity(n * n);
        for p in 0..n {
            for q in 0..n {
                dens.push(denominator(ctx, params, &points[p], &points[q]));
            }
        }
        let mut acc = ctx.zero();
        for j in 0..n {
            for k in 0..n {
                let mut prod = ctx.mul(&coeffs[j], &coeffs[k]);
                for (idx, d) in dens.iter().enumerate() {
                    if idx != j * n + k {
                        prod = ctx.mul(&prod, d);
                    }
                }
                acc = ctx.add(&acc, &prod);
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(t: f64, a: f64) -> KernelParams {
        KernelParams::new(t, a).unwrap()
    }

    #[test]
    fn params_reject_bad_values() {
        assert!(KernelParams::new(0.0, 1.0).is_err());
        assert!(KernelParams::new(1.0, -1.0).is_err());
        assert!(KernelParams::new(f64::NAN, 1.0).is_err());
        assert!(KernelParams::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn config_rejects_mismatch() {
        assert!(PointConfig::new(vec![], vec![]).is_err());
        assert!(PointConfig::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(PointConfig::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn kernel_values() {
        assert_eq!(eval_kernel(&p(2.0, 1.0), 0.0, 0.0).unwrap(), 1.0 / PI);
        let v = eval_kernel(&p(1.0, 1.0), 1.0, 0.0).unwrap();
        assert!((v - 1.0 / (3.0 * PI)).abs() < 1e-17);
        assert!((v - 0.1061033).abs() < 1e-7);
        // 1 + 0.2 + 13 * 0.04
        let v = eval_kernel(&p(2.0, 13.0), 0.2f64.sqrt(), 0.0).unwrap();
        assert!((v - 1.0 / (1.72 * PI)).abs() < 1e-15);
        assert!(eval_kernel(&p(2.0, 1.0), f64::NAN, 0.0).is_err());
    }

    #[test]
    fn cnd_base_values() {
        assert_eq!(eval_cnd_base(&p(0.5, 1.0), 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(eval_cnd_base(&p(0.5, 2.0), 3.0, 4.0).unwrap(), 11.0);
        let v = eval_cnd_base(&p(1.5, 1.0), 1.0, -1.0).unwrap();
        assert!((v - 6.828_427_124_746_19).abs() < 1e-12);
        assert!(eval_cnd_base(&p(1.5, 1.0), f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn diagonal_of_cnd_base() {
        let pr = p(1.7, 0.3);
        for x in [-3.0, -0.5, 0.0, 0.25, 8.0] {
            let v = eval_cnd_base(&pr, x, x).unwrap();
            assert!((v - 0.3 * pow0(2.0 * x * x, 1.7)).abs() <= 1e-12 * v.max(1.0));
        }
    }

    #[test]
    fn small_gram_matrices() {
        let pr = p(3.0, 7.0);
        let g = gram_matrix(&pr, &PointConfig::from_points(vec![0.0]).unwrap()).unwrap();
        assert_eq!(g.get(0, 0), 1.0 / PI);
        let g = gram_matrix(&pr, &PointConfig::from_points(vec![0.0, 0.0]).unwrap()).unwrap();
        assert!(g.entries().iter().all(|&v| v == 1.0 / PI));
        assert!(g.entries().determinant().abs() < 1e-18);

        let g = gram_matrix(&p(2.0, 13.0), &PointConfig::from_points(vec![0.2f64.sqrt(), 0.0]).unwrap()).unwrap();
        assert!(g.entries().determinant() < 0.0);
    }

    #[test]
    fn quadratic_form_basics() {
        let pr = p(2.0, 13.0);
        let cfg = PointConfig::new(vec![1.0, 2.0, 3.0], vec![0.0; 3]).unwrap();
        assert_eq!(quadratic_form(&pr, &cfg).unwrap(), 0.0);
        let cfg = PointConfig::new(vec![0.7], vec![1.0]).unwrap();
        assert_eq!(quadratic_form(&pr, &cfg).unwrap(), eval_kernel(&pr, 0.7, 0.7).unwrap());
    }

    #[test]
    fn negative_form_on_min_eigenvector() {
        // 2x2 symmetric eigen-decomposition by hand.
        let pr = p(2.0, 13.0);
        let x = 0.2f64.sqrt();
        let (a, b, d) =
            (eval_kernel(&pr, x, x).unwrap(), eval_kernel(&pr, x, 0.0).unwrap(), eval_kernel(&pr, 0.0, 0.0).unwrap());
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let lmin = mean - rad;
        assert!(lmin < 0.0);
        let (u, v) = (b, lmin - a);
        let nrm = (u * u + v * v).sqrt();
        let cfg = PointConfig::new(vec![x, 0.0], vec![u / nrm, v / nrm]).unwrap();
        let q = quadratic_form(&pr, &cfg).unwrap();
        assert!(q < 0.0);
        assert!((q - lmin).abs() < 1e-15);
    }

    #[test]
    fn precise_matches_double() {
        let pr = p(1.5, 2.0);
        let mut ctx = HpCtx::with_digits(40);
        let pts = [0.3, -1.2, 2.5];
        let cs = [1.0, -0.5, 0.25];
        let hp_pts: Vec<Hp> = pts.iter().map(|&v| ctx.f(v)).collect();
        let hp_cs: Vec<Hp> = cs.iter().map(|&v| ctx.f(v)).collect();
        let q_hp = precise::quadratic_form(&mut ctx, &pr, &hp_pts, &hp_cs);
        let q = quadratic_form(&pr, &PointConfig::new(pts.to_vec(), cs.to_vec()).unwrap()).unwrap();
        assert!((ctx.to_f64(&q_hp) - q).abs() < 1e-15);

        // cleared form = pi * prod D * quadratic form
        let cl = precise::cleared_form(&mut ctx, &pr, &hp_pts, &hp_cs);
        let mut prod = PI;
        for &x in &pts {
            for &y in &pts {
                prod *= denominator(&pr, x, y).unwrap();
            }
        }
        assert!((ctx.to_f64(&cl) - prod * q).abs() < 1e-10 * (prod * q).abs());
    }
}
