//! Vanishing-moment witnesses and the small-`z` asymptotics of the cleared
//! quadratic form
//!
//! `f(z) = sum_jk c_j c_k prod_{(p,q) != (j,k)} (1 + (y_p-y_q)^2 z + a (y_p^2+y_q^2)^t z^t)`.
//!
//! When `sum_j c_j y_j^l = 0` for `l <= floor(t)`, every integer power of `z`
//! below `t` cancels and the leading term is `z^t` with coefficient
//! `-a sum_jk c_j c_k (y_j^2 + y_k^2)^t`. Its sign follows the parity of
//! `floor(t)`; for odd parity `f` turns negative at small `z`, which scales
//! back to a kernel configuration with a negative quadratic form.

mod identities;
mod series;

pub use identities::{elementary_identity_check, subset_product_sum};
pub use series::{expand_f, expand_f_with, Coefficient, ExpandOptions, ExponentKey, PowerSeries};

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{Pow, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hp::{self, Hp, HpCtx};
use crate::kernel::{self, KernelParams, PointConfig};
use crate::sum::Neumaier;

/// A point/coefficient configuration whose first `moment_order + 1` moments
/// vanish exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessConfig {
    y: Vec<BigRational>,
    c: Vec<BigRational>,
    moment_order: usize,
}

impl WitnessConfig {
    /// Validates the moment conditions in exact arithmetic.
    pub fn new(y: Vec<BigRational>, c: Vec<BigRational>, moment_order: usize) -> Result<Self> {
        if y.is_empty() || y.len() != c.len() {
            return Err(Error::InvalidParams(format!(
                "witness needs matching nonempty y and c (got {} and {})",
                y.len(),
                c.len()
            )));
        }
        let m = moments(&y, &c, moment_order);
        if let Some(l) = m.iter().position(|v| !v.is_zero()) {
            return Err(Error::Precondition(format!(
                "moment of order {l} is {} (must vanish through order {moment_order})",
                m[l]
            )));
        }
        Ok(Self { y, c, moment_order })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[BigRational] {
        &self.y
    }

    pub fn c(&self) -> &[BigRational] {
        &self.c
    }

    pub fn moment_order(&self) -> usize {
        self.moment_order
    }

    pub fn y_f64(&self) -> Vec<f64> {
        self.y.iter().map(hp::rational_to_f64).collect()
    }

    pub fn c_f64(&self) -> Vec<f64> {
        self.c.iter().map(hp::rational_to_f64).collect()
    }
}

fn moments(y: &[BigRational], c: &[BigRational], l_max: usize) -> Vec<BigRational> {
    (0..=l_max)
        .map(|l| y.iter().zip(c).map(|(yj, cj)| cj * Pow::pow(yj, l)).fold(BigRational::zero(), |acc, v| acc + v))
        .collect()
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// `n = T + 2`, `y_j = j - 1`, `c_j = (-1)^(j-1) binom(T+1, j-1)`.
pub fn build_binomial_witness(order: usize) -> WitnessConfig {
    let n = order + 2;
    let top = BigInt::from(order + 1);
    let y = (0..n).map(|j| int(j as i64)).collect();
    let c = (0..n)
        .map(|j| {
            let b = BigRational::from_integer(binomial(top.clone(), BigInt::from(j)));
            if j % 2 == 0 {
                b
            } else {
                -b
            }
        })
        .collect();
    WitnessConfig::new(y, c, order).expect("binomial witnesses satisfy their moment conditions")
}

/// `sum_j c_j y_j^l` for `l = 0..=l_max`.
pub fn check_moments(w: &WitnessConfig, l_max: usize) -> Vec<BigRational> {
    moments(&w.y, &w.c, l_max)
}

/// `(-1)^v sum_jk c_j c_k (y_j - y_k)^(2v)` for any configuration.
pub fn negsum(v: usize, y: &[BigRational], c: &[BigRational]) -> BigRational {
    let mut acc = BigRational::zero();
    for (yj, cj) in y.iter().zip(c) {
        for (yk, ck) in y.iter().zip(c) {
            let d = yj - yk;
            acc += cj * ck * Pow::pow(&d, 2 * v);
        }
    }
    if v % 2 == 1 {
        -acc
    } else {
        acc
    }
}

/// [`negsum`] on a witness whose moments vanish through order `v`; the
/// result is then exactly zero.
pub fn negsum_check(v: usize, w: &WitnessConfig) -> Result<BigRational> {
    if w.moment_order < v {
        return Err(Error::Precondition(format!("moments vanish only through order {}, need {v}", w.moment_order)));
    }
    Ok(negsum(v, &w.y, &w.c))
}

/// `sum_jk c_j c_k (y_j^2 + y_k^2)^l`, exact. Zero for `l <= moment_order`.
pub fn moment_annihilation(w: &WitnessConfig, l: usize) -> BigRational {
    let mut acc = BigRational::zero();
    for (yj, cj) in w.y.iter().zip(&w.c) {
        for (yk, ck) in w.y.iter().zip(&w.c) {
            let s = yj * yj + yk * yk;
            acc += cj * ck * Pow::pow(&s, l);
        }
    }
    acc
}

/// `sum_j c_j exp(-lambda y_j^2)`.
pub fn exp_sum(lambda: f64, w: &WitnessConfig) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(w.y_f64().iter().zip(w.c_f64()).map(|(y, c)| c * (-lambda * y * y).exp()).collect::<Neumaier>().total())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpSumScan {
    pub max_abs: f64,
    pub argmax_lambda: f64,
    pub samples: usize,
}

/// Largest `|exp_sum|` over a log-spaced grid of `lambda` in `[lo, hi]`.
pub fn exp_sum_scan(w: &WitnessConfig, lo: f64, hi: f64, samples: usize) -> Result<ExpSumScan> {
    if !(lo > 0.0 && hi > lo) || samples < 2 {
        return Err(Error::InvalidParams("need 0 < lo < hi and at least 2 samples".into()));
    }
    let mut best = (0.0f64, lo);
    for i in 0..samples {
        let lambda = lo * (hi / lo).powf(i as f64 / (samples - 1) as f64);
        let v = exp_sum(lambda, w)?.abs();
        if v > best.0 {
            best = (v, lambda);
        }
    }
    Ok(ExpSumScan { max_abs: best.0, argmax_lambda: best.1, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictedSign {
    Nonnegative,
    Nonpositive,
}

pub(crate) fn integer_part(t: f64) -> Result<usize> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if (t - t.round()).abs() <= 1e-9 {
        return Err(Error::Domain(format!("t = {t} is an integer; the parity argument needs t not in N")));
    }
    Ok(t.floor() as usize)
}

/// Nonpositive iff `floor(t)` is odd.
pub fn sign_predict(t: f64) -> Result<PredictedSign> {
    Ok(if integer_part(t)? % 2 == 1 { PredictedSign::Nonpositive } else { PredictedSign::Nonnegative })
}

fn hp_values(ctx: &mut HpCtx, v: &[BigRational]) -> Vec<Hp> {
    v.iter().map(|q| ctx.rational(q)).collect()
}

/// `-a sum_jk c_j c_k (y_j^2 + y_k^2)^t` at the given precision.
pub fn zt_coefficient_hp(ctx: &mut HpCtx, params: &KernelParams, w: &WitnessConfig) -> Result<Hp> {
    let need = params.t().floor() as usize;
    let m = check_moments(w, need);
    if let Some(l) = m.iter().position(|v| !v.is_zero()) {
        return Err(Error::Precondition(format!(
            "moment of order {l} does not vanish; the z^t coefficient formula needs vanishing moments through floor(t) = {need}"
        )));
    }
    let y = hp_values(ctx, &w.y);
    let c = hp_values(ctx, &w.c);
    let t = ctx.f(params.t());
    let mut acc = ctx.zero();
    for j in 0..y.len() {
        for k in 0..y.len() {
            let yj2 = ctx.mul(&y[j], &y[j]);
            let yk2 = ctx.mul(&y[k], &y[k]);
            let s = ctx.add(&yj2, &yk2);
            let p = ctx.powf(&s, &t);
            let cc = ctx.mul(&c[j], &c[k]);
            let term = ctx.mul(&cc, &p);
            acc = ctx.add(&acc, &term);
        }
    }
    let a = ctx.f(-params.a());
    Ok(ctx.mul(&a, &acc))
}

pub fn zt_coefficient(params: &KernelParams, w: &WitnessConfig) -> Result<f64> {
    let mut ctx = HpCtx::with_digits(hp::DEFAULT_DIGITS);
    let v = zt_coefficient_hp(&mut ctx, params, w)?;
    Ok(ctx.to_f64(&v))
}

/// Factors `1 + A_pq z + B_pq z^t` of the cleared form, row-major in `(p,q)`.
fn direct_factors(ctx: &mut HpCtx, params: &KernelParams, w: &WitnessConfig, z: &Hp) -> Vec<Hp> {
    let y = hp_values(ctx, &w.y);
    let t = ctx.f(params.t());
    let a = ctx.f(params.a());
    let zt = ctx.powf(z, &t);
    let one = ctx.one();
    let n = y.len();
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        for q in 0..n {
            let d = ctx.sub(&y[p], &y[q]);
            let d2 = ctx.mul(&d, &d);
            let lin = ctx.mul(&d2, z);
            let yp2 = ctx.mul(&y[p], &y[p]);
            let yq2 = ctx.mul(&y[q], &y[q]);
            let s = ctx.add(&yp2, &yq2);
            let b = ctx.powf(&s, &t);
            let b = ctx.mul(&a, &b);
            let frac = ctx.mul(&b, &zt);
            let f = ctx.add(&one, &lin);
            out.push(ctx.add(&f, &frac));
        }
    }
    out
}

/// Evaluates the product form of `f(z)` (no expansion) at the context's
/// precision, using prefix/suffix products to drop the `(j,k)` factor.
pub fn eval_f_direct_hp(ctx: &mut HpCtx, params: &KernelParams, w: &WitnessConfig, z: &Hp) -> Hp {
    let n = w.n();
    let factors = direct_factors(ctx, params, w, z);
    let len = factors.len();
    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(ctx.one());
    for f in &factors {
        let next = ctx.mul(prefix.last().unwrap(), f);
        prefix.push(next);
    }
    let mut suffix = vec![ctx.one(); len + 1];
    for i in (0..len).rev() {
        suffix[i] = ctx.mul(&suffix[i + 1], &factors[i]);
    }
    let c = hp_values(ctx, &w.c);
    let mut acc = ctx.zero();
    for j in 0..n {
        for k in 0..n {
            let idx = j * n + k;
            let without = ctx.mul(&prefix[idx], &suffix[idx + 1]);
            let cc = ctx.mul(&c[j], &c[k]);
            let term = ctx.mul(&cc, &without);
            acc = ctx.add(&acc, &term);
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionOptions {
    pub start_bits: usize,
    pub max_bits: usize,
}

impl Default for PrecisionOptions {
    fn default() -> Self {
        Self { start_bits: hp::digits_to_bits(hp::DEFAULT_DIGITS), max_bits: 8192 }
    }
}

/// A value computed at two precisions that agree to about 32 bits.
pub struct Stable {
    pub value: Hp,
    pub bits: usize,
}

/// Evaluates `eval(ctx)` at increasing precision until two successive
/// precisions agree to a relative `2^-32`.
pub fn stabilize<F>(opts: PrecisionOptions, mut eval: F) -> Result<Stable>
where
    F: FnMut(&mut HpCtx) -> Hp,
{
    let mut bits = opts.start_bits.max(64);
    let mut prev_ctx = HpCtx::new(bits);
    let mut prev = eval(&mut prev_ctx);
    loop {
        let next_bits = bits * 2;
        if next_bits > opts.max_bits {
            return Err(Error::PrecisionExhausted {
                bits,
                detail: "successive precisions disagree; raise the precision cap".into(),
            });
        }
        let mut ctx = HpCtx::new(next_bits);
        let cur = eval(&mut ctx);
        let diff = ctx.sub(&cur, &prev);
        let bound = ctx.mul(&cur, &ctx.f(2f64.powi(-32)));
        let both_zero = cur.is_zero() && prev.is_zero();
        if both_zero || (hp::signum(&cur) == hp::signum(&prev) && hp::abs_le(&diff, &bound)) {
            return Ok(Stable { value: cur, bits: next_bits });
        }
        bits = next_bits;
        prev = cur;
    }
}

/// `f(z)` by direct evaluation with automatic precision escalation.
pub fn eval_f_direct(params: &KernelParams, w: &WitnessConfig, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("z must be positive, got {z}")));
    }
    let s = stabilize(PrecisionOptions::default(), |ctx| {
        let zh = ctx.f(z);
        eval_f_direct_hp(ctx, params, w, &zh)
    })?;
    let mut ctx = HpCtx::new(s.bits);
    Ok(ctx.to_f64(&s.value))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeZOptions {
    /// Scan `z = 2^-k` for `k = 1..=k_max`.
    pub k_max: u32,
    pub precision: PrecisionOptions,
}

impl Default for NegativeZOptions {
    fn default() -> Self {
        Self { k_max: 256, precision: PrecisionOptions::default() }
    }
}

/// A negative value of `f` together with the kernel configuration it scales
/// to. `points_dec`/`value` strings carry full working precision.
#[derive(Debug, Clone)]
pub struct NegativeZ {
    pub k: u32,
    pub z: f64,
    pub f_value: f64,
    pub f_value_dec: String,
    pub bits: usize,
    /// `x_j = y_j sqrt(z)` with the witness coefficients.
    pub config: PointConfig,
    pub points_dec: Vec<String>,
    pub coeffs_dec: Vec<String>,
    pub quadratic_form: f64,
    pub quadratic_form_dec: String,
}

pub fn find_negative_z(params: &KernelParams, w: &WitnessConfig) -> Result<NegativeZ> {
    find_negative_z_with(params, w, NegativeZOptions::default())
}

/// Scans `z = 2^-k` for the first negative `f(z)` and replays the scaled
/// configuration through the kernel's quadratic form.
pub fn find_negative_z_with(params: &KernelParams, w: &WitnessConfig, opts: NegativeZOptions) -> Result<NegativeZ> {
    let kappa = zt_coefficient(params, w)?;
    if !(kappa < 0.0) {
        return Err(Error::Precondition(format!(
            "the z^t coefficient is {kappa:e}; a negative leading term is required"
        )));
    }
    for k in 1..=opts.k_max {
        let z = 2f64.powi(-(k as i32));
        let f = stabilize(opts.precision, |ctx| {
            let zh = ctx.f(z);
            eval_f_direct_hp(ctx, params, w, &zh)
        })?;
        if !f.value.is_negative() {
            continue;
        }
        let qf = stabilize(PrecisionOptions { start_bits: f.bits, ..opts.precision }, |ctx| {
            let (pts, cs) = scaled_points(ctx, w, z);
            kernel::precise::quadratic_form(ctx, params, &pts, &cs)
        })?;
        if !qf.value.is_negative() {
            return Err(Error::Domain(format!("f(2^-{k}) < 0 but the scaled kernel quadratic form is not negative")));
        }
        let bits = qf.bits.max(f.bits);
        let mut ctx = HpCtx::new(bits);
        let (pts, cs) = scaled_points(&mut ctx, w, z);
        let points_f64: Vec<f64> = pts.iter().map(|p| ctx.to_f64(p)).collect();
        let points_dec = pts.iter().map(|p| ctx.format(p)).collect();
        let coeffs_dec = cs.iter().map(|c| ctx.format(c)).collect();
        return Ok(NegativeZ {
            k,
            z,
            f_value: ctx.to_f64(&f.value),
            f_value_dec: ctx.format(&f.value),
            bits,
            config: PointConfig::new(points_f64, w.c_f64())?,
            points_dec,
            coeffs_dec,
            quadratic_form: ctx.to_f64(&qf.value),
            quadratic_form_dec: ctx.format(&qf.value),
        });
    }
    Err(Error::NotFound(format!("f(2^-k) >= 0 for k <= {}; raise k_max or the precision cap", opts.k_max)))
}

fn scaled_points(ctx: &mut HpCtx, w: &WitnessConfig, z: f64) -> (Vec<Hp>, Vec<Hp>) {
    let zh = ctx.f(z);
    let root = ctx.sqrt(&zh);
    let pts =
        w.y.iter()
            .map(|y| {
                let yh = ctx.rational(y);
                ctx.mul(&yh, &root)
            })
            .collect();
    (pts, hp_values(ctx, &w.c))
}

/// Binomial witness of order `floor(t)`, the configuration used for
/// non-integer `t`.
pub fn default_witness(t: f64) -> Result<WitnessConfig> {
    Ok(build_binomial_witness(integer_part(t)?))
}
