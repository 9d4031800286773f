//! Exact/extended-precision expansion of `f(z)` in monomials `z^(i + j t)`.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::WitnessConfig;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hp::{self, Hp, HpCtx};
use crate::kernel::KernelParams;

/// Monomial `z^(i + j t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExponentKey {
    pub i: u32,
    pub j: u32,
}

impl ExponentKey {
    pub fn exponent(&self, t: f64) -> f64 {
        self.i as f64 + self.j as f64 * t
    }
}

#[derive(Debug, Clone)]
pub enum Coefficient {
    /// Integer powers of `z` (`j = 0`) are exact rationals.
    Exact(BigRational),
    Approx(Hp),
}

/// Sparse expansion of `f(z)`; zero coefficients are not stored.
#[derive(Debug, Clone)]
pub struct PowerSeries {
    t: f64,
    bits: usize,
    exact: BTreeMap<u32, BigRational>,
    approx: BTreeMap<ExponentKey, Hp>,
}

impl PowerSeries {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn coefficient(&self, key: ExponentKey) -> Option<Coefficient> {
        if key.j == 0 {
            self.exact.get(&key.i).cloned().map(Coefficient::Exact)
        } else {
            self.approx.get(&key).cloned().map(Coefficient::Approx)
        }
    }

    pub fn coefficient_f64(&self, key: ExponentKey) -> f64 {
        match self.coefficient(key) {
            None => 0.0,
            Some(Coefficient::Exact(q)) => hp::rational_to_f64(&q),
            Some(Coefficient::Approx(h)) => HpCtx::new(self.bits).to_f64(&h),
        }
    }

    /// Exact integer-power coefficients.
    pub fn exact_terms(&self) -> &BTreeMap<u32, BigRational> {
        &self.exact
    }

    pub fn approx_terms(&self) -> &BTreeMap<ExponentKey, Hp> {
        &self.approx
    }

    /// Nonzero keys ordered by exponent value, ties by `(i, j)`.
    pub fn keys_by_exponent(&self) -> Vec<ExponentKey> {
        let mut keys: Vec<ExponentKey> =
            self.exact.keys().map(|&i| ExponentKey { i, j: 0 }).chain(self.approx.keys().copied()).collect();
        keys.sort_by(|a, b| a.exponent(self.t).total_cmp(&b.exponent(self.t)).then(a.cmp(b)));
        keys
    }

    /// Sums every stored monomial at `z` with the series' precision.
    pub fn evaluate_hp(&self, ctx: &mut HpCtx, z: &Hp) -> Hp {
        let t = ctx.f(self.t);
        let zt = ctx.powf(z, &t);
        let mut acc = ctx.zero();
        for (&i, q) in &self.exact {
            let c = ctx.rational(q);
            let term = ctx.mul(&c, &ctx.powi(z, i as usize));
            acc = ctx.add(&acc, &term);
        }
        for (key, c) in &self.approx {
            let m = ctx.mul(&ctx.powi(z, key.i as usize), &ctx.powi(&zt, key.j as usize));
            acc = ctx.add(&acc, &ctx.mul(c, &m));
        }
        acc
    }

    pub fn evaluate(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) || !z.is_finite() {
            return Err(Error::Domain(format!("z must be nonnegative, got {z}")));
        }
        let mut ctx = HpCtx::new(self.bits);
        let zh = ctx.f(z);
        let v = self.evaluate_hp(&mut ctx, &zh);
        Ok(ctx.to_f64(&v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpandOptions {
    /// Largest configuration size accepted; cost grows like `n^8`.
    pub max_n: usize,
    pub bits: usize,
    pub exec: Exec,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        Self { max_n: 8, bits: hp::digits_to_bits(hp::DEFAULT_DIGITS), exec: Exec::default() }
    }
}

pub fn expand_f(params: &KernelParams, w: &WitnessConfig) -> Result<PowerSeries> {
    expand_f_with(params, w, ExpandOptions::default())
}

fn key_count(n: usize) -> u128 {
    let m = (n * n) as u128;
    m * (m + 1) / 2
}

/// Multiplies out each product `prod_{(p,q) != (j,k)} (1 + A z + B z^t)`
/// and accumulates `c_j c_k` times it. Symmetric pairs are merged.
pub fn expand_f_with(params: &KernelParams, w: &WitnessConfig, opts: ExpandOptions) -> Result<PowerSeries> {
    let n = w.n();
    if n > opts.max_n {
        return Err(Error::SizeCap { what: "expansion monomials", estimate: key_count(n), cap: key_count(opts.max_n) });
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (j..n).map(move |k| (j, k))).collect();
    let partials = opts.exec.map_slice(&pairs, |&(j, k)| pair_product(params, w, j, k, opts.bits));

    let mut ctx = HpCtx::new(opts.bits);
    let mut exact = vec![BigRational::zero(); n * n];
    let mut grid: Vec<Vec<Hp>> = Vec::new();
    for ((j, k), (ex, gr)) in pairs.iter().zip(partials) {
        let mut weight = &w.c()[*j] * &w.c()[*k];
        if j != k {
            weight *= BigRational::from_integer(2.into());
        }
        for (acc, v) in exact.iter_mut().zip(ex) {
            *acc += &weight * v;
        }
        let wh = ctx.rational(&weight);
        if grid.is_empty() {
            grid = vec![Vec::new(); gr.len()];
        }
        for (row_acc, row) in grid.iter_mut().zip(gr) {
            if row_acc.len() < row.len() {
                row_acc.resize(row.len(), ctx.zero());
            }
            for (acc, v) in row_acc.iter_mut().zip(row) {
                *acc = ctx.add(acc, &ctx.mul(&wh, &v));
            }
        }
    }
    let exact = exact.into_iter().enumerate().filter(|(_, q)| !q.is_zero()).map(|(i, q)| (i as u32, q)).collect();
    let mut approx = BTreeMap::new();
    for (jd, row) in grid.into_iter().enumerate().skip(1) {
        for (i, v) in row.into_iter().enumerate() {
            if !v.is_zero() {
                approx.insert(ExponentKey { i: i as u32, j: jd as u32 }, v);
            }
        }
    }
    Ok(PowerSeries { t: params.t(), bits: opts.bits, exact, approx })
}

/// Product over all `(p,q) != (j,k)`: exact coefficients of the pure `z^i`
/// part and an extended-precision grid `grid[j][i]` of `z^(i + j t)`.
fn pair_product(
    params: &KernelParams,
    w: &WitnessConfig,
    j: usize,
    k: usize,
    bits: usize,
) -> (Vec<BigRational>, Vec<Vec<Hp>>) {
    let n = w.n();
    let y = w.y();
    let mut ctx = HpCtx::new(bits);
    let t = ctx.f(params.t());
    let a = ctx.f(params.a());
    let mut exact = vec![BigRational::zero(); n * n];
    exact[0] = BigRational::from_integer(1.into());
    let mut deg_a = 0usize;
    let mut grid: Vec<Vec<Hp>> = vec![vec![ctx.zero(); n * n]; n * n];
    grid[0][0] = ctx.one();
    let mut deg_b = 0usize;
    let mut used = 0usize;
    for p in 0..n {
        for q in 0..n {
            if (p, q) == (j, k) {
                continue;
            }
            let d = &y[p] - &y[q];
            let coef_a = &d * &d;
            let s = &y[p] * &y[p] + &y[q] * &y[q];
            let has_a = !coef_a.is_zero();
            let has_b = !s.is_zero();
            if has_a {
                for i in (1..=deg_a + 1).rev() {
                    let add = &exact[i - 1] * &coef_a;
                    exact[i] += add;
                }
            }
            let ah = ctx.rational(&coef_a);
            let bh = if has_b {
                let sh = ctx.rational(&s);
                let p = ctx.powf(&sh, &t);
                ctx.mul(&a, &p)
            } else {
                ctx.zero()
            };
            let new_a = deg_a + usize::from(has_a);
            let new_b = deg_b + usize::from(has_b);
            used += 1;
            for jd in (0..=new_b).rev() {
                for i in (0..=new_a.min(used - jd)).rev() {
                    let mut v = grid[jd][i].clone();
                    if has_a && i > 0 {
                        v = ctx.add(&v, &ctx.mul(&ah, &grid[jd][i - 1]));
                    }
                    if has_b && jd > 0 {
                        v = ctx.add(&v, &ctx.mul(&bh, &grid[jd - 1][i]));
                    }
                    grid[jd][i] = v;
                }
            }
            deg_a += usize::from(has_a);
            deg_b += usize::from(has_b);
        }
    }
    (exact, grid)
}
