//! Brute-force check of the elementary symmetric identity behind the
//! cancellation of integer powers in `f`.

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest number of subsets enumerated by a single check.
pub const SUBSET_CAP: u128 = 5_000_000;

/// Sum over all `m`-element subsets of the product of their members.
pub fn subset_product_sum(values: &[BigRational], m: usize) -> Result<BigRational> {
    let len = values.len();
    if m > len {
        return Ok(BigRational::zero());
    }
    let count = binomial(BigInt::from(len), BigInt::from(m)).to_u128().unwrap_or(u128::MAX);
    if count > SUBSET_CAP {
        return Err(Error::SizeCap { what: "subset enumeration", estimate: count, cap: SUBSET_CAP });
    }
    if m == 0 {
        return Ok(BigRational::one());
    }
    let mut idx: Vec<usize> = (0..m).collect();
    let mut total = BigRational::zero();
    loop {
        total += idx.iter().fold(BigRational::one(), |acc, &i| acc * &values[i]);
        let mut pos = m;
        while pos > 0 && idx[pos - 1] == len - m + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return Ok(total);
        }
        idx[pos - 1] += 1;
        for q in pos..m {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// For pair weights `d_pq = (y_p - y_q)^2` on all ordered pairs, returns
/// `(lhs, rhs)` where `lhs` sums `m`-subset products avoiding pair `(j,k)`
/// and `rhs = sum_v (-1)^v d_jk^v e_(m-v)(all pairs)`. `j`, `k` are 1-based.
pub fn elementary_identity_check(
    n: usize,
    m: usize,
    j: usize,
    k: usize,
    y: &[BigRational],
) -> Result<(BigRational, BigRational)> {
    if y.len() != n || n == 0 {
        return Err(Error::InvalidParams(format!("expected {n} points, got {}", y.len())));
    }
    if !(1..=n).contains(&j) || !(1..=n).contains(&k) {
        return Err(Error::InvalidParams(format!("pair ({j},{k}) outside 1..={n}")));
    }
    let mut all = Vec::with_capacity(n * n);
    let mut rest = Vec::with_capacity(n * n - 1);
    let mut d_jk = BigRational::zero();
    for p in 0..n {
        for q in 0..n {
            let d = &y[p] - &y[q];
            let d2 = &d * &d;
            if (p + 1, q + 1) == (j, k) {
                d_jk = d2.clone();
            } else {
                rest.push(d2.clone());
            }
            all.push(d2);
        }
    }
    let lhs = subset_product_sum(&rest, m)?;
    let mut rhs = BigRational::zero();
    let mut power = BigRational::one();
    for v in 0..=m {
        let e = subset_product_sum(&all, m - v)?;
        let term = &power * e;
        if v % 2 == 0 {
            rhs += term;
        } else {
            rhs -= term;
        }
        power *= &d_jk;
    }
    Ok((lhs, rhs))
}
