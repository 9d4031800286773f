//! Extended-precision real arithmetic on top of `astro-float`.
//!
//! All values carry the context's working precision; every operation rounds
//! to nearest-even at that precision.

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

use crate::error::{Error, Result};

pub use astro_float::BigFloat as Hp;

const RM: RoundingMode = RoundingMode::ToEven;

/// Default working precision in significant decimal digits.
pub const DEFAULT_DIGITS: u32 = 60;

/// Converts decimal digits to a binary precision, rounded up to whole words
/// with one guard word.
pub fn digits_to_bits(digits: u32) -> usize {
    let raw = (digits as f64 * std::f64::consts::LOG2_10).ceil() as usize;
    raw.div_ceil(64) * 64 + 64
}

pub struct HpCtx {
    bits: usize,
    cc: Consts,
}

impl std::fmt::Debug for HpCtx {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HpCtx").field("bits", &self.bits).finish()
    }
}

impl HpCtx {
    pub fn new(bits: usize) -> Self {
        let bits = bits.max(64);
        let cc = Consts::new().expect("astro-float constants cache");
        Self { bits, cc }
    }

    pub fn with_digits(digits: u32) -> Self {
        Self::new(digits_to_bits(digits))
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn f(&self, x: f64) -> Hp {
        BigFloat::from_f64(x, self.bits)
    }

    pub fn zero(&self) -> Hp {
        BigFloat::from_f64(0.0, self.bits)
    }

    pub fn one(&self) -> Hp {
        BigFloat::from_f64(1.0, self.bits)
    }

    pub fn int(&mut self, i: &BigInt) -> Hp {
        BigFloat::parse(&i.to_string(), Radix::Dec, self.bits, RM, &mut self.cc)
    }

    pub fn rational(&mut self, q: &BigRational) -> Hp {
        let num = self.int(q.numer());
        if q.denom() == &BigInt::from(1) {
            return num;
        }
        let den = self.int(q.denom());
        self.div(&num, &den)
    }

    pub fn add(&self, a: &Hp, b: &Hp) -> Hp {
        a.add(b, self.bits, RM)
    }

    pub fn sub(&self, a: &Hp, b: &Hp) -> Hp {
        a.sub(b, self.bits, RM)
    }

    pub fn mul(&self, a: &Hp, b: &Hp) -> Hp {
        a.mul(b, self.bits, RM)
    }

    pub fn div(&self, a: &Hp, b: &Hp) -> Hp {
        a.div(b, self.bits, RM)
    }

    pub fn sqrt(&self, a: &Hp) -> Hp {
        a.sqrt(self.bits, RM)
    }

    pub fn exp(&mut self, a: &Hp) -> Hp {
        a.exp(self.bits, RM, &mut self.cc)
    }

    pub fn ln(&mut self, a: &Hp) -> Hp {
        a.ln(self.bits, RM, &mut self.cc)
    }

    pub fn pi(&mut self) -> Hp {
        self.cc.pi(self.bits, RM)
    }

    /// `base^t` with the convention `0^t = 0`.
    pub fn powf(&mut self, base: &Hp, t: &Hp) -> Hp {
        if base.is_zero() {
            return self.zero();
        }
        base.pow(t, self.bits, RM, &mut self.cc)
    }

    pub fn powi(&self, base: &Hp, n: usize) -> Hp {
        base.powi(n, self.bits, RM)
    }

    /// Decimal rendering with every digit the precision supports.
    pub fn format(&mut self, a: &Hp) -> String {
        a.format(Radix::Dec, RM, &mut self.cc).unwrap_or_else(|_| "NaN".to_string())
    }

    /// Decimal rendering rounded to `digits` significant digits.
    pub fn format_sig(&mut self, a: &Hp, digits: u32) -> String {
        round_sig(&self.format(a), digits.max(1) as usize)
    }

    pub fn parse(&mut self, s: &str) -> Result<Hp> {
        let v = BigFloat::parse(s.trim(), Radix::Dec, self.bits, RM, &mut self.cc);
        if v.is_nan() {
            return Err(Error::Schema(format!("not a decimal number: {s:?}")));
        }
        Ok(v)
    }

    pub fn to_f64(&mut self, a: &Hp) -> f64 {
        if a.is_zero() {
            return 0.0;
        }
        if a.is_nan() {
            return f64::NAN;
        }
        self.format(a).parse::<f64>().unwrap_or(f64::NAN)
    }
}

/// -1, 0 or 1.
pub fn signum(a: &Hp) -> i32 {
    if a.is_zero() {
        0
    } else if a.is_negative() {
        -1
    } else {
        1
    }
}

pub fn abs(a: &Hp) -> Hp {
    if a.is_negative() {
        a.neg()
    } else {
        a.clone()
    }
}

/// `|a| <= |b|`; false if either is NaN.
pub fn abs_le(a: &Hp, b: &Hp) -> bool {
    abs(a).cmp(&abs(b)).is_some_and(|o| o <= 0)
}

/// Exact rational value of an `f64`.
pub fn rational_from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

/// Best-effort `f64` view of an exact rational.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    if let Some(v) = q.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    let mut ctx = HpCtx::new(128);
    let h = ctx.rational(q);
    let v = ctx.to_f64(&h);
    if q.is_negative() {
        -v.abs()
    } else {
        v
    }
}


/// Rounds a decimal string `[-]d.ddd[e±N]` to `digits` significant digits, half away from zero.
pub fn round_sig(s: &str, digits: usize) -> String {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (mant, exp) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i64>()),
        None => (body, Ok(0)),
    };
    let Ok(mut exp) = exp else { return s.to_string() };
    let point = mant.find('.').unwrap_or(mant.len());
    let all: Vec<u8> = mant.bytes().filter(|b| b.is_ascii_digit()).map(|b| b - b'0').collect();
    if all.len() != mant.len() - usize::from(point < mant.len()) {
        return s.to_string();
    }
    let Some(first) = all.iter().position(|&d| d != 0) else { return "0".to_string() };
    // value = 0.d1 d2 ... * 10^(exp + point - first)
    exp += point as i64 - first as i64 - 1;
    let mut kept: Vec<u8> = all[first..].iter().copied().take(digits).collect();
    if all.len() > first + digits && all[first + digits] >= 5 {
        let mut i = kept.len();
        loop {
            if i == 0 {
                kept.insert(0, 1);
                kept.pop();
                exp += 1;
                break;
            }
            i -= 1;
            if kept[i] == 9 {
                kept[i] = 0;
            } else {
                kept[i] += 1;
                break;
            }
        }
    }
    while kept.len() > 1 && kept.last() == Some(&0) {
        kept.pop();
    }
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push((b'0' + kept[0]) as char);
    if kept.len() > 1 {
        out.push('.');
        out.extend(kept[1..].iter().map(|&d| (b'0' + d) as char));
    }
    out.push_str(&format!("e{exp}"));
    out
}

#[cfg(test)]
mod round_tests {
    use super::round_sig;

    #[test]
    fn rounds_significant_digits() {
        assert_eq!(round_sig("-3.38292478e-2", 4), "-3.383e-2");
        assert_eq!(round_sig("9.9996e3", 4), "1e4");
        assert_eq!(round_sig("0.000125", 2), "1.3e-4");
        assert_eq!(round_sig("12.5", 5), "1.25e1");
        assert_eq!(round_sig("0.0", 3), "0");
    }
}
