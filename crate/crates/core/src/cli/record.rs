//! Run records, certificates and their independent replay.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::hp::{self, Hp, HpCtx};
use crate::kernel::{self, precise, KernelParams, PointConfig};
use crate::sum::Neumaier;
use crate::witness::{stabilize, PrecisionOptions};

pub const RECORD_VERSION: &str = "kpd-record/1";

/// A number as a full-precision decimal string plus its nearest `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Num {
    pub dec: String,
    pub f64: f64,
}

impl Num {
    pub fn from_f64(x: f64) -> Self {
        Self { dec: format_f64(x), f64: x }
    }

    pub fn from_hp(ctx: &mut HpCtx, x: &Hp, digits: u32) -> Self {
        Self { dec: ctx.format_sig(x, digits), f64: ctx.to_f64(x) }
    }
}

/// Shortest decimal that round-trips.
pub fn format_f64(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertKind {
    /// `sum c_j c_k K(x_j, x_k)`.
    Gram,
    /// `D(x,y)^2 - D(x,x) D(y,y)` on two points.
    G,
    /// Quadratic form with denominators cleared.
    F,
    /// `sum c_j c_k (base(x_j, x_k))` over zero-sum coefficients.
    Cnd,
}

/// A replayable claim: evaluating `kind` on the raw inputs gives `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub kind: CertKind,
    pub t: f64,
    pub a: f64,
    pub points: Vec<String>,
    pub coeffs: Vec<String>,
    pub value: String,
}

/// Above this size Gram certificates are valued in double precision with a
/// rounding bound instead of extended precision.
const HP_GRAM_LIMIT: usize = 24;

fn precision(digits: u32) -> PrecisionOptions {
    PrecisionOptions { start_bits: hp::digits_to_bits(digits), max_bits: 1 << 15 }
}

fn parse_all(ctx: &mut HpCtx, v: &[String]) -> Result<Vec<Hp>> {
    v.iter().map(|s| ctx.parse(s)).collect()
}

fn parse_f64s(v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| s.trim().parse::<f64>().map_err(|_| Error::Schema(format!("not a number: {s:?}")))).collect()
}

/// Result of evaluating a certificate's inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: String,
    pub value_f64: f64,
    pub sign: i32,
    /// Absolute uncertainty of `value`; zero for stabilized extended
    /// precision up to the relative agreement it was checked to.
    pub rounding_bound: f64,
}

fn f64_gram(params: &KernelParams, x: &[f64], c: &[f64]) -> Result<(f64, f64)> {
    let cfg = PointConfig::new(x.to_vec(), c.to_vec())?;
    let g = kernel::gram_matrix(params, &cfg)?;
    let mut abs = Neumaier::new();
    for j in 0..x.len() {
        for k in 0..x.len() {
            abs.add((c[j] * c[k] * g.get(j, k)).abs());
        }
    }
    let n = x.len() as f64;
    Ok((g.quadratic_form(c), 8.0 * (n + 4.0) * f64::EPSILON * abs.total()))
}

/// Evaluates the quantity named by `kind` on the given inputs.
pub fn evaluate(
    kind: CertKind,
    params: &KernelParams,
    points: &[String],
    coeffs: &[String],
    digits: u32,
) -> Result<Evaluation> {
    if points.len() != coeffs.len() || points.is_empty() {
        return Err(Error::Schema("certificate needs matching nonempty points and coeffs".into()));
    }
    if kind == CertKind::G && points.len() != 2 {
        return Err(Error::Schema("a g certificate has exactly two points".into()));
    }
    if kind == CertKind::Gram {
        let (x, c) = (parse_f64s(points)?, parse_f64s(coeffs)?);
        let exact_inputs = x.iter().zip(points).all(|(v, s)| s.parse::<f64>().is_ok_and(|p| p == *v));
        let (v, bound) = f64_gram(params, &x, &c)?;
        if points.len() > HP_GRAM_LIMIT && exact_inputs && v.abs() > bound {
            return Ok(Evaluation {
                value: format_f64(v),
                value_f64: v,
                sign: v.signum() as i32,
                rounding_bound: bound,
            });
        }
    }
    {
        let mut probe = HpCtx::new(64);
        parse_all(&mut probe, points)?;
        parse_all(&mut probe, coeffs)?;
    }
    let s = stabilize(precision(digits), |ctx| {
        let pts = parse_all(ctx, points).expect("validated above");
        let cs = parse_all(ctx, coeffs).expect("validated above");
        match kind {
            CertKind::Gram => precise::quadratic_form(ctx, params, &pts, &cs),
            CertKind::F => precise::cleared_form(ctx, params, &pts, &cs),
            CertKind::G => {
                let dxy = precise::denominator(ctx, params, &pts[0], &pts[1]);
                let dxx = precise::denominator(ctx, params, &pts[0], &pts[0]);
                let dyy = precise::denominator(ctx, params, &pts[1], &pts[1]);
                let sq = ctx.mul(&dxy, &dxy);
                let pr = ctx.mul(&dxx, &dyy);
                ctx.sub(&sq, &pr)
            }
            CertKind::Cnd => {
                let mut acc = ctx.zero();
                for j in 0..pts.len() {
                    for k in 0..pts.len() {
                        let b = precise::cnd_base(ctx, params, &pts[j], &pts[k]);
                        let cc = ctx.mul(&cs[j], &cs[k]);
                        acc = ctx.add(&acc, &ctx.mul(&cc, &b));
                    }
                }
                acc
            }
        }
    })?;
    let mut ctx = HpCtx::new(s.bits);
    Ok(Evaluation {
        value: ctx.format_sig(&s.value, digits),
        value_f64: ctx.to_f64(&s.value),
        sign: hp::signum(&s.value),
        rounding_bound: 0.0,
    })
}

impl Certificate {
    /// Builds a certificate and values it from its own inputs.
    pub fn build(
        kind: CertKind,
        params: &KernelParams,
        points: Vec<String>,
        coeffs: Vec<String>,
        digits: u32,
    ) -> Result<Self> {
        let ev = evaluate(kind, params, &points, &coeffs, digits)?;
        Ok(Self { kind, t: params.t(), a: params.a(), points, coeffs, value: ev.value })
    }

    pub fn from_f64(
        kind: CertKind,
        params: &KernelParams,
        points: &[f64],
        coeffs: &[f64],
        digits: u32,
    ) -> Result<Self> {
        let p = points.iter().map(|x| format_f64(*x)).collect();
        let c = coeffs.iter().map(|x| format_f64(*x)).collect();
        Self::build(kind, params, p, c, digits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ReplayVerdict {
    Confirmed,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    /// JSON pointer of the certificate inside the record.
    pub path: String,
    pub kind: CertKind,
    pub stored: String,
    pub replayed: String,
    pub verdict: ReplayVerdict,
}

/// Relative agreement required between stored and replayed values.
pub const REPLAY_REL_TOL: f64 = 1e-6;

pub fn replay(cert: &Certificate, path: String, digits: u32) -> Result<Replay> {
    let params = KernelParams::new(cert.t, cert.a)?;
    let ev = evaluate(cert.kind, &params, &cert.points, &cert.coeffs, digits)?;
    let mut ctx = HpCtx::new(hp::digits_to_bits(digits));
    let stored = ctx.parse(&cert.value)?;
    let replayed = ctx.parse(&ev.value)?;
    let diff = ctx.sub(&stored, &replayed);
    let allowed = ctx.add(&ctx.mul(&ctx.f(REPLAY_REL_TOL), &hp::abs(&stored)), &ctx.f(ev.rounding_bound));
    let same_sign = hp::signum(&stored) == ev.sign;
    let verdict =
        if same_sign && hp::abs_le(&diff, &allowed) { ReplayVerdict::Confirmed } else { ReplayVerdict::Mismatch };
    Ok(Replay { path, kind: cert.kind, stored: cert.value.clone(), replayed: ev.value, verdict })
}

/// Every object in `v` that looks like a certificate, with its JSON pointer.
pub fn find_certificates(v: &Value) -> Result<Vec<(String, Certificate)>> {
    let mut out = Vec::new();
    walk(v, String::new(), &mut out)?;
    Ok(out)
}

fn walk(v: &Value, path: String, out: &mut Vec<(String, Certificate)>) -> Result<()> {
    match v {
        Value::Object(map) => {
            if map.contains_key("kind") && map.contains_key("points") && map.contains_key("value") {
                let cert: Certificate = serde_json::from_value(v.clone())
                    .map_err(|e| Error::Schema(format!("certificate at {path:?}: {e}")))?;
                out.push((path, cert));
                return Ok(());
            }
            for (k, child) in map {
                walk(child, format!("{path}/{k}"), out)?;
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                walk(child, format!("{path}/{i}"), out)?;
            }
        }
        _ => {}
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub wall_ms: u128,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub version: String,
    pub config: super::RunConfig,
    pub metadata: Metadata,
    pub payload: Value,
}
