//! Subcommand arguments and payload builders.

use std::path::PathBuf;

use clap::Args;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::record::{self, CertKind, Certificate, Num, Replay, ReplayVerdict, RunRecord};
use super::{CommandName, RunConfig, Status};
use crate::definiteness::{self, SearchOptions, Verdict};
use crate::error::{Error, Result};
use crate::frac_power;
use crate::hp::{self, HpCtx};
use crate::kernel::{self, KernelParams, PointConfig};
use crate::schwarz::{self, SchwarzOutcome, ViolationOptions};
use crate::spectral::{self, Level, SpectralOptions, SweepEntry, SweepOptions};
use crate::witness::{self, NegativeZOptions, PrecisionOptions};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GramArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    /// Comma-separated points; omit with --search.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub points: Vec<f64>,
    /// Optional coefficients for the quadratic form.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub coeffs: Vec<f64>,
    /// Seeded random search instead of fixed points.
    #[arg(long)]
    pub search: bool,
    #[arg(long, default_value_t = 8)]
    pub n_max: usize,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    /// Points are drawn from [-range, range].
    #[arg(long, default_value_t = 10.0)]
    pub range: f64,
}

impl Default for GramArgs {
    fn default() -> Self {
        Self { t: 0.0, a: 0.0, points: vec![], coeffs: vec![], search: false, n_max: 8, trials: 500, range: 10.0 }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CndArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub points: Vec<f64>,
    /// Zero-sum coefficients matching --points.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub coeffs: Vec<f64>,
    #[arg(long)]
    pub search: bool,
    #[arg(long, default_value_t = 8)]
    pub n_max: usize,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, default_value_t = 10.0)]
    pub range: f64,
}

impl Default for CndArgs {
    fn default() -> Self {
        Self { t: 0.0, a: 0.0, points: vec![], coeffs: vec![], search: false, n_max: 8, trials: 500, range: 10.0 }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    /// Also search for a 2-point violation at this `a`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    /// Moment order of the binomial witness; defaults to floor(t).
    #[arg(long)]
    pub order: Option<usize>,
    /// Scan z = 2^-k for k up to this value.
    #[arg(long, default_value_t = 256)]
    pub k_max: u32,
}

impl Default for WitnessArgs {
    fn default() -> Self {
        Self { t: 0.0, a: 0.0, order: None, k_max: 256 }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitiesArgs {
    #[arg(long, default_value_t = 3)]
    pub n_max: usize,
    #[arg(long, default_value_t = 3)]
    pub m_max: usize,
    /// Random rational point sets per (n, m, j, k).
    #[arg(long, default_value_t = 3)]
    pub samples: usize,
    #[arg(long, default_value_t = 6)]
    pub negsum_order_max: usize,
    #[arg(long, default_value_t = 12)]
    pub moment_order_max: usize,
}

impl Default for IdentitiesArgs {
    fn default() -> Self {
        Self { n_max: 3, m_max: 3, samples: 3, negsum_order_max: 6, moment_order_max: 12 }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FracpowArgs {
    /// Validate over the default (w, s) grid.
    #[arg(long)]
    pub validate: bool,
    /// Single evaluation at this exponent.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub w_re: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub w_im: f64,
}

impl Default for FracpowArgs {
    fn default() -> Self {
        Self { validate: false, s: None, w_re: 1.0, w_im: 0.0 }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    /// Node counts of the refinement ladder.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 200, 400])]
    pub nodes: Vec<usize>,
    #[arg(long, default_value_t = spectral::DEFAULT_HALF_WIDTH)]
    pub half_width: f64,
}

impl Default for SpectrumArgs {
    fn default() -> Self {
        Self { t: 0.0, a: 0.0, nodes: vec![100, 200, 400], half_width: spectral::DEFAULT_HALF_WIDTH }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 2.0)]
    pub t: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 3.0, 6.0, 9.0, 12.0])]
    pub a_grid: Vec<f64>,
    #[arg(long, default_value_t = 12.0)]
    pub a_max: f64,
    /// Add a control point at a_max + this offset.
    #[arg(long)]
    pub control: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 200, 400])]
    pub nodes: Vec<usize>,
    #[arg(long, default_value_t = spectral::DEFAULT_HALF_WIDTH)]
    pub half_width: f64,
}

impl Default for SweepArgs {
    fn default() -> Self {
        Self {
            t: 2.0,
            a_grid: vec![1.0, 3.0, 6.0, 9.0, 12.0],
            a_max: 12.0,
            control: None,
            nodes: vec![100, 200, 400],
            half_width: spectral::DEFAULT_HALF_WIDTH,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyArgs {
    /// Record file produced by another subcommand.
    pub record: PathBuf,
}

pub(super) fn dispatch(cfg: &RunConfig) -> Result<(Value, Status)> {
    match cfg.command {
        CommandName::Gram => gram(cfg, &cfg.args()?),
        CommandName::Cnd => cnd(cfg, &cfg.args()?),
        CommandName::Boundary => boundary(cfg, &cfg.args()?),
        CommandName::Witness => witness_cmd(cfg, &cfg.args()?),
        CommandName::Identities => identities(cfg, &cfg.args()?),
        CommandName::Fracpow => fracpow(cfg, &cfg.args()?),
        CommandName::Spectrum => spectrum(cfg, &cfg.args()?),
        CommandName::Sweep => sweep(cfg, &cfg.args()?),
        CommandName::Verify => verify(cfg, &cfg.args()?),
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn gram(cfg: &RunConfig, args: &GramArgs) -> Result<(Value, Status)> {
    let params = KernelParams::new(args.t, args.a)?;
    let (verdict, mut payload) = if args.search {
        let opts = SearchOptions { range: args.range, exec: cfg.exec() };
        // every diagonal entry is at most 1/pi
        let tol = cfg.tolerance / std::f64::consts::PI;
        let v = definiteness::randomized_pd_search(&params, args.n_max, args.trials, cfg.seed, tol, opts)?;
        let search = json!({ "n_max": args.n_max, "trials": args.trials, "range": args.range, "seed": cfg.seed });
        (v, json!({ "mode": "search", "search": search }))
    } else {
        if args.points.is_empty() {
            return Err(Error::Config("gram needs --points or --search".into()));
        }
        let config = PointConfig::from_points(args.points.clone())?;
        let g = kernel::gram_matrix(&params, &config)?;
        let v = definiteness::pd_check(&g, cfg.tolerance * g.max_diagonal())?;
        let rows: Vec<Vec<f64>> = (0..g.order()).map(|j| (0..g.order()).map(|k| g.get(j, k)).collect()).collect();
        let mut p = json!({ "mode": "explicit", "points": args.points, "gram": rows });
        if !args.coeffs.is_empty() {
            let cert = Certificate::from_f64(CertKind::Gram, &params, &args.points, &args.coeffs, cfg.precision)?;
            p["quadratic_form"] = json!(cert.value);
        }
        (v, p)
    };
    payload["t"] = json!(args.t);
    payload["a"] = json!(args.a);
    payload["verdict"] = to_value(&verdict)?;
    payload["certificate"] = match (&verdict.verdict, &verdict.worst_config) {
        (Verdict::Fail, Some(c)) => {
            to_value(&Certificate::from_f64(CertKind::Gram, &params, c.points(), c.coeffs(), cfg.precision)?)?
        }
        _ => Value::Null,
    };
    Ok((payload, Status::Ok))
}

fn cnd(cfg: &RunConfig, args: &CndArgs) -> Result<(Value, Status)> {
    let params = KernelParams::new(args.t, args.a)?;
    let opts = SearchOptions { range: args.range, exec: cfg.exec() };
    let (worst, mut payload) = if args.search {
        let s = definiteness::randomized_cnd_search(&params, args.n_max, args.trials, cfg.seed, cfg.tolerance, opts)?;
        let w = s.worst.clone();
        (w, json!({ "mode": "search", "seed": cfg.seed, "summary": to_value(&s)? }))
    } else {
        let config = PointConfig::new(args.points.clone(), args.coeffs.clone())?;
        let probe = definiteness::cnd_check(&params, &config, f64::INFINITY)?;
        let v = definiteness::cnd_check(&params, &config, cfg.tolerance * probe.scale)?;
        (v.clone(), json!({ "mode": "explicit", "verdict": to_value(&v)? }))
    };
    payload["t"] = json!(args.t);
    payload["a"] = json!(args.a);
    payload["certificate"] = if worst.verdict == Verdict::Fail {
        let c = &worst.config;
        to_value(&Certificate::from_f64(CertKind::Cnd, &params, c.points(), c.coeffs(), cfg.precision)?)?
    } else {
        Value::Null
    };
    Ok((payload, Status::Ok))
}

fn rational_string(q: &BigRational) -> String {
    if q.denom() == &BigInt::from(1) {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn boundary(cfg: &RunConfig, args: &BoundaryArgs) -> Result<(Value, Status)> {
    let report = schwarz::boundary_report(args.t)?;
    let mut payload = json!({
        "t": args.t,
        "z0": Num::from_f64(report.z0),
        "a0": Num::from_f64(report.a0),
        "a0_cross_check": Num::from_f64(report.a0_cross_check),
    });
    if let Some(a) = args.a {
        let params = KernelParams::new(args.t, a)?;
        let opts = ViolationOptions { exec: cfg.exec(), ..Default::default() };
        let outcome = schwarz::find_schwarz_violation_with(args.t, a, opts)?;
        payload["a"] = json!(a);
        payload["search"] = to_value(&outcome)?;
        if let SchwarzOutcome::Found(v) = &outcome {
            let pts = v.config.points();
            let cs = v.config.coeffs();
            let g = Certificate::from_f64(CertKind::G, &params, pts, cs, cfg.precision)?;
            let q = Certificate::from_f64(CertKind::Gram, &params, pts, cs, cfg.precision)?;
            payload["certificates"] = json!([to_value(&g)?, to_value(&q)?]);
            if args.t.fract() == 0.0 && args.t <= u32::MAX as f64 {
                let z = hp::rational_from_f64(v.z).expect("finite z");
                let aq = hp::rational_from_f64(a).expect("finite a");
                let exact = schwarz::g_fn_exact(&z, args.t as u32, &aq);
                payload["g_exact"] = json!({ "z": rational_string(&z), "value": rational_string(&exact) });
            }
        }
    }
    Ok((payload, Status::Ok))
}

fn witness_cmd(cfg: &RunConfig, args: &WitnessArgs) -> Result<(Value, Status)> {
    let params = KernelParams::new(args.t, args.a)?;
    let order = match args.order {
        Some(o) => o,
        None => witness::default_witness(args.t)?.moment_order(),
    };
    let w = witness::build_binomial_witness(order);
    let moments: Vec<String> = witness::check_moments(&w, order + 1).iter().map(rational_string).collect();
    let mut ctx = HpCtx::with_digits(cfg.precision);
    let kappa = witness::zt_coefficient_hp(&mut ctx, &params, &w)?;
    let predicted = witness::sign_predict(args.t).ok();
    let mut payload = json!({
        "t": args.t,
        "a": args.a,
        "witness": {
            "moment_order": order,
            "y": w.y().iter().map(rational_string).collect::<Vec<_>>(),
            "c": w.c().iter().map(rational_string).collect::<Vec<_>>(),
        },
        "moments": moments,
        "zt_coefficient": Num::from_hp(&mut ctx, &kappa, cfg.precision),
        "predicted_sign": predicted,
    });
    if !kappa.is_negative() {
        payload["status"] = json!("inconclusive");
        payload["reason"] = json!("the z^t coefficient is not negative, so small z gives no negative value");
        payload["certificates"] = json!([]);
        return Ok((payload, Status::Ok));
    }
    let opts = NegativeZOptions {
        k_max: args.k_max,
        precision: PrecisionOptions { start_bits: hp::digits_to_bits(cfg.precision), max_bits: 1 << 15 },
    };
    let found = witness::find_negative_z_with(&params, &w, opts)?;
    let f =
        Certificate::build(CertKind::F, &params, found.points_dec.clone(), found.coeffs_dec.clone(), cfg.precision)?;
    let q =
        Certificate::build(CertKind::Gram, &params, found.points_dec.clone(), found.coeffs_dec.clone(), cfg.precision)?;
    payload["status"] = json!("certificate_found");
    payload["k"] = json!(found.k);
    payload["z"] = to_value(&Num::from_f64(found.z))?;
    payload["f_value"] = json!(hp::round_sig(&found.f_value_dec, cfg.precision as usize));
    payload["quadratic_form"] = json!(hp::round_sig(&found.quadratic_form_dec, cfg.precision as usize));
    payload["certificates"] = json!([to_value(&f)?, to_value(&q)?]);
    Ok((payload, Status::Ok))
}

fn random_rational(rng: &mut ChaCha8Rng) -> BigRational {
    let num: i64 = rng.random_range(-20..=20);
    let den: i64 = rng.random_range(1..=9);
    BigRational::new(num.into(), den.into())
}

fn identities(cfg: &RunConfig, args: &IdentitiesArgs) -> Result<(Value, Status)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cases = 0usize;
    let mut failures = Vec::new();
    for n in 1..=args.n_max {
        for m in 0..=args.m_max.min(n * n - 1) {
            for j in 1..=n {
                for k in 1..=n {
                    for _ in 0..args.samples {
                        let y: Vec<BigRational> = (0..n).map(|_| random_rational(&mut rng)).collect();
                        let (lhs, rhs) = witness::elementary_identity_check(n, m, j, k, &y)?;
                        cases += 1;
                        if lhs != rhs {
                            failures.push(json!({
                                "n": n, "m": m, "j": j, "k": k,
                                "y": y.iter().map(rational_string).collect::<Vec<_>>(),
                                "lhs": rational_string(&lhs), "rhs": rational_string(&rhs),
                            }));
                        }
                    }
                }
            }
        }
    }
    let mut negsum_cases = 0usize;
    let mut negsum_failures = Vec::new();
    for order in 0..=args.negsum_order_max {
        let w = witness::build_binomial_witness(order);
        for v in 0..=order {
            negsum_cases += 1;
            let s = witness::negsum_check(v, &w)?;
            let ann = witness::moment_annihilation(&w, v);
            if !s.is_zero() || !ann.is_zero() {
                negsum_failures.push(json!({ "order": order, "v": v, "negsum": rational_string(&s), "annihilation": rational_string(&ann) }));
            }
        }
    }
    let mut moment_failures = Vec::new();
    for order in 0..=args.moment_order_max {
        let w = witness::build_binomial_witness(order);
        let m = witness::check_moments(&w, order);
        if let Some(l) = m.iter().position(|v| !v.is_zero()) {
            moment_failures.push(json!({ "order": order, "l": l, "value": rational_string(&m[l]) }));
        }
    }
    let ok = failures.is_empty() && negsum_failures.is_empty() && moment_failures.is_empty();
    let payload = json!({
        "seed": cfg.seed,
        "identity_cases": cases,
        "identity_failures": failures,
        "negsum_cases": negsum_cases,
        "negsum_failures": negsum_failures,
        "moment_orders": args.moment_order_max + 1,
        "moment_failures": moment_failures,
        "all_passed": ok,
    });
    Ok((payload, if ok { Status::Ok } else { Status::Diagnostic }))
}

fn fracpow(cfg: &RunConfig, args: &FracpowArgs) -> Result<(Value, Status)> {
    if args.validate {
        let report = frac_power::validate_representation(&frac_power::default_grid(), cfg.tolerance, cfg.exec())?;
        let status = if report.passed() { Status::Ok } else { Status::Diagnostic };
        let payload = json!({ "mode": "validate", "passed": report.passed(), "report": to_value(&report)? });
        return Ok((payload, status));
    }
    let s = args.s.ok_or_else(|| Error::Config("fracpow needs --validate or --s".into()))?;
    let p = frac_power::decompose_s(s)?;
    let w = Complex64::new(args.w_re, args.w_im);
    let h = frac_power::h_integral_detailed(w, &p, cfg.tolerance)?;
    let payload = json!({
        "mode": "single",
        "params": to_value(&p)?,
        "w": to_value(&w)?,
        "h": to_value(&h)?,
        "exact": to_value(&w.powf(s))?,
        "l1": frac_power::l1_norm(w, &p)?,
        "c_bound": frac_power::c_bound(&p),
    });
    Ok((payload, Status::Ok))
}

fn ladder(nodes: &[usize], half_width: f64) -> Vec<Level> {
    nodes.iter().map(|&node_count| Level { node_count, half_width }).collect()
}

fn spectral_certificate(params: &KernelParams, c: &spectral::Certificate, digits: u32) -> Result<Certificate> {
    Certificate::from_f64(CertKind::Gram, params, &c.points, &c.coeffs, digits)
}

fn spectrum(cfg: &RunConfig, args: &SpectrumArgs) -> Result<(Value, Status)> {
    let params = KernelParams::new(args.t, args.a)?;
    let opts = SpectralOptions { exec: cfg.exec(), rel_tol: cfg.tolerance };
    let report = spectral::min_operator_eigenvalue_with(&params, &ladder(&args.nodes, args.half_width), opts)?;
    let cert = match &report.certificate {
        Some(c) => to_value(&spectral_certificate(&params, c, cfg.precision)?)?,
        None => Value::Null,
    };
    Ok((json!({ "report": to_value(&report)?, "certificate": cert }), Status::Ok))
}

fn sweep(cfg: &RunConfig, args: &SweepArgs) -> Result<(Value, Status)> {
    let opts = SweepOptions {
        t: args.t,
        a_max: args.a_max,
        control_offset: args.control,
        spectral: SpectralOptions { exec: cfg.exec(), rel_tol: cfg.tolerance },
    };
    let entries = spectral::open_problem_sweep(&args.a_grid, &ladder(&args.nodes, args.half_width), opts)?;
    let mut certificates = Vec::new();
    for e in &entries {
        if let Some(c) = e.report.as_ref().and_then(|r| r.certificate.as_ref()) {
            let params = KernelParams::new(args.t, e.a)?;
            certificates.push(json!({ "index": e.index, "a": e.a, "certificate": to_value(&spectral_certificate(&params, c, cfg.precision)?)? }));
        }
    }
    let payload = json!({
        "t": args.t,
        "a_max": args.a_max,
        "entries": to_value(&entries)?,
        "certificates": certificates,
    });
    Ok((payload, Status::Ok))
}

pub(super) fn sweep_csv(record: &RunRecord) -> Result<String> {
    let t = record.payload["t"].as_f64().ok_or_else(|| Error::Schema("sweep payload lacks t".into()))?;
    let entries: Vec<SweepEntry> = serde_json::from_value(record.payload["entries"].clone())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(spectral::SWEEP_CSV_HEADER).map_err(io)?;
    for row in spectral::sweep_rows(&entries, t) {
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn verify(cfg: &RunConfig, args: &VerifyArgs) -> Result<(Value, Status)> {
    let text =
        std::fs::read_to_string(&args.record).map_err(|e| Error::Io(format!("{}: {e}", args.record.display())))?;
    let value: Value = serde_json::from_str(&text)?;
    let certs = record::find_certificates(&value)?;
    if certs.is_empty() {
        return Err(Error::Schema("record contains no certificates".into()));
    }
    let replays: Vec<Replay> =
        certs.into_iter().map(|(path, c)| record::replay(&c, path, cfg.precision)).collect::<Result<_>>()?;
    let all = replays.iter().all(|r| r.verdict == ReplayVerdict::Confirmed);
    let verdict = if all { ReplayVerdict::Confirmed } else { ReplayVerdict::Mismatch };
    let payload = json!({
        "record": args.record.display().to_string(),
        "replays": to_value(&replays)?,
        "verdict": verdict,
    });
    Ok((payload, if all { Status::Ok } else { Status::Mismatch }))
}
