//! Numerical probe of the integral operator `(K c)(x) = int K(x, y) c(y) dy`
//! on `L^2(R)`, truncated to `[-L, L]` and discretized by a symmetric Nyström
//! rule. Negative discrete eigenvalues are only reported as found after the
//! eigenvector, turned into a piecewise-constant function, gives a negative
//! continuous quadratic form under an independent quadrature.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kernel::{eval_kernel, KernelParams};
use crate::sum::Neumaier;

/// Largest Gauss-Legendre panel degree in composite rules.
pub const MAX_PANEL_DEGREE: usize = 16;
pub const DEFAULT_HALF_WIDTH: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    half_width: f64,
    panel_degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn gl_rule(degree: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(degree).expect("positive degree"));
    let mut pairs = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

impl QuadratureScheme {
    /// Composite Gauss-Legendre rule on `[-L, L]` with equal panels. The
    /// panel degree is the largest divisor of `node_count` not above 16.
    pub fn composite_gauss_legendre(node_count: usize, half_width: f64) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidParams("node_count must be positive".into()));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParams(format!("half width must be positive, got {half_width}")));
        }
        let degree = (1..=MAX_PANEL_DEGREE.min(node_count)).rev().find(|d| node_count.is_multiple_of(*d)).unwrap();
        let panels = node_count / degree;
        let h = 2.0 * half_width / panels as f64;
        let rule = gl_rule(degree);
        let mut nodes = Vec::with_capacity(node_count);
        let mut weights = Vec::with_capacity(node_count);
        for p in 0..panels {
            let mid = -half_width + (p as f64 + 0.5) * h;
            for &(x, w) in &rule {
                nodes.push(mid + 0.5 * h * x);
                weights.push(0.5 * h * w);
            }
        }
        Ok(Self { half_width, panel_degree: degree, nodes, weights })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn panel_degree(&self) -> usize {
        self.panel_degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cell boundaries from cumulative weights; Gauss nodes separate them,
    /// so cell `i` contains node `i` and has length `w_i`.
    pub fn cell_edges(&self) -> Vec<f64> {
        let mut edges = Vec::with_capacity(self.nodes.len() + 1);
        let mut acc = Neumaier::new();
        edges.push(-self.half_width);
        for w in &self.weights {
            acc.add(*w);
            edges.push(-self.half_width + acc.total());
        }
        *edges.last_mut().unwrap() = self.half_width;
        edges
    }
}

/// `M_ij = sqrt(w_i w_j) K(x_i, x_j)`, upper triangle mirrored.
pub fn nystrom_matrix(params: &KernelParams, scheme: &QuadratureScheme, exec: Exec) -> Result<DMatrix<f64>> {
    let n = scheme.node_count();
    let x = scheme.nodes();
    let sw: Vec<f64> = scheme.weights().iter().map(|w| w.sqrt()).collect();
    let rows = exec
        .map(n, |i| (i..n).map(|j| Ok(sw[i] * sw[j] * eval_kernel(params, x[i], x[j])?)).collect::<Result<Vec<f64>>>());
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row?.into_iter().enumerate() {
            m[(i, i + off)] = v;
            m[(i + off, i)] = v;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub node_count: usize,
    pub half_width: f64,
}

pub fn default_ladder() -> Vec<Level> {
    [100, 200, 400].map(|node_count| Level { node_count, half_width: DEFAULT_HALF_WIDTH }).to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub node_count: usize,
    pub half_width: f64,
    pub panel_degree: usize,
    pub min_eigenvalue: f64,
    /// Up to five smallest eigenvalues, ascending.
    pub smallest: Vec<f64>,
    pub max_diagonal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SpectralVerdict {
    NegativeFound,
    NoNegativeAtResolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `<K c, c>` for the piecewise-constant function built from the
    /// eigenvector.
    pub value: f64,
    pub error_bound: f64,
    pub node_count: usize,
    pub half_width: f64,
    /// Discrete form of the same direction: the quadrature nodes with
    /// coefficients `sqrt(w_i) v_i`, whose Gram quadratic form equals the
    /// eigenvalue.
    pub points: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub discrete_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub t: f64,
    pub a: f64,
    pub levels: Vec<LevelReport>,
    pub min_eig_sequence: Vec<f64>,
    /// Largest change of the minimum eigenvalue between consecutive levels,
    /// floored at `1e-10` times the largest diagonal entry. Metadata only.
    pub convergence_estimate: f64,
    /// Hilbert-Schmidt bound on the operator discarded by truncating to
    /// `[-L, L]` at the finest level (`t > 1/2` only).
    pub truncation_bound: Option<f64>,
    pub verdict: SpectralVerdict,
    pub certificate: Option<Certificate>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub exec: Exec,
    /// Relative threshold (times the largest diagonal entry) below which a
    /// discrete eigenvalue counts as negative.
    pub rel_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { exec: Exec::default(), rel_tol: 1e-10 }
    }
}

/// `sqrt(4 L^(1-2t) / (pi a (2t-1)))`, from `K <= 1/(pi a |x|^(2t))` and
/// `int K(x, y) dy <= 1`.
pub fn truncation_bound(params: &KernelParams, half_width: f64) -> Option<f64> {
    let t = params.t();
    if t <= 0.5 {
        return None;
    }
    let hs2 = 4.0 * half_width.powf(1.0 - 2.0 * t) / (std::f64::consts::PI * params.a() * (2.0 * t - 1.0));
    Some(hs2.sqrt())
}

pub fn min_operator_eigenvalue(params: &KernelParams, ladder: &[Level]) -> Result<SpectralReport> {
    min_operator_eigenvalue_with(params, ladder, SpectralOptions::default())
}

pub fn min_operator_eigenvalue_with(
    params: &KernelParams,
    ladder: &[Level],
    opts: SpectralOptions,
) -> Result<SpectralReport> {
    if ladder.is_empty() {
        return Err(Error::InvalidParams("refinement ladder is empty".into()));
    }
    if ladder.windows(2).any(|w| w[1].node_count <= w[0].node_count) {
        return Err(Error::InvalidParams("ladder node counts must increase".into()));
    }
    let mut levels = Vec::with_capacity(ladder.len());
    let mut candidates = Vec::new();
    for lv in ladder {
        let scheme = QuadratureScheme::composite_gauss_legendre(lv.node_count, lv.half_width)?;
        let m = nystrom_matrix(params, &scheme, opts.exec)?;
        let max_diagonal = m.diagonal().max();
        let eig = symmetric_eigen(&m)?;
        let (min, vec) = eig.min();
        if min < -opts.rel_tol * max_diagonal {
            candidates.push((scheme.clone(), vec, min));
        }
        levels.push(LevelReport {
            node_count: lv.node_count,
            half_width: lv.half_width,
            panel_degree: scheme.panel_degree(),
            min_eigenvalue: min,
            smallest: eig.values.iter().take(5).copied().collect(),
            max_diagonal,
        });
    }
    let min_eig_sequence: Vec<f64> = levels.iter().map(|l| l.min_eigenvalue).collect();
    let floor = opts.rel_tol * levels.iter().map(|l| l.max_diagonal).fold(0.0, f64::max);
    let convergence_estimate = min_eig_sequence.windows(2).map(|w| (w[1] - w[0]).abs()).fold(floor, f64::max);
    let mut notes = Vec::new();
    let mut certificate = None;
    // finest level first
    for (scheme, vec, min) in candidates.iter().rev() {
        match certify_negative_direction(params, scheme, vec.as_slice(), opts.exec) {
            Ok(c) if c.value < 0.0 => {
                certificate = Some(Certificate {
                    value: c.value,
                    error_bound: c.error_bound,
                    node_count: scheme.node_count(),
                    half_width: scheme.half_width(),
                    points: scheme.nodes().to_vec(),
                    coeffs: vec.iter().zip(scheme.weights()).map(|(v, w)| v * w.sqrt()).collect(),
                    discrete_value: *min,
                });
                break;
            }
            Ok(c) => notes.push(format!(
                "discrete negative direction at {} nodes refines to {:.3e} (not negative)",
                scheme.node_count(),
                c.value
            )),
            Err(e) => notes.push(format!("{} nodes: {e}", scheme.node_count())),
        }
    }
    let verdict =
        if certificate.is_some() { SpectralVerdict::NegativeFound } else { SpectralVerdict::NoNegativeAtResolution };
    let finest = ladder.last().unwrap().half_width;
    Ok(SpectralReport {
        t: params.t(),
        a: params.a(),
        levels,
        min_eig_sequence,
        convergence_estimate,
        truncation_bound: truncation_bound(params, finest),
        verdict,
        certificate,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedValue {
    pub value: f64,
    pub error_bound: f64,
}

const COARSE_ORDER: usize = 6;
const FINE_ORDER: usize = 10;

/// Evaluates `int int K(x, y) c(x) c(y) dx dy` for the step function equal
/// to `v_i / sqrt(w_i)` on cell `i`. Each cell pair is integrated with
/// tensor Gauss-Legendre rules of two orders; their discrepancy is the
/// error bound.
pub fn certify_negative_direction(
    params: &KernelParams,
    scheme: &QuadratureScheme,
    eigvec: &[f64],
    exec: Exec,
) -> Result<RefinedValue> {
    let n = scheme.node_count();
    if eigvec.len() != n {
        return Err(Error::InvalidParams(format!("eigenvector has {} entries, scheme has {n} nodes", eigvec.len())));
    }
    if eigvec.iter().all(|v| *v == 0.0) {
        return Ok(RefinedValue { value: 0.0, error_bound: 0.0 });
    }
    let edges = scheme.cell_edges();
    let heights: Vec<f64> = eigvec.iter().zip(scheme.weights()).map(|(v, w)| v / w.sqrt()).collect();
    let mapped = |order: usize| -> Vec<Vec<(f64, f64)>> {
        let rule = gl_rule(order);
        (0..n)
            .map(|i| {
                let (lo, hi) = (edges[i], edges[i + 1]);
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                rule.iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
            })
            .collect()
    };
    let coarse = mapped(COARSE_ORDER);
    let fine = mapped(FINE_ORDER);
    let cell_pair = |rule: &[Vec<(f64, f64)>], i: usize, j: usize| -> Result<f64> {
        let mut acc = Neumaier::new();
        for &(x, wx) in &rule[i] {
            for &(y, wy) in &rule[j] {
                acc.add(wx * wy * eval_kernel(params, x, y)?);
            }
        }
        Ok(acc.total())
    };
    let rows = exec.map(n, |i| -> Result<(f64, f64)> {
        let mut value = Neumaier::new();
        let mut err = Neumaier::new();
        for j in i..n {
            let mult = if i == j { 1.0 } else { 2.0 };
            let hh = heights[i] * heights[j] * mult;
            let f = cell_pair(&fine, i, j)?;
            let c = cell_pair(&coarse, i, j)?;
            value.add(hh * f);
            err.add((hh * (f - c)).abs());
        }
        Ok((value.total(), err.total()))
    });
    let mut value = Neumaier::new();
    let mut err = Neumaier::new();
    for r in rows {
        let (v, e) = r?;
        value.add(v);
        err.add(e);
    }
    let value = value.total();
    // rounding in the sums themselves
    let error_bound = err.total() + 1e-14 * heights.iter().map(|h| h * h).sum::<f64>() * 2.0 * scheme.half_width();
    if value.abs() <= error_bound {
        return Err(Error::Inconclusive { value, bound: error_bound });
    }
    Ok(RefinedValue { value, error_bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub index: usize,
    pub a: f64,
    /// Points outside `(0, a0]` added for comparison.
    pub control: bool,
    pub report: Option<SpectralReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub t: f64,
    /// Upper end of the swept interval.
    pub a_max: f64,
    /// Adds `a_max + control_offset` as a labelled control point.
    pub control_offset: Option<f64>,
    pub spectral: SpectralOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { t: 2.0, a_max: 12.0, control_offset: None, spectral: SpectralOptions::default() }
    }
}

/// Runs the probe at every grid point. Points fail independently; results
/// are ordered by grid index.
pub fn open_problem_sweep(a_grid: &[f64], ladder: &[Level], opts: SweepOptions) -> Result<Vec<SweepEntry>> {
    if let Some(a) = a_grid.iter().find(|a| !(**a > 0.0 && **a <= opts.a_max)) {
        return Err(Error::InvalidParams(format!("sweep values must lie in (0, {}], got {a}", opts.a_max)));
    }
    let mut points: Vec<(f64, bool)> = a_grid.iter().map(|&a| (a, false)).collect();
    if let Some(eps) = opts.control_offset {
        points.push((opts.a_max + eps, true));
    }
    let inner = SpectralOptions { exec: Exec::Sequential, ..opts.spectral };
    let results = opts.spectral.exec.map(points.len(), |i| {
        let (a, _) = points[i];
        KernelParams::new(opts.t, a).and_then(|p| min_operator_eigenvalue_with(&p, ladder, inner))
    });
    Ok(results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            let (a, control) = points[index];
            match r {
                Ok(report) => SweepEntry { index, a, control, report: Some(report), error: None },
                Err(e) => SweepEntry { index, a, control, report: None, error: Some(e.to_string()) },
            }
        })
        .collect())
}

pub const SWEEP_CSV_HEADER: [&str; 7] = ["t", "a", "level", "node_count", "L", "min_eigenvalue", "verdict"];

/// One row per (grid point, level).
pub fn sweep_rows(entries: &[SweepEntry], t: f64) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for e in entries {
        match &e.report {
            Some(r) => {
                let verdict = match r.verdict {
                    SpectralVerdict::NegativeFound => "NEGATIVE_FOUND",
                    SpectralVerdict::NoNegativeAtResolution => "NO_NEGATIVE_AT_RESOLUTION",
                };
                for (k, lv) in r.levels.iter().enumerate() {
                    rows.push(vec![
                        t.to_string(),
                        e.a.to_string(),
                        k.to_string(),
                        lv.node_count.to_string(),
                        lv.half_width.to_string(),
                        format!("{:e}", lv.min_eigenvalue),
                        verdict.to_string(),
                    ]);
                }
            }
            None => rows.push(vec![
                t.to_string(),
                e.a.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "ERROR".into(),
            ]),
        }
    }
    rows
}
