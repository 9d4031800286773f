//! Finite-sample positive-definiteness and conditional negative-definiteness
//! tests with replayable failure certificates.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kernel::{self, GramMatrix, KernelParams, PointConfig};
use crate::sum::Neumaier;

/// Relative default for [`pd_check`] tolerances, scaled by the largest
/// diagonal entry of the matrix.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessVerdict {
    pub verdict: Verdict,
    pub min_eigenvalue: f64,
    /// On failure: the points and the unit eigenvector of `min_eigenvalue`.
    pub worst_config: Option<PointConfig>,
    pub tolerance: f64,
    /// Set on PASS when the minimum eigenvalue lies in `[-tolerance, 0]`.
    pub boundary: bool,
}

impl DefinitenessVerdict {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// `1e-10 * max_j G_jj`.
pub fn default_tolerance(gram: &GramMatrix) -> f64 {
    DEFAULT_RELATIVE_TOLERANCE * gram.max_diagonal()
}

/// Minimum-eigenvalue test. FAIL iff `lambda_min < -tolerance`.
pub fn pd_check(gram: &GramMatrix, tolerance: f64) -> Result<DefinitenessVerdict> {
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be >= 0, got {tolerance}")));
    }
    let eig = symmetric_eigen(gram.entries())?;
    let (min, vec) = eig.min();
    if min < -tolerance {
        let cfg = PointConfig::new(gram.points().to_vec(), vec.iter().copied().collect())?;
        Ok(DefinitenessVerdict {
            verdict: Verdict::Fail,
            min_eigenvalue: min,
            worst_config: Some(cfg),
            tolerance,
            boundary: false,
        })
    } else {
        Ok(DefinitenessVerdict {
            verdict: Verdict::Pass,
            min_eigenvalue: min,
            worst_config: None,
            tolerance,
            boundary: min <= 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CndVerdict {
    pub verdict: Verdict,
    /// `sum_jk c_j c_k base(y_j, y_k)`; CND requires this to be `<= 0`.
    pub value: f64,
    pub tolerance: f64,
    /// `sum_jk |c_j c_k base(y_j, y_k)|`, the natural size of rounding error.
    pub scale: f64,
    pub config: PointConfig,
}

/// Zero-sum quadratic form of the base `(x-y)^2 + a (x^2+y^2)^t`.
/// PASS iff the form is `<= tolerance`.
pub fn cnd_check(params: &KernelParams, config: &PointConfig, tolerance: f64) -> Result<CndVerdict> {
    let n = config.n();
    if n < 2 {
        return Err(Error::Precondition("CND check needs n >= 2".into()));
    }
    let c = config.coeffs();
    let total: f64 = c.iter().sum();
    let mag: f64 = c.iter().map(|v| v.abs()).sum();
    if total.abs() > 1e-12 * mag.max(f64::MIN_POSITIVE) {
        return Err(Error::Precondition(format!("coefficients must sum to zero (sum = {total:e}, scale = {mag:e})")));
    }
    let y = config.points();
    let mut value = Neumaier::new();
    let mut scale = Neumaier::new();
    for j in 0..n {
        for k in 0..n {
            let term = c[j] * c[k] * kernel::eval_cnd_base(params, y[j], y[k])?;
            value.add(term);
            scale.add(term.abs());
        }
    }
    let value = value.total();
    Ok(CndVerdict {
        verdict: if value <= tolerance { Verdict::Pass } else { Verdict::Fail },
        value,
        tolerance,
        scale: scale.total(),
        config: config.clone(),
    })
}

/// Runs [`pd_check`] on the Gram matrix of `1 / (r + base(x, y))`.
pub fn inverse_family_check(
    params: &KernelParams,
    r: f64,
    config: &PointConfig,
    tolerance: f64,
) -> Result<DefinitenessVerdict> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParams(format!("r must be positive and finite, got {r}")));
    }
    let gram = kernel::gram_from_fn(config.points(), |x, y| Ok(1.0 / (r + kernel::eval_cnd_base(params, x, y)?)))?;
    pd_check(&gram, tolerance)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Coordinates are drawn uniformly from `[-range, range]`.
    pub range: f64,
    pub exec: Exec,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { range: 10.0, exec: Exec::default() }
    }
}

/// Independent stream per trial so results do not depend on scheduling.
fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn sample_points(rng: &mut ChaCha8Rng, n_max: usize, range: f64) -> Vec<f64> {
    let n = rng.random_range(1..=n_max);
    (0..n).map(|_| rng.random_range(-range..=range)).collect()
}

/// Samples `trials` random point sets of size `1..=n_max` and returns the
/// verdict of the one with the most negative minimum eigenvalue (ties go to
/// the lowest trial index).
pub fn randomized_pd_search(
    params: &KernelParams,
    n_max: usize,
    trials: usize,
    seed: u64,
    tolerance: f64,
    opts: SearchOptions,
) -> Result<DefinitenessVerdict> {
    if n_max == 0 || trials == 0 {
        return Err(Error::InvalidParams("n_max and trials must be >= 1".into()));
    }
    if !(opts.range > 0.0) {
        return Err(Error::InvalidParams("sampling range must be positive".into()));
    }
    let outcomes = opts.exec.map(trials, |i| {
        let mut rng = trial_rng(seed, i);
        let points = sample_points(&mut rng, n_max, opts.range);
        let gram = kernel::gram_matrix(params, &PointConfig::from_points(points)?)?;
        pd_check(&gram, tolerance)
    });
    let mut best: Option<DefinitenessVerdict> = None;
    for o in outcomes {
        let o = o?;
        if best.as_ref().is_none_or(|b| o.min_eigenvalue < b.min_eigenvalue) {
            best = Some(o);
        }
    }
    Ok(best.expect("trials >= 1"))
}

/// Draws a zero-sum configuration with `2..=n_max` points: uniform
/// coordinates, standard normal coefficients projected onto `sum c = 0`.
pub fn sample_zero_sum_config(seed: u64, trial: usize, n_max: usize, range: f64) -> Result<PointConfig> {
    let mut rng = trial_rng(seed, trial);
    let n = rng.random_range(2..=n_max.max(2));
    let points: Vec<f64> = (0..n).map(|_| rng.random_range(-range..=range)).collect();
    let mut coeffs: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mean = coeffs.iter().sum::<f64>() / n as f64;
    coeffs.iter_mut().for_each(|c| *c -= mean);
    PointConfig::new(points, coeffs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CndSearchSummary {
    pub trials: usize,
    pub passed: usize,
    /// The trial with the largest form value relative to its scale.
    pub worst: CndVerdict,
}

/// Randomized CND sweep. Each trial's tolerance is `rel_tolerance` times its
/// own rounding scale.
pub fn randomized_cnd_search(
    params: &KernelParams,
    n_max: usize,
    trials: usize,
    seed: u64,
    rel_tolerance: f64,
    opts: SearchOptions,
) -> Result<CndSearchSummary> {
    if n_max < 2 || trials == 0 {
        return Err(Error::InvalidParams("CND search needs n_max >= 2 and trials >= 1".into()));
    }
    let outcomes = opts.exec.map(trials, |i| {
        let cfg = sample_zero_sum_config(seed, i, n_max, opts.range)?;
        let probe = cnd_check(params, &cfg, f64::INFINITY)?;
        cnd_check(params, &cfg, rel_tolerance * probe.scale)
    });
    let mut passed = 0;
    let mut worst: Option<CndVerdict> = None;
    let rel = |v: &CndVerdict| if v.scale > 0.0 { v.value / v.scale } else { v.value };
    for o in outcomes {
        let o = o?;
        if o.verdict == Verdict::Pass {
            passed += 1;
        }
        if worst.as_ref().is_none_or(|w| rel(&o) > rel(w)) {
            worst = Some(o);
        }
    }
    Ok(CndSearchSummary { trials, passed, worst: worst.expect("trials >= 1") })
}

/// Gram matrix of an arbitrary symmetric matrix over dummy points; used for
/// matrices that do not come from a point set.
pub fn pd_check_matrix(m: &DMatrix<f64>, tolerance: f64) -> Result<DefinitenessVerdict> {
    let points = (0..m.nrows()).map(|i| i as f64).collect();
    pd_check(&GramMatrix::from_entries(points, m.clone())?, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(t: f64, a: f64) -> KernelParams {
        KernelParams::new(t, a).unwrap()
    }

    fn gram(t: f64, a: f64, pts: &[f64]) -> GramMatrix {
        kernel::gram_matrix(&p(t, a), &PointConfig::from_points(pts.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn single_point_passes() {
        let v = pd_check(&gram(2.0, 1.0, &[0.0]), 0.0).unwrap();
        assert!(v.passed());
        assert!((v.min_eigenvalue - 1.0 / PI).abs() < 1e-16);
    }

    #[test]
    fn small_t_passes() {
        let v = pd_check(&gram(0.5, 1.0, &[0.0, 1.0, 2.0, 3.0]), 1e-10).unwrap();
        assert!(v.passed());
        assert!(v.min_eigenvalue > 0.0);
    }

    #[test]
    fn large_a_fails_with_replayable_certificate() {
        let pr = p(2.0, 13.0);
        let g = gram(2.0, 13.0, &[0.2f64.sqrt(), 0.0]);
        let v = pd_check(&g, 1e-12).unwrap();
        assert_eq!(v.verdict, Verdict::Fail);
        // closed-form 2x2 eigenvalue
        let (a, b, d) = (g.get(0, 0), g.get(0, 1), g.get(1, 1));
        let lmin = 0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt();
        assert!((v.min_eigenvalue - lmin).abs() < 1e-15);
        let cfg = v.worst_config.unwrap();
        let q = kernel::quadratic_form(&pr, &cfg).unwrap();
        assert!((q - v.min_eigenvalue).abs() <= v.tolerance * 2.0 + 1e-15);
    }

    #[test]
    fn verdict_invariant_under_scaling() {
        for (t, a, pts) in [(2.0, 13.0, vec![0.2f64.sqrt(), 0.0]), (0.7, 2.0, vec![-1.0, 0.5, 3.0])] {
            let g = gram(t, a, &pts);
            let v1 = pd_check(&g, 0.0).unwrap();
            let v2 = pd_check(&g.scaled(PI).unwrap(), 0.0).unwrap();
            assert_eq!(v1.verdict, v2.verdict);
            assert!((v2.min_eigenvalue - PI * v1.min_eigenvalue).abs() < 1e-14);
        }
    }

    #[test]
    fn duplicated_points_flag_boundary() {
        let v = pd_check(&gram(2.0, 1.0, &[0.5, 0.5]), 1e-12).unwrap();
        assert!(v.passed());
        assert!(v.min_eigenvalue.abs() < 1e-15);
    }

    #[test]
    fn cnd_identical_points_cancel() {
        let pr = p(1.3, 2.0);
        for y in [-2.0, 0.0, 5.0] {
            let cfg = PointConfig::new(vec![y, y], vec![1.0, -1.0]).unwrap();
            let v = cnd_check(&pr, &cfg, 0.0).unwrap();
            assert_eq!(v.value, 0.0);
            assert_eq!(v.verdict, Verdict::Pass);
        }
    }

    #[test]
    fn cnd_t1_second_difference() {
        // -4 + 8 - 4 from (y_j - y_k)^2; the additive part vanishes.
        let cfg = PointConfig::new(vec![0.0, 1.0, 2.0], vec![1.0, -2.0, 1.0]).unwrap();
        let v = cnd_check(&p(1.0, 1.0), &cfg, 0.0).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(v.verdict == Verdict::Pass);
    }

    #[test]
    fn cnd_requires_zero_sum_and_two_points() {
        let pr = p(0.5, 1.0);
        let cfg = PointConfig::new(vec![0.0, 1.0], vec![1.0, -0.5]).unwrap();
        assert!(matches!(cnd_check(&pr, &cfg, 0.0), Err(Error::Precondition(_))));
        let cfg = PointConfig::new(vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(cnd_check(&pr, &cfg, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn cnd_random_small_t_passes() {
        let s = randomized_cnd_search(&p(0.5, 3.0), 8, 200, 7, 1e-10, SearchOptions::default()).unwrap();
        assert_eq!(s.passed, 200);
    }

    #[test]
    fn cnd_fails_for_large_t() {
        // (x^2+y^2)^t with t = 3 is not CND: a small symmetric witness.
        let cfg = PointConfig::new(vec![0.0, 1.0, 2.0], vec![1.0, -2.0, 1.0]).unwrap();
        let v = cnd_check(&p(3.0, 1.0), &cfg, 0.0).unwrap();
        assert_eq!(v.verdict, Verdict::Fail);
        assert!(v.value > 0.0);
    }

    #[test]
    fn inverse_family_at_r1_matches_kernel() {
        let pr = p(0.9, 4.0);
        let cfg = PointConfig::from_points(vec![-2.0, -0.1, 0.4, 3.0]).unwrap();
        let v_inv = inverse_family_check(&pr, 1.0, &cfg, 1e-12).unwrap();
        let v_k = pd_check(&kernel::gram_matrix(&pr, &cfg).unwrap().scaled(PI).unwrap(), 1e-12).unwrap();
        assert_eq!(v_inv.verdict, v_k.verdict);
        assert!((v_inv.min_eigenvalue - v_k.min_eigenvalue).abs() < 1e-14);

        let cfg = PointConfig::from_points(vec![-3.0, -1.0, 0.0, 2.0, 5.0]).unwrap();
        assert!(inverse_family_check(&p(0.75, 2.0), 0.1, &cfg, 1e-10).unwrap().passed());

        let cfg = PointConfig::from_points(vec![0.2f64.sqrt(), 0.0]).unwrap();
        assert!(!inverse_family_check(&p(2.0, 13.0), 1.0, &cfg, 1e-12).unwrap().passed());
        assert!(inverse_family_check(&pr, 0.0, &cfg, 1e-12).is_err());
    }

    #[test]
    fn random_search_examples() {
        let o = SearchOptions::default();
        assert!(randomized_pd_search(&p(1.0, 5.0), 6, 500, 42, 1e-10, o).unwrap().passed());
        assert!(randomized_pd_search(&p(3.0, 0.5), 1, 1, 0, 0.0, o).unwrap().passed());
    }

    #[test]
    fn random_search_is_deterministic_across_strategies() {
        let pr = p(2.0, 100.0);
        let par =
            randomized_pd_search(&pr, 3, 300, 9, 1e-12, SearchOptions { range: 1.0, exec: Exec::Parallel }).unwrap();
        let seq =
            randomized_pd_search(&pr, 3, 300, 9, 1e-12, SearchOptions { range: 1.0, exec: Exec::Sequential }).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn search_finds_two_point_violations_near_origin() {
        let p = KernelParams::new(2.0, 100.0).unwrap();
        let opts = SearchOptions { range: 1.0, exec: Exec::Sequential };
        let v = randomized_pd_search(&p, 2, 500, 42, 1e-10, opts).unwrap();
        assert_eq!(v.verdict, Verdict::Fail);
        let cfg = v.worst_config.unwrap();
        assert!(kernel::quadratic_form(&p, &cfg).unwrap() < 0.0);
    }
}
