//! Property tests over randomly drawn parameters and configurations.

use kpd::definiteness::{self, Verdict};
use kpd::frac_power::{self, bracket_naive, bracket_taylor};
use kpd::kernel::{self, eval_cnd_base, eval_kernel};
use kpd::schwarz;
use kpd::spectral::{self, QuadratureScheme};
use kpd::{Exec, KernelParams, PointConfig};
use num_complex::Complex64;
use proptest::prelude::*;

const PI_INV: f64 = 1.0 / std::f64::consts::PI;

fn params() -> impl Strategy<Value = KernelParams> {
    (0.05f64..6.0, 0.01f64..50.0).prop_map(|(t, a)| KernelParams::new(t, a).unwrap())
}

fn pd_params() -> impl Strategy<Value = KernelParams> {
    (0.05f64..=1.0, 0.01f64..50.0).prop_map(|(t, a)| KernelParams::new(t, a).unwrap())
}

fn config(n_max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=n_max).prop_flat_map(|n| (prop::collection::vec(-10.0f64..10.0, n), prop::collection::vec(-3.0f64..3.0, n)))
}

fn zero_sum(n_max: usize) -> impl Strategy<Value = PointConfig> {
    (2..=n_max).prop_flat_map(|n| {
        (prop::collection::vec(-10.0f64..10.0, n), prop::collection::vec(-3.0f64..3.0, n)).prop_map(|(x, mut c)| {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            c.iter_mut().for_each(|v| *v -= mean);
            let last = c.len() - 1;
            c[last] = -c[..last].iter().sum::<f64>();
            PointConfig::new(x, c).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn kernel_is_symmetric(p in params(), x in -1e3f64..1e3, y in -1e3f64..1e3) {
        prop_assert_eq!(eval_kernel(&p, x, y).unwrap().to_bits(), eval_kernel(&p, y, x).unwrap().to_bits());
    }

    #[test]
    fn kernel_range(p in params(), x in -50.0f64..50.0, y in -50.0f64..50.0) {
        let k = eval_kernel(&p, x, y).unwrap();
        prop_assert!(k > 0.0 && k <= PI_INV);
        prop_assert_eq!(eval_kernel(&p, 0.0, 0.0).unwrap(), PI_INV);
        if x != 0.0 || y != 0.0 {
            prop_assert!(k < PI_INV || (x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn quadratic_form_matches_double_sum(p in params(), (x, c) in config(8)) {
        let cfg = PointConfig::new(x.clone(), c.clone()).unwrap();
        let q = kernel::quadratic_form(&p, &cfg).unwrap();
        let mut direct = 0.0;
        let mut mag = 0.0;
        for j in 0..x.len() {
            for k in 0..x.len() {
                let term = c[j] * c[k] * eval_kernel(&p, x[j], x[k]).unwrap();
                direct += term;
                mag += term.abs();
            }
        }
        let n2 = (x.len() * x.len()) as f64;
        prop_assert!((q - direct).abs() <= 8.0 * n2 * f64::EPSILON * mag);
    }

    #[test]
    fn cnd_base_diagonal(p in params(), x in -20.0f64..20.0) {
        let v = eval_cnd_base(&p, x, x).unwrap();
        let expect = p.a() * (2.0 * x * x).powf(p.t());
        prop_assert!(v >= 0.0);
        prop_assert!((v - expect).abs() <= 1e-14 * expect.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn pd_verdict_is_scale_invariant(p in params(), x in prop::collection::vec(-5.0f64..5.0, 2..8)) {
        let g = kernel::gram_matrix(&p, &PointConfig::from_points(x).unwrap()).unwrap();
        let tol = definiteness::default_tolerance(&g);
        let a = definiteness::pd_check(&g, tol).unwrap();
        let scaled = g.scaled(std::f64::consts::PI).unwrap();
        let b = definiteness::pd_check(&scaled, tol * std::f64::consts::PI).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn small_t_is_positive_and_cnd(p in pd_params(), x in prop::collection::vec(-10.0f64..10.0, 1..8), zs in zero_sum(8)) {
        let g = kernel::gram_matrix(&p, &PointConfig::from_points(x).unwrap()).unwrap();
        prop_assert!(definiteness::pd_check(&g, definiteness::default_tolerance(&g)).unwrap().passed());
        let probe = definiteness::cnd_check(&p, &zs, f64::INFINITY).unwrap();
        prop_assert_eq!(definiteness::cnd_check(&p, &zs, 1e-10 * probe.scale).unwrap().verdict, Verdict::Pass);
    }

    #[test]
    fn failures_replay(a in 20.0f64..200.0, x in prop::collection::vec(-1.0f64..1.0, 2..7)) {
        let p = KernelParams::new(2.0, a).unwrap();
        let g = kernel::gram_matrix(&p, &PointConfig::from_points(x).unwrap()).unwrap();
        let v = definiteness::pd_check(&g, definiteness::default_tolerance(&g)).unwrap();
        if let Some(cfg) = v.worst_config {
            let q = kernel::quadratic_form(&p, &cfg).unwrap();
            prop_assert!((q - v.min_eigenvalue).abs() <= v.tolerance * cfg.n() as f64);
        }
    }

    #[test]
    fn t1_cnd_is_a_square_difference(a in 0.01f64..50.0, zs in zero_sum(8)) {
        let p = KernelParams::new(1.0, a).unwrap();
        let v = definiteness::cnd_check(&p, &zs, f64::INFINITY).unwrap();
        let (y, c) = (zs.points(), zs.coeffs());
        let mut direct = 0.0;
        for j in 0..y.len() {
            for k in 0..y.len() {
                direct += c[j] * c[k] * (y[j] - y[k]).powi(2);
            }
        }
        prop_assert!((v.value - direct).abs() <= 1e-11 * v.scale.max(1.0));
    }

    #[test]
    fn g_minimum_identity(t in 1.05f64..8.0, frac in 0.01f64..0.99) {
        let zmax = 2f64.powf(t - 1.0) - 1.0;
        let z = frac * zmax;
        let a = schwarz::a_tilde(z, t).unwrap();
        let g = schwarz::g_fn(z, t, a).unwrap();
        let expect = 2f64.powf(t) * z - zmax * zmax;
        let scale = expect.abs().max(zmax * zmax).max(2f64.powf(t) * z);
        prop_assert!((g - expect).abs() <= 1e-12 * scale * 8.0);
    }

    #[test]
    fn boundary_cross_check(t in 1.01f64..30.0) {
        let r = schwarz::boundary_report(t).unwrap();
        prop_assert!(((r.a0_cross_check - r.a0) / r.a0).abs() <= 1e-12);
    }

    #[test]
    fn a_tilde_decreasing(t in 1.1f64..10.0) {
        let z0 = schwarz::z0(t).unwrap();
        let zs: Vec<f64> = (1..200).map(|i| z0 * i as f64 / 200.0).collect();
        for w in zs.windows(2) {
            prop_assert!(schwarz::a_tilde(w[1], t).unwrap() < schwarz::a_tilde(w[0], t).unwrap());
        }
    }

    #[test]
    fn schwarz_violations_fail_pd(t in 1.2f64..4.0, excess in 1.05f64..3.0) {
        let a = schwarz::a0(t).unwrap() * excess;
        if let Some(v) = schwarz::find_schwarz_violation(t, a).unwrap().violation() {
            let p = KernelParams::new(t, a).unwrap();
            let g = kernel::gram_matrix(&p, &PointConfig::from_points(v.config.points().to_vec()).unwrap()).unwrap();
            prop_assert_eq!(definiteness::pd_check(&g, 0.0).unwrap().verdict, Verdict::Fail);
        } else {
            prop_assert!(false, "no violation above a0");
        }
    }

    #[test]
    fn h_is_homogeneous(s in 0.1f64..4.9, re in 0.1f64..5.0, im in -3.0f64..3.0, c in 0.2f64..5.0) {
        prop_assume!((s - s.round()).abs() > 0.05);
        let p = frac_power::decompose_s(s).unwrap();
        let w = Complex64::new(re, im);
        let h1 = frac_power::h_integral(w * c, &p, 1e-10).unwrap();
        let h2 = frac_power::h_integral(w, &p, 1e-10).unwrap() * c.powf(s);
        prop_assert!((h1 - h2).norm() <= 1e-8 * h1.norm());
    }

    #[test]
    fn l1_bound_holds(s in 0.1f64..4.9, re in 0.05f64..10.0, im in -5.0f64..5.0) {
        prop_assume!((s - s.round()).abs() > 0.05);
        let p = frac_power::decompose_s(s).unwrap();
        let w = Complex64::new(re, im);
        prop_assert!(frac_power::l1_norm(w, &p).unwrap() <= frac_power::c_bound(&p) * w.norm().powf(s));
    }

    #[test]
    fn b_coeff_positive(k in 0u32..10, f in 0.01f64..0.99) {
        prop_assert!(frac_power::decompose_s(k as f64 + f).unwrap().b_coeff() > 0.0);
    }

    #[test]
    fn taylor_and_naive_brackets_agree(r in 0.5f64..=1.0, arg in -1.5f64..1.5, big_s in 0u32..5) {
        let x = Complex64::from_polar(r, arg);
        let a = bracket_taylor(x, big_s);
        let b = bracket_naive(x, big_s);
        prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-300) + 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn nystrom_is_symmetric(p in params(), n in 20usize..120) {
        let scheme = QuadratureScheme::composite_gauss_legendre(n, 10.0).unwrap();
        let m = spectral::nystrom_matrix(&p, &scheme, Exec::Parallel).unwrap();
        for i in 0..m.nrows() {
            for j in 0..i {
                prop_assert_eq!(m[(i, j)].to_bits(), m[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn nystrom_pd_for_small_t(p in pd_params()) {
        let r = spectral::min_operator_eigenvalue(&p, &spectral::default_ladder()).unwrap();
        for l in &r.levels {
            prop_assert!(l.min_eigenvalue >= -1e-10 * l.max_diagonal);
        }
    }
}
