use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kpd::definiteness::{self, SearchOptions};
use kpd::spectral::{self, QuadratureScheme};
use kpd::witness::{self, ExpandOptions};
use kpd::{Exec, KernelParams};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn nystrom(c: &mut Criterion) {
    let params = KernelParams::new(2.0, 6.0).unwrap();
    let scheme = QuadratureScheme::composite_gauss_legendre(400, 20.0).unwrap();
    let mut g = c.benchmark_group("nystrom_400");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| spectral::nystrom_matrix(&params, &scheme, exec).unwrap())
        });
    }
    g.finish();
}

fn pd_search(c: &mut Criterion) {
    let params = KernelParams::new(0.5, 1.0).unwrap();
    let mut g = c.benchmark_group("pd_search_2000");
    for (name, exec) in MODES {
        let opts = SearchOptions { range: 10.0, exec };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| definiteness::randomized_pd_search(&params, 8, 2000, 1, 1e-12, opts).unwrap())
        });
    }
    g.finish();
}

fn expand(c: &mut Criterion) {
    let params = KernelParams::new(4.5, 1.0).unwrap();
    let w = witness::build_binomial_witness(4);
    let mut g = c.benchmark_group("expand_f_n6");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = ExpandOptions { exec, ..ExpandOptions::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| witness::expand_f_with(&params, &w, opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, nystrom, pd_search, expand);
criterion_main!(benches);
