use ar3_bench::instance;
use ar3_core::{arc_minimize, minimize, secular, ArcConfig, DVector, DtmConfig, SetKind};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn secular_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("secular");
    for n in [50, 100, 200] {
        let m = instance(SetKind::Diagonal, n);
        let cfg = secular::SecularConfig::default();
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| secular::solve(&m.h, &m.g, &m.t, m.sigma, &m.w, &cfg))
        });
    }
    group.finish();
}

fn dtm_vs_arc(c: &mut Criterion) {
    let mut group = c.benchmark_group("full_tensor_tol1e-3");
    group.sample_size(10);
    for n in [15, 25] {
        let m = instance(SetKind::Full, n);
        let dtm_cfg = DtmConfig {
            eps: 1e-3,
            ..DtmConfig::default()
        };
        let arc_cfg = ArcConfig {
            tol: 1e-3,
            ..ArcConfig::default()
        };
        group.bench_function(BenchmarkId::new("dtm", n), |b| {
            b.iter(|| minimize(&m, &dtm_cfg))
        });
        group.bench_function(BenchmarkId::new("arc", n), |b| {
            b.iter(|| arc_minimize(&m, &DVector::zeros(n), &arc_cfg))
        });
    }
    group.finish();
}

criterion_group!(benches, secular_solve, dtm_vs_arc);
criterion_main!(benches);
