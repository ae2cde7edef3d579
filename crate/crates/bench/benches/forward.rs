use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fwdsearch::asymptotics::{band, default_psi_grid, BandStatistic};
use fwdsearch::forward_search::run_forward_search;
use fwdsearch::montecarlo::dgp::generate;
use fwdsearch::{DgpSpec, ForwardConfig, InitialMethod, ReferenceDistribution, Regime};

fn forward_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_search");
    for n in [128usize, 512, 2048] {
        let spec = DgpSpec {
            regime: Regime::StationaryAr1(0.5),
            n,
            dim_x: 3,
            beta: vec![1.0, 0.5, -0.5],
            sigma: 1.0,
            error_dist: ReferenceDistribution::standard_normal(),
        };
        let ds = generate(&spec, 1).unwrap();
        for (name, initial) in [("ols", InitialMethod::FullLs), ("lms", InitialMethod::default())] {
            let cfg = ForwardConfig {
                initial,
                ..ForwardConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(name, n), &ds, |b, ds| {
                b.iter(|| run_forward_search(black_box(ds), &cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn moments(c: &mut Criterion) {
    let grid = default_psi_grid();
    for (name, dist) in [
        ("normal", ReferenceDistribution::standard_normal()),
        ("t7", ReferenceDistribution::scaled_t(7.0).unwrap()),
    ] {
        c.bench_function(&format!("psi_functions/{name}"), |b| {
            b.iter(|| {
                for &psi in &grid {
                    black_box(dist.psi_functions(black_box(psi)).unwrap());
                }
            })
        });
        c.bench_function(&format!("moment_quadrature/{name}"), |b| {
            b.iter(|| dist.truncated_moment_numeric(black_box(0.7), 4).unwrap())
        });
    }
}

fn bands(c: &mut Criterion) {
    let grid = default_psi_grid();
    let dist = ReferenceDistribution::standard_normal();
    c.bench_function("band/corr", |b| {
        b.iter(|| band(&dist, BandStatistic::ZOverSigmaCorr, black_box(&grid), 400, 0.9).unwrap())
    });
}

criterion_group!(benches, forward_search, moments, bands);
criterion_main!(benches);
