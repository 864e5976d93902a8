use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dyadrob_core::glm::{fit_network, Family, FitOptions};
use dyadrob_core::moments::{compute_scores, estimate_sigma};
use dyadrob_core::robust::{cv_alpha, estimate_from_fit};
use dyadrob_core::{
    kappa_star, simulate_network, Design, Estimator, MomentComponents, SieveSpec,
    SimulationDesign, TargetFunctional, TargetKind,
};

fn network(n_side: usize) -> dyadrob_core::BipartiteNetwork {
    simulate_network(&SimulationDesign::new(Design::LatentHomophily, 1.0, n_side, n_side, 1)).unwrap()
}

fn bench_fit(c: &mut Criterion) {
    let mut g = c.benchmark_group("glm_fit");
    for side in [100, 200] {
        let net = network(side);
        g.bench_with_input(BenchmarkId::new("logistic", side), &net, |b, net| {
            b.iter(|| fit_network(black_box(net), Family::Logistic, &FitOptions::default()).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("poisson", side), &net, |b, net| {
            b.iter(|| fit_network(black_box(net), Family::Poisson, &FitOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn bench_moments(c: &mut Criterion) {
    let net = network(200);
    let fit = fit_network(&net, Family::Logistic, &FitOptions::default()).unwrap();
    let target = TargetFunctional::for_network(TargetKind::Coordinate { index: 1 }, &net).unwrap();
    let mut g = c.benchmark_group("moments");
    for k in [2, 4, 8] {
        let h = SieveSpec::hermite(k).build(&net).unwrap();
        let scores = compute_scores(&net, &fit.theta, &target);
        g.bench_with_input(BenchmarkId::new("sigma_fast_path", k), &h, |b, h| {
            b.iter(|| estimate_sigma(black_box(&scores), h, net.phi()).unwrap())
        });
        let comp = MomentComponents::estimate(&net, &fit.theta, &h, &target, 1.0).unwrap();
        g.bench_with_input(BenchmarkId::new("kappa_star", k), &comp, |b, comp| {
            b.iter(|| kappa_star(black_box(comp)).unwrap())
        });
    }
    g.finish();
}

fn bench_pipeline(c: &mut Criterion) {
    let net = network(100);
    let fit = fit_network(&net, Family::Logistic, &FitOptions::default()).unwrap();
    let sieve = SieveSpec::hermite(3);
    c.bench_function("robust_estimate_n200", |b| {
        b.iter(|| {
            estimate_from_fit(
                black_box(&net),
                &fit,
                Estimator::RobustLogisticInit,
                TargetKind::AvgOutDegree { link: Default::default() },
                &sieve,
                1.0,
                &Default::default(),
            )
            .unwrap()
        })
    });
    c.bench_function("cv_alpha", |b| b.iter(|| cv_alpha(black_box(1.3), 0.05).unwrap()));
}

criterion_group!(benches, bench_fit, bench_moments, bench_pipeline);
criterion_main!(benches);
