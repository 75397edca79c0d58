//! Hot-path benchmarks: scenario sampling, numeric rollouts, tape
//! construction + backward, and one full training epoch per method.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use riskplan_core::autodiff::Graph;
use riskplan_core::domains::DomainSpec;
use riskplan_core::objectives::UtilityConfig;
use riskplan_core::planners::{
    merged_return_batch, rollout_return, utility_and_gradient, Method, Representation,
    RolloutBuffers,
};

fn bench_scenarios(c: &mut Criterion) {
    let domain = DomainSpec::navigation_default();
    c.bench_function("scenario_navigation_m256", |b| {
        b.iter(|| domain.sample_scenario(256, 7))
    });
}

fn bench_numeric_rollout(c: &mut Criterion) {
    for name in ["navigation", "reservoir", "hvac"] {
        let domain = DomainSpec::from_name(name).unwrap();
        let rep = Representation::init(&domain, Method::Drp, &[256, 128, 64, 32], 3);
        let scenario = domain.sample_scenario(1, 5);
        c.bench_function(&format!("numeric_drp_rollout_{name}"), |b| {
            b.iter_batched_ref(
                RolloutBuffers::default,
                |bufs| rollout_return(&domain, &rep, &scenario, 0, None, bufs).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
}

fn bench_tape_backward(c: &mut Criterion) {
    let domain = DomainSpec { horizon: 20, ..DomainSpec::navigation_default() };
    let rep = Representation::init(&domain, Method::Drp, &[256, 128, 64, 32], 3);
    let scenario = domain.sample_scenario(1, 5);
    c.bench_function("tape_build_and_backward_navigation_drp", |b| {
        b.iter(|| {
            let mut g = Graph::new();
            let (batch, _) = merged_return_batch(&mut g, &domain, &rep, &scenario).unwrap();
            g.backward(batch.returns[0])
        })
    });
}

fn bench_training_epoch(c: &mut Criterion) {
    let domain = DomainSpec::navigation_default();
    let ucfg = UtilityConfig::mean_variance(-1000.0);
    for (method, m) in [(Method::Slp, 256), (Method::Drp, 32)] {
        let rep = Representation::init(&domain, method, &[256, 128, 64, 32], 3);
        let scenario = domain.sample_scenario(m, 5);
        c.bench_function(&format!("epoch_gradient_navigation_{}_m{m}", method.as_str()), |b| {
            b.iter(|| utility_and_gradient(&domain, &rep, &scenario, &ucfg).unwrap())
        });
    }
}

criterion_group!(
    benches,
    bench_scenarios,
    bench_numeric_rollout,
    bench_tape_backward,
    bench_training_epoch
);
criterion_main!(benches);
