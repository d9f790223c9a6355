use criterion::{criterion_group, criterion_main, Criterion};
use hsdmpg_bench::{logistic, ridge};
use hsdmpg_core::{
    hsdmpg_generic_solve, hsdmpg_quadratic_solve, svrg_full_solve, Clock, GenericConfig,
    HsdmpgConfig, IfoCounter, StopRule, SvrgFullConfig,
};

fn ridge_solvers(c: &mut Criterion) {
    let p = ridge(8_192, 20, 1.0 / 8_192f64.sqrt());
    let stop = StopRule::ifo_budget(10 * 8_192);
    let mut group = c.benchmark_group("ridge_10_epochs");
    group.sample_size(20);
    group.bench_function("hsdmpg", |b| {
        let config = HsdmpgConfig {
            clock: Clock::Frozen,
            ..HsdmpgConfig::default()
        };
        b.iter(|| hsdmpg_quadratic_solve(&p, &config, &stop, None, &IfoCounter::new()).unwrap())
    });
    group.bench_function("svrg", |b| {
        let config = SvrgFullConfig {
            clock: Clock::Frozen,
            ..SvrgFullConfig::default()
        };
        b.iter(|| svrg_full_solve(&p, &config, &stop, None, &IfoCounter::new()).unwrap())
    });
    group.finish();
}

fn logistic_majorization(c: &mut Criterion) {
    let p = logistic(2_000, 22, 0.01);
    let stop = StopRule::outer_iters(5);
    let config = GenericConfig {
        inner: HsdmpgConfig {
            clock: Clock::Frozen,
            ..HsdmpgConfig::default()
        },
        ..GenericConfig::default()
    };
    let mut group = c.benchmark_group("logistic");
    group.sample_size(20);
    group.bench_function("hsdmpg_generic_5_models", |b| {
        b.iter(|| hsdmpg_generic_solve(&p, &config, &stop, None, &IfoCounter::new()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, ridge_solvers, logistic_majorization);
criterion_main!(benches);
