use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use intent_core::inference::{Method, MethodConfig, Variant};
use intent_core::parallel::Execution;
use intent_core::predictor::{predict, PredictConfig};
use intent_core::scenario::make_case1;

fn bench_predict(c: &mut Criterion) {
    let scenario = make_case1();
    let world = scenario.world().unwrap();
    let method = Method::new(MethodConfig::new(Variant::P, 10.0).unwrap(), world.n_goals()).unwrap();
    let belief = method.init_belief(&world, scenario.start()).unwrap();

    let mut group = c.benchmark_group("predict");
    for samples in [500, 2000] {
        for (name, exec) in [("serial", Execution::Serial), ("parallel", Execution::Parallel)] {
            let cfg = PredictConfig {
                samples,
                exec,
                ..PredictConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(name, samples), &cfg, |b, cfg| {
                b.iter(|| predict(&world, &method, black_box(&belief), cfg, 7).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_update(c: &mut Criterion) {
    let scenario = make_case1();
    let world = scenario.world().unwrap();
    let start = scenario.start();
    let next = intent_core::Cell::new(start.x + 1, start.y);
    let mut group = c.benchmark_group("update");
    for (name, exec) in [("serial", Execution::Serial), ("parallel", Execution::Parallel)] {
        let method = Method::new(MethodConfig::new(Variant::P, 10.0).unwrap(), world.n_goals())
            .unwrap()
            .with_execution(exec);
        let belief = method.init_belief(&world, start).unwrap();
        group.bench_function(name, |b| b.iter(|| method.update(&world, black_box(&belief), next).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_predict, bench_update);
criterion_main!(benches);
