use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use evoctrl_bench::{model, spec};
use evoctrl_core::simulator::{episode_length, policy_thetas};
use evoctrl_core::{
    backward_induction, build_transition_model, train, value_iteration, LearningConfig, PolicySpec,
    RngSeed, Sampler, SolveOptions, Start,
};

fn model_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("model_build");
    group.sample_size(10);
    for n in [10, 50, 200] {
        let spec = spec(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &spec, |b, spec| {
            b.iter(|| build_transition_model(black_box(spec)))
        });
    }
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solvers");
    group
        .sample_size(10)
        .measurement_time(Duration::from_secs(10));
    let m50 = model(50);
    group.bench_function("backward_induction/50", |b| {
        b.iter(|| backward_induction(black_box(&m50)))
    });
    group.bench_function("value_iteration/50", |b| {
        b.iter(|| value_iteration(black_box(&m50), SolveOptions::default()))
    });
    let m200 = model(200);
    group.bench_function("backward_induction/200", |b| {
        b.iter(|| backward_induction(black_box(&m200)))
    });
    group.finish();
}

fn episodes(c: &mut Criterion) {
    let mut group = c.benchmark_group("episode");
    let spec = spec(50);
    let m = model(50);
    let optimal = evoctrl_core::greedy_policy(&m, &backward_induction(&m).unwrap());
    for (label, policy) in [("reciprocal", PolicySpec::Reciprocal), ("optimal", optimal)] {
        let thetas = policy_thetas(&policy, &spec).unwrap();
        let mut stream = 0;
        group.bench_function(label, |b| {
            b.iter(|| {
                stream += 1;
                let mut rng = RngSeed::new(1, stream).rng();
                episode_length(&thetas, &Start::Random, &mut rng, 1_000_000).unwrap()
            })
        });
    }
    group.finish();
}

fn qlearning(c: &mut Criterion) {
    let mut group = c.benchmark_group("qlearning");
    group.sample_size(10);
    let spec = spec(10);
    let config = LearningConfig {
        episodes: 2_000,
        ..Default::default()
    };
    for (label, sampler) in [("model", Sampler::ModelLevel), ("bit", Sampler::BitLevel)] {
        group.bench_function(label, |b| {
            b.iter(|| train(&spec, &config, sampler).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, model_build, solvers, episodes, qlearning);
criterion_main!(benches);
