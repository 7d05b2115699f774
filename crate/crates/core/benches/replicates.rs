use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use seqtrial_core::beta_math::{prob_t1_lt_t0, prob_t1_lt_t0_plus_delta, BetaParams, SeriesControl};
use seqtrial_core::exec::{map_indexed, map_indexed_seq};
use seqtrial_core::mc_engine::RngSpec;
use seqtrial_core::trial_engine::{RunOptions, Simulator, TrialDesign, Truth};

fn tails(c: &mut Criterion) {
    let p0 = BetaParams::new(31.0, 70.0).unwrap();
    let p1 = BetaParams::new(42.0, 59.0).unwrap();
    let mut g = c.benchmark_group("tail");
    g.bench_function("closed_form", |b| {
        b.iter(|| prob_t1_lt_t0(black_box(p0), black_box(p1), SeriesControl::default()))
    });
    g.bench_function("quadrature_delta", |b| {
        b.iter(|| prob_t1_lt_t0_plus_delta(black_box(p0), black_box(p1), 0.05, SeriesControl::default()))
    });
    g.finish();
}

fn replicates(c: &mut Criterion) {
    let sim = Simulator::new(TrialDesign::standard()).unwrap();
    let truth = Truth::new(0.4, 0.45).unwrap();
    let opts = RunOptions::default();
    let run = |i: usize| sim.run_trial(truth, RngSpec::new(1, i as u64), &opts).unwrap().stopped_at;
    // fill the tail caches so both variants measure the simulation itself
    map_indexed_seq(256, run);
    let mut g = c.benchmark_group("replicates");
    for n in [64usize, 256] {
        g.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| b.iter(|| map_indexed_seq(n, run)));
        g.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| b.iter(|| map_indexed(n, run)));
    }
    g.finish();
}

fn forward(c: &mut Criterion) {
    let sim = Simulator::new(TrialDesign {
        forward_reps: 200,
        ..TrialDesign::standard()
    })
    .unwrap();
    let data = Default::default();
    sim.predictive(&data, RngSpec::new(0, 0)).unwrap();
    c.bench_function("predictive_200_paths", |b| b.iter(|| sim.predictive(&data, RngSpec::new(0, 1)).unwrap()));
}

criterion_group!(benches, tails, replicates, forward);
criterion_main!(benches);
