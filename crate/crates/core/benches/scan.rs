//! Parallel vs sequential neutral-curve scan and operator assembly.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use phototaxis_core::basestate::{solve_base_state, BaseState, SuspensionParams};
use phototaxis_core::par;
use phototaxis_core::perturb::{AngularQuadrature, PerturbSetup, ResponseOperator};
use phototaxis_core::radiative::solve_basic_radiation;
use phototaxis_core::stability::StabilityProblem;
use std::time::Duration;

fn base() -> BaseState {
    let p = SuspensionParams::default();
    let rad = solve_basic_radiation(&p.radiation_params().unwrap(), 201).unwrap();
    solve_base_state(&p, &rad, 65).unwrap()
}

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", false), ("sequential", true)]
}

fn neutral_scan(c: &mut Criterion) {
    let bs = base();
    let quad = AngularQuadrature::new(12, 16).unwrap();
    let mut g = c.benchmark_group("neutral_scan");
    g.sample_size(10).measurement_time(Duration::from_secs(30));
    for (name, seq) in modes() {
        g.bench_function(BenchmarkId::new(name, "n_z=65, 4 k"), |b| {
            par::force_sequential(seq);
            // a fresh problem each time so operator caching is part of the cost
            b.iter(|| {
                let prob = StabilityProblem::new(&bs, &quad).unwrap();
                prob.trace_neutral_curve(2.0, 3.5, 4, 20.0).unwrap()
            });
        });
    }
    par::force_sequential(false);
    g.finish();
}

fn response_assembly(c: &mut Criterion) {
    let bs = base();
    let setup = PerturbSetup::new(&bs, &AngularQuadrature::default()).unwrap();
    let mut g = c.benchmark_group("response_operator");
    g.sample_size(10);
    for (name, seq) in modes() {
        g.bench_function(BenchmarkId::new(name, "24x32"), |b| {
            par::force_sequential(seq);
            b.iter(|| ResponseOperator::assemble(&setup, 2.5, 0.7).unwrap());
        });
    }
    par::force_sequential(false);
    g.finish();
}

criterion_group!(benches, neutral_scan, response_assembly);
criterion_main!(benches);
