use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use falsebottom::fields::{interface_traces, snapshot, FieldContext, SpatialGrid};
use falsebottom::model::VState;
use falsebottom::quad::TimeGrid;
use falsebottom::reference::{reference_setup, reference_solver};
use falsebottom::volterra::{apply_p, boundaries_from_v, picard_solve, SolverConfig};
use falsebottom::Execution;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn operator(c: &mut Criterion) {
    let setup = reference_setup();
    let mut group = c.benchmark_group("apply_p");
    group.sample_size(10);
    for n in [64, 256] {
        let grid = TimeGrid::new(0.0, 1000.0, n).unwrap();
        let v = apply_p(&VState::zeros(grid), &setup, Execution::Sequential).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &v, |b, v| {
                b.iter(|| apply_p(black_box(v), &setup, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn fields(c: &mut Criterion) {
    let setup = reference_setup();
    let cfg = SolverConfig { n_steps: 64, ..reference_solver() };
    let (v, _) = picard_solve(&setup, &cfg, 1000.0).unwrap();
    let paths = boundaries_from_v(&v, &setup.params, setup.h0_init, setup.hu_init);
    let traces = interface_traces(&v, &setup).unwrap();
    let ctx = FieldContext::new(&setup, &v, &paths, &traces).unwrap();
    let xs = SpatialGrid { x_lo: -0.05, x_hi: 0.1, n: 200 }.nodes().unwrap();
    let mut group = c.benchmark_group("snapshot");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| snapshot(&ctx, 500.0, black_box(xs.clone()), exec).unwrap()));
    }
    group.finish();
}


criterion_group!(benches, operator, fields);
criterion_main!(benches);
