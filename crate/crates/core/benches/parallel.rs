use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use iel_core::entropy::{build_spanning_set, SpanningOptions};
use iel_core::sets::{build_transition_graph, CellSet, CellSetTag, GraphOptions, GridPartition};
use iel_core::system::{ControlRange, ControlSystem, IntegrationOptions, ScalarLinear, StateBox};
use iel_core::Execution;

fn scalar() -> ControlSystem {
    ControlSystem::new(
        Arc::new(ScalarLinear::default()),
        vec![1.0],
        ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
        StateBox::new(vec![-1.2], vec![1.2]).unwrap(),
    )
    .unwrap()
}

fn graph_build(c: &mut Criterion) {
    let sys = scalar();
    let grid = GridPartition::uniform(sys.state_box(), 400).unwrap();
    let mut group = c.benchmark_group("transition_graph");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let opts = GraphOptions { execution: exec, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &opts, |b, opts| {
            b.iter(|| build_transition_graph(&sys, &grid, black_box(0.05), 0.01, opts).unwrap())
        });
    }
    group.finish();
}

fn spanning(c: &mut Criterion) {
    let sys = scalar();
    let grid = GridPartition::uniform(sys.state_box(), 480).unwrap();
    let k = CellSet::from_box(&grid, &[-0.5], &[0.5], CellSetTag::Custom);
    let q = CellSet::from_box(&grid, &[-1.0], &[1.0], CellSetTag::Custom);
    let mut group = c.benchmark_group("spanning_set");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let opts = SpanningOptions { execution: exec, integration: IntegrationOptions::unbounded(0.05), ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &opts, |b, opts| {
            b.iter(|| build_spanning_set(&sys, &grid, &k, &q, black_box(3.0), 0.5, opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, graph_build, spanning);
criterion_main!(benches);
