//! Monitor analysis cost against segment and invocation counts.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use ecf_core::workload::{run_monitor_workload, synth_execution, Shape, WorkloadParams};

fn monitor_flat(c: &mut Criterion) {
    let mut group = c.benchmark_group("monitor_flat");
    for m in [100usize, 1_000, 10_000] {
        let params = WorkloadParams {
            invocations: 8,
            segments: m,
            locations: 16,
            shape: Shape::Flat,
            seed: 42,
        };
        let events = synth_execution(&params);
        group.throughput(Throughput::Elements(m as u64));
        group.bench_with_input(BenchmarkId::from_parameter(m), &events, |b, events| {
            b.iter(|| run_monitor_workload(events));
        });
    }
    group.finish();
}

fn monitor_nested(c: &mut Criterion) {
    let mut group = c.benchmark_group("monitor_nested");
    for n in [4usize, 16, 64] {
        let params = WorkloadParams {
            invocations: n,
            segments: 2 * n,
            locations: 16,
            shape: Shape::Nested,
            seed: 42,
        };
        let events = synth_execution(&params);
        group.bench_with_input(BenchmarkId::from_parameter(n), &events, |b, events| {
            b.iter(|| run_monitor_workload(events));
        });
    }
    group.finish();
}

criterion_group!(benches, monitor_flat, monitor_nested);
criterion_main!(benches);
