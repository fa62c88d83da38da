//! Synthetic workloads for benchmarking the monitor and measuring
//! interpreter overhead.
//!
//! The hook-stream generator drives the monitor directly, without the
//! interpreter, so segment and invocation counts are exact: `segments` is
//! the number of segments of the host object, `invocations` the number of
//! its invocations (one top-level plus callbacks routed through a relay
//! object).

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::interp::{run_complete_execution, CallMode, NoObserver, Store, TopCall};
use crate::lang::{parse_contract, CodeContext, FieldName, ObjectId, ObjectName};
use crate::monitor::{AnalysisStats, Monitor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Callbacks sit directly inside the one top-level invocation.
    Flat,
    /// Callbacks nest inside each other (worst case for enclosure pairs).
    Nested,
}

#[derive(Debug, Clone, Copy)]
pub struct WorkloadParams {
    pub invocations: usize,
    pub segments: usize,
    pub locations: usize,
    pub shape: Shape,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub enum HookEvent {
    Enter(ObjectId),
    Return(ObjectId),
    Read(usize),
    Write(usize),
}

const HOST: ObjectId = ObjectId(0);
const RELAY: ObjectId = ObjectId(1);

/// Generates the hook stream of one complete execution with the requested
/// host segment and invocation counts.
pub fn synth_execution(params: &WorkloadParams) -> Vec<HookEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.invocations.max(1);
    let callbacks = n - 1;
    let mut events = Vec::new();
    let mut host_segments = 0usize;

    // Budget host segments: every callback contributes one, the top-level
    // invocation absorbs the rest (resumption slices between callbacks).
    let total = params.segments.max(2 * n - 1);
    let top_level_segments = total - callbacks;

    let emit_accesses = |events: &mut Vec<HookEvent>, rng: &mut ChaCha8Rng| {
        let k = params.locations.max(1);
        for _ in 0..2 {
            let loc = rng.gen_range(0..k);
            if rng.gen_bool(0.5) {
                events.push(HookEvent::Read(loc));
            } else {
                events.push(HookEvent::Write(loc));
            }
        }
    };

    match params.shape {
        Shape::Flat => {
            events.push(HookEvent::Enter(HOST));
            host_segments += 1;
            emit_accesses(&mut events, &mut rng);
            for _ in 0..callbacks {
                events.push(HookEvent::Enter(RELAY));
                events.push(HookEvent::Enter(HOST));
                host_segments += 1;
                emit_accesses(&mut events, &mut rng);
                events.push(HookEvent::Return(HOST));
                events.push(HookEvent::Return(RELAY));
                host_segments += 1; // resumption slice
                emit_accesses(&mut events, &mut rng);
            }
            // Pad the top-level invocation with extra slices via no-op
            // relay round trips (relay contributes no host segments).
            while host_segments < top_level_segments + callbacks {
                events.push(HookEvent::Enter(RELAY));
                events.push(HookEvent::Return(RELAY));
                host_segments += 1;
                emit_accesses(&mut events, &mut rng);
            }
            events.push(HookEvent::Return(HOST));
        }
        Shape::Nested => {
            // Chain: host > relay > host > relay > ... each host invocation
            // has an opening and a resumption slice.
            for _ in 0..n {
                events.push(HookEvent::Enter(HOST));
                host_segments += 1;
                emit_accesses(&mut events, &mut rng);
                events.push(HookEvent::Enter(RELAY));
            }
            // innermost relay returns immediately
            for _ in 0..n {
                events.push(HookEvent::Return(RELAY));
                host_segments += 1;
                emit_accesses(&mut events, &mut rng);
                events.push(HookEvent::Return(HOST));
            }
            while host_segments < params.segments {
                // extend the outermost invocation before its final return:
                // not needed for the complexity fit; nested shape fixes
                // segments at 2n.
                break;
            }
        }
    }
    events
}

/// Feeds a hook stream through a fresh monitor and returns its analysis
/// stats together with the wall time of ingestion plus analysis.
pub fn run_monitor_workload(events: &[HookEvent]) -> (AnalysisStats, std::time::Duration) {
    let names = vec![ObjectName("host".into()), ObjectName("relay".into())];
    let field = FieldName("cell".into());
    let mut monitor = Monitor::with_names(names);
    let start = std::time::Instant::now();
    for ev in events {
        match ev {
            HookEvent::Enter(o) => monitor.upon_invocation(*o),
            HookEvent::Return(o) => {
                monitor.upon_return(*o).expect("well-formed stream");
            }
            // Accesses in generated streams always happen in host segments.
            HookEvent::Read(loc) => monitor.upon_read(HOST, &field, Some(*loc as i64)),
            HookEvent::Write(loc) => monitor.upon_write(HOST, &field, Some(*loc as i64)),
        }
    }
    let elapsed = start.elapsed();
    let stats = monitor
        .finished
        .last()
        .map(|e| e.stats)
        .unwrap_or_default();
    (stats, elapsed)
}

/// Data-structure footprint proxy: counted elements the analysis kept.
pub fn stats_footprint(stats: &AnalysisStats) -> usize {
    stats.segments + stats.invocations + stats.matrix_entries + stats.set_elements
        + stats.ioc_edges
}

/// A small callback-free scenario executed `executions` times; used for the
/// monitoring-overhead measurement. Bare and monitored slices are
/// interleaved so that scheduler or allocator contention weighs on both
/// sides alike. Returns (bare, monitored) wall times.
pub fn overhead_workload(
    executions: usize,
    seed: u64,
) -> (std::time::Duration, std::time::Duration) {
    let src = "contract counter { field total; field last;
        enter { var v, t, n; v := arg; t := total; n := t + v; total := n; last := v; ret := n; return; } }";
    let ctx = CodeContext::from_contracts(vec![parse_contract(src).unwrap()]);
    let mut rng = StdRng::seed_from_u64(seed);
    let slice = 500usize.min(executions.max(1));
    let rounds = executions.div_ceil(slice);
    let args: Vec<i64> = (0..slice).map(|_| rng.gen_range(0..100)).collect();

    let run = |observer: &mut dyn crate::interp::ExecObserver| {
        let mut store = Store::new();
        for &arg in &args {
            let top = TopCall {
                target: ObjectId(0),
                selector: 0,
                arg,
            };
            let (next, _) =
                run_complete_execution(&ctx, store, &top, &mut CallMode::Concrete, 10_000, observer)
                    .expect("workload runs");
            store = next;
        }
    };

    // Warm-up.
    run(&mut NoObserver);
    let mut monitor = Monitor::new(&ctx);
    let mut bare = std::time::Duration::ZERO;
    let mut monitored = std::time::Duration::ZERO;
    for _ in 0..rounds {
        let t0 = std::time::Instant::now();
        run(&mut NoObserver);
        bare += t0.elapsed();
        let t1 = std::time::Instant::now();
        run(&mut monitor);
        monitored += t1.elapsed();
    }
    assert_eq!(monitor.finished.len(), rounds * slice);
    (bare, monitored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::Verdict;

    #[test]
    fn flat_workload_hits_requested_counts() {
        let params = WorkloadParams {
            invocations: 4,
            segments: 40,
            locations: 8,
            shape: Shape::Flat,
            seed: 7,
        };
        let events = synth_execution(&params);
        let names = vec![ObjectName("host".into()), ObjectName("relay".into())];
        let field = FieldName("cell".into());
        let mut monitor = Monitor::with_names(names);
        for ev in &events {
            match ev {
                HookEvent::Enter(o) => monitor.upon_invocation(*o),
                HookEvent::Return(o) => monitor.upon_return(*o).unwrap(),
                HookEvent::Read(l) => monitor.upon_read(HOST, &field, Some(*l as i64)),
                HookEvent::Write(l) => monitor.upon_write(HOST, &field, Some(*l as i64)),
            }
        }
        let exec = monitor.finished.last().unwrap();
        let host_segs = exec
            .record
            .segments
            .iter()
            .filter(|s| s.obj == HOST)
            .count();
        assert_eq!(host_segs, 40);
        let host_invs = exec
            .record
            .invocations
            .iter()
            .filter(|i| i.obj == HOST)
            .count();
        assert_eq!(host_invs, 4);
        // Verdicts exist for both objects.
        assert_eq!(exec.report.objects.len(), 2);
        let _ = Verdict::Ecf;
    }
}
