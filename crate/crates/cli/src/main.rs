//! `ecf`: run contract scenarios, monitor them for effectively-callback-free
//! execution, consult the brute-force equivalence oracles, run the static
//! decider, replay recorded traces, and benchmark the monitor.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ecf_core::decider::{
    build_a_o, decide_secf_c, load_spec, replay_counterexample, secf_fs_probe, AutomatonVariant,
    ReplayResult, SecfVerdict,
};
use ecf_core::interp::{
    load_scenario, trace_from_json, trace_to_json, InterpError, Scenario, Trace,
};
use ecf_core::lang::ObjectName;
use ecf_core::monitor::{EcfReport, Monitor, Verdict, REPORT_FORMAT_VERSION};
use ecf_core::oracle::{decf_c_oracle, decf_fs_oracle, CecfConfig, CecfOutcome, FsConfig, FsOutcome};
use ecf_core::workload::{
    overhead_workload, run_monitor_workload, stats_footprint, synth_execution, Shape,
    WorkloadParams,
};

#[derive(Parser)]
#[command(name = "ecf", version, about = "Effectively-callback-free execution checking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Detect,
    Prevent,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchShape {
    Flat,
    Nested,
}

#[derive(Subcommand)]
enum Command {
    /// Execute scenarios and print the final store.
    Run {
        scenarios: Vec<PathBuf>,
        /// Record the run trace to this file (single scenario only).
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Override the scenario's step budget.
        #[arg(long)]
        budget: Option<u64>,
        /// Shard independent scenarios across this many threads.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Execute scenarios under the online monitor and report verdicts.
    Monitor {
        scenarios: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Detect)]
        mode: Mode,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Record the run trace to this file (single scenario only).
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Check a recorded trace against the reference oracles.
    Oracle {
        #[arg(long)]
        trace: PathBuf,
        /// Object to check.
        #[arg(long)]
        object: String,
        /// Use the final-state oracle instead of the conflict oracle.
        #[arg(long)]
        fs: bool,
        /// Havoc value domain for the final-state oracle.
        #[arg(long, value_delimiter = ',')]
        domain: Vec<i64>,
        /// Scenario file providing the code context (required with --fs).
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Write the witness trace here when one exists.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Statically decide conflict-SECF for a finite-state object.
    Decide {
        spec: PathBuf,
        /// Write the replayed counterexample trace here.
        #[arg(long)]
        cex: Option<PathBuf>,
        /// Also report quiescent pairs reachable only with callbacks.
        #[arg(long)]
        fs_probe: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Re-analyze a recorded trace with the monitor.
    Replay {
        trace: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Synthetic monitor workloads; emits CSV rows of (n, m, time, memory).
    Bench {
        #[arg(long, default_value_t = 4)]
        invocations: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![100usize, 1000, 10000])]
        segments: Vec<usize>,
        #[arg(long, default_value_t = 16)]
        locations: usize,
        #[arg(long, value_enum, default_value_t = BenchShape::Flat)]
        shape: BenchShape,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also measure interpreter overhead on a callback-free workload of
        /// this many executions.
        #[arg(long)]
        overhead: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(10)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run {
            scenarios,
            record,
            format,
            budget,
            parallel,
        } => cmd_run(&scenarios, record.as_deref(), format, budget, parallel),
        Command::Monitor {
            scenarios,
            mode,
            report,
            record,
            format,
            budget,
            parallel,
        } => cmd_monitor(
            &scenarios,
            mode,
            report.as_deref(),
            record.as_deref(),
            format,
            budget,
            parallel,
        ),
        Command::Oracle {
            trace,
            object,
            fs,
            domain,
            scenario,
            witness,
            report,
            format,
        } => cmd_oracle(
            &trace,
            &object,
            fs,
            &domain,
            scenario.as_deref(),
            witness.as_deref(),
            report.as_deref(),
            format,
        ),
        Command::Decide {
            spec,
            cex,
            fs_probe,
            format,
        } => cmd_decide(&spec, cex.as_deref(), fs_probe, format),
        Command::Replay {
            trace,
            report,
            format,
        } => cmd_replay(&trace, report.as_deref(), format),
        Command::Bench {
            invocations,
            segments,
            locations,
            shape,
            seed,
            overhead,
            out,
        } => cmd_bench(invocations, &segments, locations, shape, seed, overhead, out.as_deref()),
    }
}

struct ScenarioRun {
    scenario: Scenario,
    outcome: Result<(ecf_core::interp::RunOutcome, Monitor), InterpError>,
}

/// Runs scenarios, optionally sharded; results come back in input order.
fn run_scenarios(
    paths: &[PathBuf],
    budget: Option<u64>,
    parallel: usize,
    prevent: bool,
) -> Result<Vec<ScenarioRun>, String> {
    if paths.is_empty() {
        return Err("no scenario files given".to_string());
    }
    let mut scenarios = Vec::new();
    for p in paths {
        let mut s = load_scenario(p)?;
        if let Some(b) = budget {
            s.step_budget = b;
        }
        scenarios.push(s);
    }
    let threads = parallel.max(1).min(scenarios.len());
    if threads <= 1 {
        return Ok(scenarios
            .into_iter()
            .map(|scenario| {
                let outcome = run_one(&scenario, prevent);
                ScenarioRun { scenario, outcome }
            })
            .collect());
    }
    let mut slots: Vec<Option<ScenarioRun>> = Vec::new();
    slots.resize_with(scenarios.len(), || None);
    let jobs: Vec<(usize, Scenario)> = scenarios.into_iter().enumerate().collect();
    let chunk = jobs.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for batch in jobs.chunks(chunk) {
            handles.push(scope.spawn(move || {
                batch
                    .iter()
                    .map(|(i, scenario)| {
                        let outcome = run_one(scenario, prevent);
                        (
                            *i,
                            ScenarioRun {
                                scenario: scenario.clone(),
                                outcome,
                            },
                        )
                    })
                    .collect::<Vec<_>>()
            }));
        }
        for h in handles {
            for (i, r) in h.join().expect("worker") {
                slots[i] = Some(r);
            }
        }
    });
    Ok(slots.into_iter().map(|s| s.expect("all slots filled")).collect())
}

/// One scenario under the monitor. Prevent-mode reverts the store effects of
/// every complete execution the monitor rejects and goes on with the run.
fn run_one(
    scenario: &Scenario,
    prevent: bool,
) -> Result<(ecf_core::interp::RunOutcome, Monitor), InterpError> {
    use ecf_core::interp::{run_complete_execution, CallMode, RunOutcome, TopCall};
    let mut monitor = Monitor::new(&scenario.ctx);
    if !prevent {
        let outcome = scenario.run(&mut monitor)?;
        return Ok((outcome, monitor));
    }
    let mut store = scenario.store.clone();
    let mut traces = Vec::new();
    let mut aborted = 0usize;
    for call in &scenario.calls {
        let top = TopCall {
            target: call.target,
            selector: call.selector,
            arg: call.arg,
        };
        let snapshot = store.clone();
        let (next, trace) = run_complete_execution(
            &scenario.ctx,
            store,
            &top,
            &mut CallMode::Concrete,
            scenario.step_budget,
            &mut monitor,
        )?;
        if trace.aborted() {
            aborted += 1;
        }
        let rejected = monitor
            .finished
            .last()
            .map(|e| !e.report.aborted && !e.report.all_ecf())
            .unwrap_or(false);
        store = if rejected { snapshot } else { next };
        traces.push(trace);
    }
    Ok((
        RunOutcome {
            final_store: store,
            traces,
            aborted,
        },
        monitor,
    ))
}

fn record_trace(path: &Path, runs: &[ScenarioRun]) -> Result<(), String> {
    if runs.len() != 1 {
        return Err("--record takes exactly one scenario".to_string());
    }
    let run = &runs[0];
    let outcome = run
        .outcome
        .as_ref()
        .map_err(|e| format!("cannot record a failed run: {e}"))?;
    let trace = Trace::concat(&outcome.0.traces)
        .unwrap_or_else(|| empty_trace(&run.scenario));
    let json = trace_to_json(&trace, &run.scenario.ctx);
    std::fs::write(path, pretty(&json)).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

fn empty_trace(scenario: &Scenario) -> Trace {
    Trace {
        events: vec![],
        initial_store: scenario.store.clone(),
        final_store: scenario.store.clone(),
        spans: vec![],
        names: (0..scenario.ctx.len())
            .map(|i| {
                scenario
                    .ctx
                    .name_of(ecf_core::lang::ObjectId(i as u32))
                    .unwrap()
                    .clone()
            })
            .collect(),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn cmd_run(
    paths: &[PathBuf],
    record: Option<&Path>,
    format: Format,
    budget: Option<u64>,
    parallel: usize,
) -> Result<ExitCode, String> {
    let runs = run_scenarios(paths, budget, parallel, false)?;
    let mut any_abort = false;
    for (path, run) in paths.iter().zip(&runs) {
        match &run.outcome {
            Ok((outcome, _)) => {
                any_abort |= outcome.aborted > 0;
                let store = outcome.final_store.to_json(&run.scenario.ctx);
                match format {
                    Format::Json => {
                        let v = serde_json::json!({
                            "scenario": path.display().to_string(),
                            "finalStore": store,
                            "executions": outcome.traces.len(),
                            "aborted": outcome.aborted,
                        });
                        print!("{}", pretty(&v));
                    }
                    Format::Text => {
                        println!(
                            "{}: {} executions, {} aborted",
                            path.display(),
                            outcome.traces.len(),
                            outcome.aborted
                        );
                        println!("final store: {}", store);
                    }
                }
            }
            Err(InterpError::BudgetExceeded(b)) => {
                eprintln!("{}: step budget {b} exceeded", path.display());
                return Ok(ExitCode::from(3));
            }
            Err(e) => return Err(format!("{}: {e}", path.display())),
        }
    }
    if let Some(p) = record {
        record_trace(p, &runs)?;
    }
    Ok(ExitCode::from(if any_abort { 2 } else { 0 }))
}

fn reports_json(monitor: &Monitor) -> serde_json::Value {
    let reports: Vec<&EcfReport> = monitor.finished.iter().map(|e| &e.report).collect();
    serde_json::json!({
        "formatVersion": REPORT_FORMAT_VERSION,
        "executions": reports,
        "abortedExecutions": monitor.aborted_executions,
    })
}

fn print_report_text(monitor: &Monitor) {
    println!(
        "{:<6} {:<14} {:<8} {:>4} {:>4}  witness/cycle",
        "exec", "object", "verdict", "m", "n"
    );
    for exec in &monitor.finished {
        if exec.report.aborted {
            println!("{:<6} {:<14} {:<8}", exec.report.exec_id, "-", "aborted");
            continue;
        }
        for ov in &exec.report.objects {
            let extra = match (&ov.witness_order, &ov.cycle) {
                (Some(w), _) => format!("order {w:?}"),
                (_, Some(c)) => format!("cycle {c:?}"),
                _ => String::new(),
            };
            let verdict = match ov.verdict {
                Verdict::Ecf => "ECF",
                Verdict::NotEcf => "NotECF",
            };
            println!(
                "{:<6} {:<14} {:<8} {:>4} {:>4}  {extra}",
                exec.report.exec_id, ov.obj, verdict, ov.m, ov.n
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_monitor(
    paths: &[PathBuf],
    mode: Mode,
    report: Option<&Path>,
    record: Option<&Path>,
    format: Format,
    budget: Option<u64>,
    parallel: usize,
) -> Result<ExitCode, String> {
    let runs = run_scenarios(paths, budget, parallel, mode == Mode::Prevent)?;
    let mut all_ecf = true;
    let mut report_docs = Vec::new();
    for (path, run) in paths.iter().zip(&runs) {
        match &run.outcome {
            Ok((outcome, monitor)) => {
                for exec in &monitor.finished {
                    if !exec.report.aborted && !exec.report.all_ecf() {
                        all_ecf = false;
                    }
                }
                match format {
                    Format::Text => {
                        println!("== {}", path.display());
                        print_report_text(monitor);
                        println!(
                            "final store: {}",
                            outcome.final_store.to_json(&run.scenario.ctx)
                        );
                    }
                    Format::Json => {
                        print!("{}", pretty(&reports_json(monitor)));
                    }
                }
                report_docs.push(reports_json(monitor));
            }
            Err(InterpError::BudgetExceeded(b)) => {
                eprintln!("{}: step budget {b} exceeded", path.display());
                return Ok(ExitCode::from(3));
            }
            Err(e) => return Err(format!("{}: {e}", path.display())),
        }
    }
    if let Some(p) = report {
        let doc = if report_docs.len() == 1 {
            report_docs.into_iter().next().unwrap()
        } else {
            serde_json::Value::Array(report_docs)
        };
        std::fs::write(p, pretty(&doc)).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    if let Some(p) = record {
        record_trace(p, &runs)?;
    }
    Ok(ExitCode::from(if all_ecf { 0 } else { 1 }))
}

fn load_trace_for_cli(
    path: &Path,
    scenario: Option<&Path>,
) -> Result<(Trace, Option<Scenario>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let json: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    match scenario {
        Some(sp) => {
            let s = load_scenario(sp)?;
            let trace = trace_from_json(&json, &s.ctx)?;
            Ok((trace, Some(s)))
        }
        None => {
            // Build a shape-only context from the trace's own object table:
            // enough for the conflict oracle and monitor replay, which work
            // on events alone.
            let names: Vec<String> = json
                .get("objects")
                .and_then(|o| o.as_array())
                .map(|a| {
                    a.iter()
                        .filter_map(|v| v.as_str().map(|s| s.to_string()))
                        .collect()
                })
                .unwrap_or_default();
            let mut contracts = Vec::new();
            for n in &names {
                let src = format!("contract {n} {{ enter {{ skip; return; }} }}");
                contracts.push(ecf_core::lang::parse_contract(&src).unwrap());
            }
            let ctx = ecf_core::lang::CodeContext::from_contracts(contracts);
            let mut json = json;
            json["initialStore"] = serde_json::json!({});
            json["finalStore"] = serde_json::json!({});
            let trace = trace_from_json(&json, &ctx)?;
            Ok((trace, None))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_oracle(
    trace_path: &Path,
    object: &str,
    fs: bool,
    domain: &[i64],
    scenario: Option<&Path>,
    witness: Option<&Path>,
    report: Option<&Path>,
    format: Format,
) -> Result<ExitCode, String> {
    if fs && scenario.is_none() {
        return Err("--fs needs --scenario for the code context".to_string());
    }
    let (trace, scen) = load_trace_for_cli(trace_path, scenario)?;
    let id = trace
        .id_of(object)
        .ok_or_else(|| format!("object `{object}` not in trace"))?;

    let (verdict, witness_trace): (String, Option<Trace>) = if fs {
        let scen = scen.as_ref().unwrap();
        match decf_fs_oracle(&trace, id, &scen.ctx, domain, &FsConfig::default()) {
            FsOutcome::Ecf { schedule } => {
                let t = ecf_core::interp::run_mgc(
                    id,
                    &scen.ctx,
                    trace.initial_store.clone(),
                    &schedule,
                    scen.step_budget,
                )
                .map(|(_, t)| t)
                .ok();
                ("Ecf".to_string(), t)
            }
            FsOutcome::NotEcf => ("NotEcf".to_string(), None),
            FsOutcome::Unknown { reason } => (format!("Unknown ({reason})"), None),
        }
    } else {
        match decf_c_oracle(&trace, id, &CecfConfig::default()).map_err(|e| e.to_string())? {
            CecfOutcome::Ecf { witness: w } => {
                let t = ecf_core::oracle::induced_trace_for_order(&trace, id, &w.ordering);
                ("Ecf".to_string(), Some(t))
            }
            CecfOutcome::NotEcf => ("NotEcf".to_string(), None),
        }
    };

    let doc = serde_json::json!({
        "formatVersion": REPORT_FORMAT_VERSION,
        "trace": trace_path.display().to_string(),
        "object": object,
        "oracle": if fs { "final-state" } else { "conflict" },
        "verdict": verdict,
    });
    match format {
        Format::Json => print!("{}", pretty(&doc)),
        Format::Text => println!("{object}: {verdict}"),
    }
    if let Some(p) = report {
        std::fs::write(p, pretty(&doc)).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    if let (Some(p), Some(t)) = (witness, witness_trace.as_ref()) {
        let json = match &scen {
            Some(s) => trace_to_json(t, &s.ctx),
            None => {
                let contracts = t
                    .names
                    .iter()
                    .map(|n| {
                        ecf_core::lang::parse_contract(&format!(
                            "contract {} {{ enter {{ skip; return; }} }}",
                            n.0
                        ))
                        .unwrap()
                    })
                    .collect();
                let ctx = ecf_core::lang::CodeContext::from_contracts(contracts);
                trace_to_json(t, &ctx)
            }
        };
        std::fs::write(p, pretty(&json)).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(ExitCode::from(match verdict.as_str() {
        "Ecf" => 0,
        "NotEcf" => 1,
        _ => 4,
    }))
}

fn cmd_decide(
    spec_path: &Path,
    cex_out: Option<&Path>,
    fs_probe: bool,
    format: Format,
) -> Result<ExitCode, String> {
    let spec = load_spec(spec_path)?;
    let report = decide_secf_c(&spec).map_err(|e| e.to_string())?;
    let verdict = match &report.verdict {
        SecfVerdict::Secf => "Secf",
        SecfVerdict::NotSecf(_) => "NotSecf",
    };
    let mut doc = serde_json::json!({
        "formatVersion": REPORT_FORMAT_VERSION,
        "object": spec.contract.name.0,
        "verdict": verdict,
        "explored": report.explored,
        "clippedAccesses": report.clipped_accesses,
        "abortedPaths": report.aborted_paths,
        "callStates": report.call_states,
    });
    if let SecfVerdict::NotSecf(cex) = &report.verdict {
        let sys = build_a_o(&spec, AutomatonVariant::Full).map_err(|e| e.to_string())?;
        match replay_counterexample(&spec, &sys, cex).map_err(|e| e.to_string())? {
            ReplayResult::Replayed {
                ctx,
                trace,
                monitor,
                ..
            } => {
                let rejected = monitor
                    .finished
                    .iter()
                    .flat_map(|e| e.report.objects.iter())
                    .any(|ov| ov.obj == spec.contract.name.0 && ov.verdict == Verdict::NotEcf);
                doc["replayRejected"] = serde_json::json!(rejected);
                if let Some(p) = cex_out {
                    let json = trace_to_json(&trace, &ctx);
                    std::fs::write(p, pretty(&json))
                        .map_err(|e| format!("{}: {e}", p.display()))?;
                }
            }
            ReplayResult::NotReplayable(reason) => {
                doc["replayRejected"] = serde_json::json!(false);
                doc["replaySkipped"] = serde_json::json!(reason);
            }
        }
    }
    if fs_probe {
        let pairs = secf_fs_probe(&spec).map_err(|e| e.to_string())?;
        doc["fsProbeCallbackOnlyPairs"] = serde_json::json!(pairs.len());
    }
    match format {
        Format::Json => print!("{}", pretty(&doc)),
        Format::Text => {
            println!(
                "{}: {verdict} ({} configurations, {} call states)",
                spec.contract.name.0, report.explored, report.call_states
            );
        }
    }
    Ok(ExitCode::from(match report.verdict {
        SecfVerdict::Secf => 0,
        SecfVerdict::NotSecf(_) => 1,
    }))
}

fn cmd_replay(
    trace_path: &Path,
    report: Option<&Path>,
    format: Format,
) -> Result<ExitCode, String> {
    let (trace, _) = load_trace_for_cli(trace_path, None)?;
    let names: Vec<ObjectName> = trace.names.clone();
    let mut monitor = Monitor::with_names(names);
    monitor.analyze_trace(&trace);
    match format {
        Format::Text => print_report_text(&monitor),
        Format::Json => print!("{}", pretty(&reports_json(&monitor))),
    }
    if let Some(p) = report {
        std::fs::write(p, pretty(&reports_json(&monitor)))
            .map_err(|e| format!("{}: {e}", p.display()))?;
    }
    let all_ecf = monitor
        .finished
        .iter()
        .all(|e| e.report.aborted || e.report.all_ecf());
    Ok(ExitCode::from(if all_ecf { 0 } else { 1 }))
}

fn cmd_bench(
    invocations: usize,
    segments: &[usize],
    locations: usize,
    shape: BenchShape,
    seed: u64,
    overhead: Option<usize>,
    out: Option<&Path>,
) -> Result<ExitCode, String> {
    let shape = match shape {
        BenchShape::Flat => Shape::Flat,
        BenchShape::Nested => Shape::Nested,
    };
    let mut csv = String::from("n,m,time_ns,memory_items\n");
    for &m in segments {
        let params = WorkloadParams {
            invocations,
            segments: m,
            locations,
            shape,
            seed,
        };
        let events = synth_execution(&params);
        // Warm up once, then take the best of three.
        let _ = run_monitor_workload(&events);
        let mut best = None;
        let mut stats = Default::default();
        for _ in 0..3 {
            let (s, t) = run_monitor_workload(&events);
            stats = s;
            best = Some(best.map_or(t, |b: std::time::Duration| b.min(t)));
        }
        let t = best.unwrap();
        csv.push_str(&format!(
            "{invocations},{m},{},{}\n",
            t.as_nanos(),
            stats_footprint(&stats)
        ));
    }
    if let Some(execs) = overhead {
        let (bare, monitored) = overhead_workload(execs, seed);
        csv.push_str(&format!(
            "# overhead: {execs} executions bare={}ns monitored={}ns ratio={:.3}\n",
            bare.as_nanos(),
            monitored.as_nanos(),
            monitored.as_secs_f64() / bare.as_secs_f64().max(1e-9)
        ));
    }
    match out {
        Some(p) => std::fs::write(p, &csv).map_err(|e| format!("{}: {e}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::from(0))
}
