//! The executable example corpus: each entry bundles contract sources, a
//! scenario or decider spec, and an expectation file, and the runner checks
//! interpreter output and checker verdicts against the expectations.
//!
//! Layout: `corpus/<entry>/{*.pl, scenario.json|decider.json, expected.json}`.
//! The `ECF_CORPUS_DIR` environment variable overrides the corpus location.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::decider::{
    decide_secf_c, load_spec, replay_counterexample, AutomatonVariant, build_a_o, ReplayResult,
    SecfVerdict,
};
use crate::interp::{load_scenario, InterpError, Store};
use crate::lang::ObjectName;
use crate::monitor::{Monitor, Verdict};
use crate::oracle::{decf_c_oracle, decf_fs_oracle, CecfConfig, CecfOutcome, FsConfig, FsOutcome};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpectedVerdicts {
    #[serde(default)]
    pub monitor: Option<String>,
    #[serde(default)]
    pub cecf: Option<String>,
    #[serde(default)]
    pub fsecf: Option<String>,
    #[serde(default, rename = "cycleLen")]
    pub cycle_len: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    #[serde(rename = "afterCall")]
    pub after_call: usize,
    pub store: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantSpec {
    pub object: String,
    pub map: String,
    pub scalar: String,
    #[serde(rename = "holdsAtEveryQuiescent")]
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Expected {
    #[serde(default)]
    pub note: String,
    #[serde(default, rename = "finalStore")]
    pub final_store: Option<Value>,
    #[serde(default)]
    pub checkpoints: Vec<Checkpoint>,
    #[serde(default)]
    pub aborted: Option<usize>,
    #[serde(default)]
    pub verdicts: BTreeMap<String, ExpectedVerdicts>,
    #[serde(default, rename = "fsDomain")]
    pub fs_domain: Vec<i64>,
    #[serde(default, rename = "invariantSumCreditEqBalance")]
    pub invariant: Option<InvariantSpec>,
    #[serde(default)]
    pub secf: Option<String>,
    #[serde(default, rename = "replayNotEcf")]
    pub replay_not_ecf: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub dir: PathBuf,
    pub expected: Expected,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Scenario,
    Decider,
}

#[derive(Debug, Clone)]
pub struct EntryResult {
    pub name: String,
    pub failures: Vec<String>,
}

impl EntryResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Locates the corpus directory: `ECF_CORPUS_DIR`, then `corpus/` relative
/// to the workspace root this crate was built in, then the working
/// directory.
pub fn corpus_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("ECF_CORPUS_DIR") {
        return PathBuf::from(dir);
    }
    let from_manifest = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus");
    if from_manifest.is_dir() {
        return from_manifest;
    }
    PathBuf::from("corpus")
}

pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, String> {
    let mut entries = Vec::new();
    let rd = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut dirs: Vec<PathBuf> = rd
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for d in dirs {
        let expected_path = d.join("expected.json");
        if !expected_path.is_file() {
            continue;
        }
        let expected: Expected = serde_json::from_str(
            &std::fs::read_to_string(&expected_path)
                .map_err(|e| format!("{}: {e}", expected_path.display()))?,
        )
        .map_err(|e| format!("{}: {e}", expected_path.display()))?;
        let kind = if d.join("scenario.json").is_file() {
            EntryKind::Scenario
        } else if d.join("decider.json").is_file() {
            EntryKind::Decider
        } else {
            continue;
        };
        entries.push(CorpusEntry {
            name: d
                .file_name()
                .map(|n| n.to_string_lossy().to_string())
                .unwrap_or_default(),
            dir: d,
            expected,
            kind,
        });
    }
    Ok(entries)
}

pub fn run_corpus(dir: &Path) -> Result<Vec<EntryResult>, String> {
    let entries = load_corpus(dir)?;
    Ok(entries.iter().map(run_entry).collect())
}

pub fn run_entry(entry: &CorpusEntry) -> EntryResult {
    let mut failures = Vec::new();
    match entry.kind {
        EntryKind::Scenario => run_scenario_entry(entry, &mut failures),
        EntryKind::Decider => run_decider_entry(entry, &mut failures),
    }
    EntryResult {
        name: entry.name.clone(),
        failures,
    }
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Ecf => "Ecf",
        Verdict::NotEcf => "NotEcf",
    }
}

fn run_scenario_entry(entry: &CorpusEntry, failures: &mut Vec<String>) {
    let scenario = match load_scenario(&entry.dir.join("scenario.json")) {
        Ok(s) => s,
        Err(e) => {
            failures.push(format!("scenario load: {e}"));
            return;
        }
    };
    let mut monitor = Monitor::new(&scenario.ctx);
    let outcome = match scenario.run(&mut monitor) {
        Ok(o) => o,
        Err(InterpError::BudgetExceeded(b)) => {
            failures.push(format!("budget {b} exceeded"));
            return;
        }
        Err(e) => {
            failures.push(format!("run: {e}"));
            return;
        }
    };

    if let Some(expected_store) = &entry.expected.final_store {
        match Store::from_json(expected_store, &scenario.ctx) {
            Ok(want) => {
                if want.normalized() != outcome.final_store.normalized() {
                    failures.push(format!(
                        "final store mismatch:\n  want {}\n  got  {}",
                        want.to_json(&scenario.ctx),
                        outcome.final_store.to_json(&scenario.ctx)
                    ));
                }
            }
            Err(e) => failures.push(format!("expected store: {e}")),
        }
    }

    if let Some(want_aborted) = entry.expected.aborted {
        if outcome.aborted != want_aborted {
            failures.push(format!(
                "aborted executions: want {want_aborted}, got {}",
                outcome.aborted
            ));
        }
    }

    for cp in &entry.expected.checkpoints {
        if cp.after_call == 0 || cp.after_call > outcome.traces.len() {
            failures.push(format!("checkpoint afterCall {} out of range", cp.after_call));
            continue;
        }
        let got = &outcome.traces[cp.after_call - 1].final_store;
        match Store::from_json(&cp.store, &scenario.ctx) {
            Ok(want) => {
                if want.normalized() != got.normalized() {
                    failures.push(format!(
                        "checkpoint after call {} mismatch:\n  want {}\n  got  {}",
                        cp.after_call,
                        want.to_json(&scenario.ctx),
                        got.to_json(&scenario.ctx)
                    ));
                }
            }
            Err(e) => failures.push(format!("checkpoint store: {e}")),
        }
    }

    // Aggregate monitor verdicts per object: any rejected execution marks
    // the object rejected for the run.
    let mut monitor_verdicts: BTreeMap<String, Verdict> = BTreeMap::new();
    for exec in &monitor.finished {
        for ov in &exec.report.objects {
            let e = monitor_verdicts
                .entry(ov.obj.clone())
                .or_insert(Verdict::Ecf);
            if ov.verdict == Verdict::NotEcf {
                *e = Verdict::NotEcf;
            }
        }
    }

    for (obj, want) in &entry.expected.verdicts {
        if let Some(want_monitor) = &want.monitor {
            match monitor_verdicts.get(obj) {
                Some(got) => {
                    if verdict_str(*got) != want_monitor {
                        failures.push(format!(
                            "monitor verdict for {obj}: want {want_monitor}, got {}",
                            verdict_str(*got)
                        ));
                    }
                }
                None => failures.push(format!("monitor verdict for {obj}: object not seen")),
            }
        }
        if let Some(want_cycle) = want.cycle_len {
            let got = monitor
                .finished
                .iter()
                .flat_map(|e| e.report.objects.iter())
                .filter(|ov| &ov.obj == obj)
                .find_map(|ov| ov.cycle.as_ref().map(|c| c.len()));
            if got != Some(want_cycle) {
                failures.push(format!(
                    "cycle length for {obj}: want {want_cycle}, got {got:?}"
                ));
            }
        }

        let id = match scenario.ctx.id_of(&ObjectName(obj.clone())) {
            Some(id) => id,
            None => {
                failures.push(format!("expected verdict names unknown object {obj}"));
                continue;
            }
        };
        if let Some(want_cecf) = &want.cecf {
            // Worst verdict across the run's complete executions.
            let mut got = "Ecf";
            for trace in &outcome.traces {
                if trace.aborted() {
                    continue;
                }
                match decf_c_oracle(trace, id, &CecfConfig::default()) {
                    Ok(CecfOutcome::Ecf { .. }) => {}
                    Ok(CecfOutcome::NotEcf) => got = "NotEcf",
                    Err(e) => failures.push(format!("cecf oracle for {obj}: {e}")),
                }
            }
            if got != want_cecf {
                failures.push(format!(
                    "conflict-oracle verdict for {obj}: want {want_cecf}, got {got}"
                ));
            }
        }
        if let Some(want_fs) = &want.fsecf {
            let mut got = "Ecf".to_string();
            for trace in &outcome.traces {
                if trace.aborted() {
                    continue;
                }
                match decf_fs_oracle(
                    trace,
                    id,
                    &scenario.ctx,
                    &entry.expected.fs_domain,
                    &FsConfig::default(),
                ) {
                    FsOutcome::Ecf { .. } => {}
                    FsOutcome::NotEcf => got = "NotEcf".to_string(),
                    FsOutcome::Unknown { .. } => {
                        if got == "Ecf" {
                            got = "Unknown".to_string();
                        }
                    }
                }
            }
            if &got != want_fs {
                failures.push(format!(
                    "final-state-oracle verdict for {obj}: want {want_fs}, got {got}"
                ));
            }
        }
    }

    if let Some(inv) = &entry.expected.invariant {
        let id = scenario.ctx.id_of(&ObjectName(inv.object.clone()));
        match id {
            None => failures.push(format!("invariant names unknown object {}", inv.object)),
            Some(id) => {
                let mut holds = true;
                for trace in &outcome.traces {
                    let store = &trace.final_store;
                    let sum = store.map_sum(id, &crate::lang::FieldName(inv.map.clone()));
                    let bal = store.read(id, &crate::lang::FieldName(inv.scalar.clone()), None);
                    if sum != bal {
                        holds = false;
                    }
                }
                if holds != inv.holds {
                    failures.push(format!(
                        "invariant sum({}) == {}: want holds={}, got holds={holds}",
                        inv.map, inv.scalar, inv.holds
                    ));
                }
            }
        }
    }
}

fn run_decider_entry(entry: &CorpusEntry, failures: &mut Vec<String>) {
    let spec = match load_spec(&entry.dir.join("decider.json")) {
        Ok(s) => s,
        Err(e) => {
            failures.push(format!("decider spec: {e}"));
            return;
        }
    };
    let report = match decide_secf_c(&spec) {
        Ok(r) => r,
        Err(e) => {
            failures.push(format!("decide: {e}"));
            return;
        }
    };
    let got = match &report.verdict {
        SecfVerdict::Secf => "Secf",
        SecfVerdict::NotSecf(_) => "NotSecf",
    };
    if let Some(want) = &entry.expected.secf {
        if want != got {
            failures.push(format!("secf verdict: want {want}, got {got}"));
        }
    }
    if let (SecfVerdict::NotSecf(cex), Some(true)) =
        (&report.verdict, entry.expected.replay_not_ecf)
    {
        let sys = match build_a_o(&spec, AutomatonVariant::Full) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("build: {e}"));
                return;
            }
        };
        match replay_counterexample(&spec, &sys, cex) {
            Ok(ReplayResult::Replayed { monitor, .. }) => {
                let rejected = monitor
                    .finished
                    .iter()
                    .flat_map(|e| e.report.objects.iter())
                    .any(|ov| {
                        ov.obj == spec.contract.name.0 && ov.verdict == Verdict::NotEcf
                    });
                if !rejected {
                    failures.push(
                        "counterexample replay was not rejected by the monitor".to_string(),
                    );
                }
            }
            Ok(ReplayResult::NotReplayable(reason)) => {
                failures.push(format!("counterexample not replayable: {reason}"));
            }
            Err(e) => failures.push(format!("replay: {e}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_dir_resolves() {
        let dir = corpus_dir();
        assert!(dir.join("dao_attack").is_dir(), "missing {dir:?}");
    }
}
