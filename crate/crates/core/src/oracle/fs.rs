//! Final-state equivalence by bounded search.
//!
//! A witness is a callback-free run over the object's call-free transform
//! that connects the same initial and final object store. The search space
//! is schedules of bounded length; at every elided call site the return
//! value branches over a finite pool. That pool plays the role of the free
//! stub contexts: any such run is realizable by stubs returning the chosen
//! values. Arguments and return values observed in the input trace seed the
//! pools so that a conflict-equivalent reordering, when one exists, stays
//! inside the searched space.
//!
//! `NotEcf` means the declared bounded space was searched exhaustively with
//! no witness; internal caps or step budgets degrade the verdict to
//! `Unknown`, never to a false claim.

use std::collections::{BTreeMap, BTreeSet};

use crate::interp::{
    run_complete_execution, CallMode, EventKind, InterpError, MgcCall, NoObserver, Store, TopCall,
    Trace,
};
use crate::lang::{CodeContext, ObjectId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsConfig {
    /// Maximum schedule length (number of top-level invocations).
    pub schedule_len: usize,
    /// Cap on executed runs across the whole search.
    pub max_runs: usize,
    /// Step budget per complete execution.
    pub step_budget: u64,
}

impl Default for FsConfig {
    fn default() -> Self {
        FsConfig {
            schedule_len: 4,
            max_runs: 50_000,
            step_budget: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FsOutcome {
    Ecf { schedule: Vec<MgcCall> },
    NotEcf,
    Unknown { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CallChoice {
    selector: u32,
    arg: i64,
}

/// Final-state ECF verdict for `o` in `t`, searched over the context's code
/// for `o` with havoc values from `havoc_domain` plus observed values.
pub fn decf_fs_oracle(
    t: &Trace,
    o: ObjectId,
    ctx: &CodeContext,
    havoc_domain: &[i64],
    cfg: &FsConfig,
) -> FsOutcome {
    let start = t.initial_store.restrict(o).normalized();
    let target = t.final_store.restrict(o).normalized();
    if start == target {
        return FsOutcome::Ecf { schedule: vec![] };
    }

    let contract = match ctx.get(o) {
        Some(c) => c,
        None => {
            return FsOutcome::Unknown {
                reason: "object not in context".to_string(),
            }
        }
    };

    // Seed argument and havoc pools from the trace.
    let mut args: BTreeSet<i64> = havoc_domain.iter().copied().collect();
    let mut selectors: BTreeSet<u32> = (0..contract.methods.len() as u32).collect();
    let mut havocs: BTreeSet<i64> = havoc_domain.iter().copied().collect();
    let mut stack: Vec<ObjectId> = Vec::new();
    for ev in &t.events {
        match ev.kind {
            EventKind::Enter => {
                if ev.object == o {
                    if let Some(v) = ev.value {
                        args.insert(v);
                    }
                    if let Some(s) = ev.selector {
                        selectors.insert(s);
                    }
                }
                stack.push(ev.object);
            }
            EventKind::Return => {
                stack.pop();
                // A value returned into an o frame seeds the havoc pool.
                if stack.last() == Some(&o) {
                    if let Some(v) = ev.value {
                        havocs.insert(v);
                    }
                }
            }
            _ => {}
        }
    }
    if havocs.is_empty() {
        havocs.insert(0);
    }
    let havoc_pool: Vec<i64> = havocs.into_iter().collect();
    let mut choices: Vec<CallChoice> = Vec::new();
    for &selector in &selectors {
        for &arg in &args {
            choices.push(CallChoice { selector, arg });
        }
    }

    // Breadth-first over normalized o-stores; parents reconstruct the
    // witness schedule.
    let mut runs_used = 0usize;
    let mut budget_hit = false;
    let mut visited: BTreeMap<Store, Option<(Store, CallChoice, Vec<i64>)>> = BTreeMap::new();
    visited.insert(start.clone(), None);
    let mut frontier = vec![start.clone()];

    for _depth in 0..cfg.schedule_len {
        let mut next_frontier = Vec::new();
        for state in &frontier {
            for choice in &choices {
                let outcomes = enumerate_havoc_runs(
                    ctx,
                    o,
                    state,
                    choice,
                    &havoc_pool,
                    cfg,
                    &mut runs_used,
                    &mut budget_hit,
                );
                let outcomes = match outcomes {
                    Ok(o) => o,
                    Err(reason) => return FsOutcome::Unknown { reason },
                };
                for (result, script) in outcomes {
                    if visited.contains_key(&result) {
                        continue;
                    }
                    visited.insert(
                        result.clone(),
                        Some((state.clone(), choice.clone(), script)),
                    );
                    if result == target {
                        return FsOutcome::Ecf {
                            schedule: reconstruct(&visited, contract, &result),
                        };
                    }
                    next_frontier.push(result);
                }
            }
        }
        if next_frontier.is_empty() {
            break;
        }
        frontier = next_frontier;
    }

    if budget_hit {
        FsOutcome::Unknown {
            reason: "step budget exhausted on some callback-free run".to_string(),
        }
    } else {
        FsOutcome::NotEcf
    }
}

/// Runs one call-free invocation from `state` for every havoc-value vector,
/// by replaying prefixes and branching at the first unexplored site.
#[allow(clippy::too_many_arguments)]
fn enumerate_havoc_runs(
    ctx: &CodeContext,
    o: ObjectId,
    state: &Store,
    choice: &CallChoice,
    pool: &[i64],
    cfg: &FsConfig,
    runs_used: &mut usize,
    budget_hit: &mut bool,
) -> Result<Vec<(Store, Vec<i64>)>, String> {
    let mut results = Vec::new();
    let mut prefixes: Vec<Vec<i64>> = vec![Vec::new()];
    while let Some(prefix) = prefixes.pop() {
        if *runs_used >= cfg.max_runs {
            return Err(format!("run cap of {} exceeded", cfg.max_runs));
        }
        *runs_used += 1;

        let consumed = std::cell::Cell::new(0usize);
        let script = prefix.clone();
        let default = pool[0];
        let mut next = || {
            let i = consumed.get();
            consumed.set(i + 1);
            script.get(i).copied().unwrap_or(default)
        };
        let top = TopCall {
            target: o,
            selector: choice.selector,
            arg: choice.arg,
        };
        let run = run_complete_execution(
            ctx,
            state.clone(),
            &top,
            &mut CallMode::Modular(&mut next),
            cfg.step_budget,
            &mut NoObserver,
        );
        match run {
            Ok((out, trace)) => {
                let sites = consumed.get();
                if !trace.aborted() {
                    results.push((out.restrict(o).normalized(), full_vector(&prefix, sites, pool[0])));
                }
                // Branch over the remaining pool at each site the default
                // filled in.
                for p in prefix.len()..sites {
                    for &v in &pool[1..] {
                        let mut branched = full_vector(&prefix, p, pool[0]);
                        branched.push(v);
                        prefixes.push(branched);
                    }
                }
            }
            Err(InterpError::BudgetExceeded(_)) => {
                *budget_hit = true;
            }
            Err(e) => return Err(format!("callback-free run failed: {e}")),
        }
    }
    Ok(results)
}

fn full_vector(prefix: &[i64], len: usize, default: i64) -> Vec<i64> {
    let mut v: Vec<i64> = prefix.to_vec();
    while v.len() < len {
        v.push(default);
    }
    v.truncate(len.max(prefix.len()));
    v
}

fn reconstruct(
    visited: &BTreeMap<Store, Option<(Store, CallChoice, Vec<i64>)>>,
    contract: &crate::lang::Contract,
    target: &Store,
) -> Vec<MgcCall> {
    let mut schedule = Vec::new();
    let mut cur = target.clone();
    while let Some(Some((prev, choice, script))) = visited.get(&cur) {
        schedule.push(MgcCall {
            method: contract.method_name(choice.selector).map(|s| s.to_string()),
            arg: choice.arg,
            havoc_values: script.clone(),
        });
        cur = prev.clone();
    }
    schedule.reverse();
    schedule
}
