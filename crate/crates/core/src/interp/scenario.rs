//! Scenario files: a code context, an initial store, and a call list, with
//! the execution mode and step budget. Runs are concatenations of complete
//! executions threaded through the same store.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::lang::{
    parse_contract, validate_context, CodeContext, DiagnosticKind, ObjectId, ObjectName,
};

use super::store::Store;
use super::trace::Trace;
use super::{
    run_complete_execution, CallMode, ExecObserver, InterpError, TopCall, DEFAULT_STEP_BUDGET,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioMode {
    Concrete,
    /// Calls are havocked with values cycled from the domain.
    Modular { havoc_domain: Vec<i64> },
}

#[derive(Debug, Clone)]
pub struct ResolvedCall {
    pub target: ObjectId,
    pub selector: u32,
    pub arg: i64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub ctx: CodeContext,
    pub store: Store,
    pub calls: Vec<ResolvedCall>,
    pub mode: ScenarioMode,
    pub step_budget: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_store: Store,
    pub traces: Vec<Trace>,
    pub aborted: usize,
}

impl Scenario {
    /// Runs every call in order. Failed asserts revert the affected complete
    /// execution and the run continues; budget exhaustion stops it.
    pub fn run(&self, observer: &mut dyn ExecObserver) -> Result<RunOutcome, InterpError> {
        let diags = validate_context(&self.ctx);
        let strict = matches!(self.mode, ScenarioMode::Concrete);
        let fatal: Vec<_> = diags
            .iter()
            .filter(|d| {
                d.kind != DiagnosticKind::UnresolvedCallTarget || strict
            })
            .collect();
        if !fatal.is_empty() {
            let msgs: Vec<String> = fatal.iter().map(|d| d.to_string()).collect();
            return Err(InterpError::ValidationFailed(msgs.join("; ")));
        }

        let mut store = self.store.clone();
        let mut traces = Vec::with_capacity(self.calls.len());
        let mut aborted = 0usize;
        for call in &self.calls {
            let top = TopCall {
                target: call.target,
                selector: call.selector,
                arg: call.arg,
            };
            let (next_store, trace) = match &self.mode {
                ScenarioMode::Concrete => run_complete_execution(
                    &self.ctx,
                    store,
                    &top,
                    &mut CallMode::Concrete,
                    self.step_budget,
                    observer,
                )?,
                ScenarioMode::Modular { havoc_domain } => {
                    let mut site = 0usize;
                    let domain = havoc_domain.clone();
                    let mut next = move || {
                        let v = domain[site % domain.len()];
                        site += 1;
                        v
                    };
                    run_complete_execution(
                        &self.ctx,
                        store,
                        &top,
                        &mut CallMode::Modular(&mut next),
                        self.step_budget,
                        observer,
                    )?
                }
            };
            if trace.aborted() {
                aborted += 1;
            }
            store = next_store;
            traces.push(trace);
        }
        Ok(RunOutcome {
            final_store: store,
            traces,
            aborted,
        })
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ArgValue {
    Number(i64),
    Name(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CallJson {
    target: String,
    #[serde(default)]
    method: Option<String>,
    arg: ArgValue,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ScenarioJson {
    #[serde(default = "default_version")]
    format_version: u32,
    contracts: Vec<String>,
    #[serde(default)]
    store: Value,
    #[serde(default)]
    calls: Vec<CallJson>,
    #[serde(default = "default_mode")]
    mode: String,
    #[serde(default)]
    havoc_domain: Vec<i64>,
    #[serde(default)]
    step_budget: Option<u64>,
}

fn default_version() -> u32 {
    1
}
fn default_mode() -> String {
    "concrete".to_string()
}

/// Loads a scenario; contract paths are taken relative to the scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    load_scenario_str(&text, base)
}

pub fn load_scenario_str(text: &str, base: &Path) -> Result<Scenario, String> {
    let json: ScenarioJson = serde_json::from_str(text).map_err(|e| format!("scenario: {e}"))?;
    let mut contracts = Vec::new();
    for rel in &json.contracts {
        let p = base.join(rel);
        let src =
            std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
        contracts.push(parse_contract(&src).map_err(|e| format!("{}: {e}", p.display()))?);
    }
    let ctx = CodeContext::from_contracts(contracts);

    let store = if json.store.is_null() {
        Store::new()
    } else {
        Store::from_json(&json.store, &ctx)?
    };

    let mut calls = Vec::new();
    for c in &json.calls {
        let target = ctx
            .id_of(&ObjectName(c.target.clone()))
            .ok_or_else(|| format!("call targets unknown contract `{}`", c.target))?;
        let contract = ctx.get(target).expect("id in range");
        let selector = contract
            .resolve_method(c.method.as_deref())
            .ok_or_else(|| match &c.method {
                Some(m) => format!("`{}` has no method `{m}`", c.target),
                None => format!("`{}` declares named methods; the call must pick one", c.target),
            })?;
        let arg = match &c.arg {
            ArgValue::Number(n) => *n,
            ArgValue::Name(name) => ctx
                .id_of(&ObjectName(name.clone()))
                .map(|id| id.as_value())
                .ok_or_else(|| format!("call argument names unknown contract `{name}`"))?,
        };
        calls.push(ResolvedCall {
            target,
            selector,
            arg,
        });
    }

    let mode = match json.mode.as_str() {
        "concrete" => ScenarioMode::Concrete,
        "modular" => {
            if json.havoc_domain.is_empty() {
                return Err("modular mode requires a non-empty havocDomain".to_string());
            }
            ScenarioMode::Modular {
                havoc_domain: json.havoc_domain.clone(),
            }
        }
        other => return Err(format!("unknown mode `{other}`")),
    };

    Ok(Scenario {
        ctx,
        store,
        calls,
        mode,
        step_budget: json.step_budget.unwrap_or(DEFAULT_STEP_BUDGET),
    })
}
