//! Static conflict-SECF decision for finite-state objects.
//!
//! The object is closed under an adversarial environment: every external
//! call site expands into a nondeterministic sequence of callbacks with
//! arbitrary arguments followed by a nondeterministic return value. Stack
//! depth is limited to two, which is exact for conflict-ECF: any violation
//! at greater depth already shows up in a two-level window. Windows start
//! from every field valuation over the declared domains, and additionally
//! from every reachable configuration whose next command is a call, so that
//! a callback window can open mid-invocation.
//!
//! Exploration runs the product of that bounded system with the depth-2
//! acceptor; the object is conflict-SECF over the declared domains exactly
//! when no rejecting state is reachable.

mod compile;
pub mod machine;
mod explore;
mod replay;

pub use compile::{compile_object, CompiledObject};
pub use explore::{
    build_a_o, decide_secf_c, reachable_call_states, secf_fs_probe, AutomatonVariant, CallState,
    Counterexample, DeciderReport, FiniteSystem, SecfVerdict,
};
pub use machine::{run_m, MEvent, MState, MStep};
pub use replay::{counterexample_to_events, replay_counterexample, ReplayResult};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{parse_contract, Contract, FieldName};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DeciderError {
    #[error("decider spec: {0}")]
    Spec(String),
    #[error("configuration cap of {0} exceeded; verdict unknown")]
    Bound(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldDomain {
    Scalar(Vec<i64>),
    Map {
        #[serde(rename = "keyDomain")]
        key_domain: Vec<i64>,
        #[serde(rename = "valueDomain")]
        value_domain: Vec<i64>,
    },
}

#[derive(Debug, Clone)]
pub struct FiniteObjectSpec {
    pub contract: Contract,
    pub field_domains: BTreeMap<FieldName, FieldDomain>,
    pub arg_domain: Vec<i64>,
    pub havoc_domain: Vec<i64>,
    pub cap: usize,
}

pub const DEFAULT_CONFIG_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpecJson {
    contract: String,
    #[serde(rename = "fieldDomains")]
    field_domains: BTreeMap<String, FieldDomain>,
    #[serde(rename = "argDomain")]
    arg_domain: Vec<i64>,
    #[serde(rename = "havocDomain")]
    havoc_domain: Vec<i64>,
    #[serde(default)]
    cap: Option<usize>,
}

/// Loads a decider spec file; the contract path is relative to it.
pub fn load_spec(path: &Path) -> Result<FiniteObjectSpec, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let json: SpecJson = serde_json::from_str(&text).map_err(|e| format!("decider spec: {e}"))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let src_path = base.join(&json.contract);
    let src = std::fs::read_to_string(&src_path)
        .map_err(|e| format!("{}: {e}", src_path.display()))?;
    let contract =
        parse_contract(&src).map_err(|e| format!("{}: {e}", src_path.display()))?;
    if json.arg_domain.is_empty() || json.havoc_domain.is_empty() {
        return Err("argDomain and havocDomain must be non-empty".to_string());
    }
    Ok(FiniteObjectSpec {
        contract,
        field_domains: json
            .field_domains
            .into_iter()
            .map(|(k, v)| (FieldName(k), v))
            .collect(),
        arg_domain: json.arg_domain,
        havoc_domain: json.havoc_domain,
        cap: json.cap.unwrap_or(DEFAULT_CONFIG_CAP),
    })
}
