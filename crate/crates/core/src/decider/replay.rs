//! Concrete replay of decider counterexamples: synthesizes an environment
//! contract that performs exactly the counterexample's callbacks and return
//! values, runs the window as a real execution, and hands it to the monitor.

use std::fmt::Write as _;

use crate::interp::{
    run_complete_execution, CallMode, Store, TopCall, Trace,
};
use crate::lang::{parse_contract, CallTarget, Cmd, CodeContext, PrimCmd};
use crate::monitor::Monitor;

use super::compile::CompiledObject;
use super::explore::{valuation_to_store, CexAction, Counterexample, FiniteSystem};
use super::machine::MEvent;
use super::{DeciderError, FiniteObjectSpec};

/// One activation of the synthesized environment: the callbacks it performs
/// and the value it returns.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Activation {
    calls: Vec<(i64, u32)>,
    ret: Option<i64>,
}

/// Folds the counterexample's choice sequence into environment activations
/// in entry order.
fn activations(cex: &Counterexample, default_ret: i64) -> Vec<Activation> {
    let mut acts: Vec<Activation> = Vec::new();
    let mut open_base: Option<usize> = None;
    let mut depth = 1u32;
    for action in &cex.actions {
        match (depth, action) {
            (1, CexAction::Havoc(v)) => match open_base.take() {
                Some(i) => acts[i].ret = Some(*v),
                None => acts.push(Activation {
                    calls: vec![],
                    ret: Some(*v),
                }),
            },
            (1, CexAction::EnterCallback(arg, sel)) => {
                match open_base {
                    Some(i) => acts[i].calls.push((*arg, *sel)),
                    None => {
                        acts.push(Activation {
                            calls: vec![(*arg, *sel)],
                            ret: None,
                        });
                        open_base = Some(acts.len() - 1);
                    }
                }
                depth = 2;
            }
            (2, CexAction::Havoc(v)) => acts.push(Activation {
                calls: vec![],
                ret: Some(*v),
            }),
            (2, CexAction::Return) => depth = 1,
            (1, CexAction::Return) => {}
            _ => {}
        }
    }
    for a in &mut acts {
        if a.ret.is_none() {
            a.ret = Some(default_ret);
        }
    }
    acts
}

fn env_source(
    object: &str,
    object_methods: &[Option<String>],
    acts: &[Activation],
    default_ret: i64,
) -> String {
    let mut src = String::new();
    let _ = writeln!(src, "contract env {{");
    let _ = writeln!(src, "  field env_calls;");
    let _ = writeln!(src, "  enter {{");
    let _ = writeln!(src, "    var i, n, v, z, a;");
    let _ = writeln!(src, "    i := env_calls;");
    let _ = writeln!(src, "    n := i + 1;");
    let _ = writeln!(src, "    env_calls := n;");
    let _ = writeln!(src, "    v := {default_ret};");
    for (idx, act) in acts.iter().enumerate() {
        let _ = writeln!(src, "    if i == {idx} {{");
        for (arg, sel) in &act.calls {
            let _ = writeln!(src, "      a := {arg};");
            match object_methods.get(*sel as usize).and_then(|m| m.clone()) {
                Some(name) => {
                    let _ = writeln!(src, "      z := call {object}.{name}(a);");
                }
                None => {
                    let _ = writeln!(src, "      z := call {object}(a);");
                }
            }
        }
        let _ = writeln!(src, "      v := {};", act.ret.unwrap_or(default_ret));
        let _ = writeln!(src, "    }}");
    }
    let _ = writeln!(src, "    ret := v;");
    let _ = writeln!(src, "    return;");
    let _ = writeln!(src, "  }}");
    let _ = writeln!(src, "}}");
    src
}

fn has_dynamic_calls(cmd: &Cmd) -> bool {
    match cmd {
        Cmd::Prim(PrimCmd::Call {
            target: CallTarget::Local(_),
            ..
        }) => true,
        Cmd::Prim(_) => false,
        Cmd::Seq(a, b) | Cmd::If(_, a, b) => has_dynamic_calls(a) || has_dynamic_calls(b),
        Cmd::While(_, a) => has_dynamic_calls(a),
    }
}

pub enum ReplayResult {
    Replayed {
        ctx: CodeContext,
        initial_store: Store,
        trace: Trace,
        /// The monitor run over the replayed execution.
        monitor: Monitor,
    },
    /// Windows rooted mid-invocation or objects with dynamic call targets
    /// are decided but not replayed.
    NotReplayable(String),
}

/// Replays the counterexample concretely and monitors it.
pub fn replay_counterexample(
    spec: &FiniteObjectSpec,
    sys: &FiniteSystem,
    cex: &Counterexample,
) -> Result<ReplayResult, DeciderError> {
    if cex.from_call_state {
        return Ok(ReplayResult::NotReplayable(
            "window starts mid-invocation".to_string(),
        ));
    }
    if has_dynamic_calls(&spec.contract.body) {
        return Ok(ReplayResult::NotReplayable(
            "object uses dynamic call targets".to_string(),
        ));
    }
    let default_ret = sys.havoc_domain.first().copied().unwrap_or(0);
    let acts = activations(cex, default_ret);
    let method_names: Vec<Option<String>> =
        spec.contract.methods.iter().map(|m| m.name.clone()).collect();
    let env_src = env_source(&spec.contract.name.0, &method_names, &acts, default_ret);
    let env = parse_contract(&env_src).expect("generated env contract parses");

    let redirected =
        crate::interp::redirect_static_calls_to(&spec.contract, "env");
    let mut ctx = CodeContext::new();
    let o = ctx.register(redirected);
    ctx.register(env);

    let initial_store = valuation_to_store(&sys.compiled, o, &cex.initial_valuation);
    let top = TopCall {
        target: o,
        selector: cex.base_selector,
        arg: cex.base_arg,
    };
    let mut monitor = Monitor::new(&ctx);
    let (_, trace) = run_complete_execution(
        &ctx,
        initial_store.clone(),
        &top,
        &mut CallMode::Concrete,
        1_000_000,
        &mut monitor,
    )
    .map_err(|e| DeciderError::Spec(format!("replay failed: {e}")))?;
    Ok(ReplayResult::Replayed {
        ctx,
        initial_store,
        trace,
        monitor,
    })
}

/// Re-simulates the counterexample window into the acceptor's event
/// alphabet, for cross-checks against the trace-level oracles.
pub fn counterexample_to_events(
    compiled: &CompiledObject,
    cex: &Counterexample,
) -> Vec<MEvent> {
    use super::compile::{eval_cexpr, Op};
    let mut events = vec![MEvent::Enter];
    let mut store = cex.initial_valuation.to_vec();
    let mut frames: Vec<(usize, Vec<i64>)> = Vec::new();
    let mut locals = vec![0i64; compiled.locals.len()];
    if let Some(i) = compiled.local_index("arg") {
        locals[i] = cex.base_arg;
    }
    if let Some(i) = compiled.local_index("selector") {
        locals[i] = cex.base_selector as i64;
    }
    frames.push((0, locals));

    for action in &cex.actions {
        let Some((pc, locals)) = frames.last_mut() else {
            break;
        };
        let op = compiled.ops[*pc].clone();
        match (op, action) {
            (Op::Assign { dst, expr }, CexAction::Step) => {
                locals[dst] = eval_cexpr(&expr, locals);
                *pc += 1;
            }
            (Op::Jump(t), CexAction::Step) => *pc = t,
            (Op::BranchIfZero { cond, target }, CexAction::Step) => {
                *pc = if eval_cexpr(&cond, locals) == 0 {
                    target
                } else {
                    *pc + 1
                };
            }
            (Op::Assert { .. }, CexAction::Step) => *pc += 1,
            (Op::Read { dst, field, key }, CexAction::Step) => {
                let k = key.as_ref().map(|e| eval_cexpr(e, locals));
                if let Some(loc) = compiled.location_of(field, k) {
                    locals[dst] = store[loc];
                    events.push(MEvent::Read(loc));
                }
                *pc += 1;
            }
            (Op::Write { field, key, src }, CexAction::Step) => {
                let k = key.as_ref().map(|e| eval_cexpr(e, locals));
                let v = locals[src];
                if let Some(loc) = compiled.location_of(field, k) {
                    store[loc] = v;
                    events.push(MEvent::Write(loc));
                }
                *pc += 1;
            }
            (Op::Call { dst, .. }, CexAction::Havoc(v)) => {
                locals[dst] = *v;
                *pc += 1;
            }
            (Op::Call { .. }, CexAction::EnterCallback(arg, sel)) => {
                events.push(MEvent::Enter);
                let mut fresh = vec![0i64; compiled.locals.len()];
                if let Some(i) = compiled.local_index("arg") {
                    fresh[i] = *arg;
                }
                if let Some(i) = compiled.local_index("selector") {
                    fresh[i] = *sel as i64;
                }
                frames.push((0, fresh));
            }
            (Op::Return, CexAction::Return) => {
                events.push(MEvent::Return);
                frames.pop();
            }
            (op, action) => {
                debug_assert!(false, "desynchronized replay: {op:?} vs {action:?}");
                break;
            }
        }
    }
    events
}
