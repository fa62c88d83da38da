//! Small-step operational semantics with trace recording.
//!
//! A state is a stack of frames plus a store. Calls push a frame whose
//! environment binds `arg`, rewrite the caller's continuation to `x := res`,
//! and emit an Enter event; returns pop the frame, transfer `ret` to the
//! caller's `res`, and emit a Return event. Once invoked, execution is
//! deterministic.
//!
//! The modular mode replaces a call with a havoc: `res` receives a
//! driver-chosen value, no frame is pushed, and the store is untouched.

mod mgc;
mod scenario;
pub mod store;
pub mod trace;

pub use mgc::{redirect_static_calls_to, run_mgc, synthesize_stub_context, MgcCall};
pub use scenario::{
    load_scenario, load_scenario_str, ResolvedCall, RunOutcome, Scenario, ScenarioMode,
};
pub use store::{FieldVal, ObjectState, Store};
pub use trace::{
    events_conflict, project_trace, trace_from_json, trace_to_json, Access, Event, EventKind,
    ExecSpan, Rw, Trace,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lang::print::{print_expr, print_prim};
use crate::lang::{
    BinOp, CallTarget, Cmd, CodeContext, Contract, Expr, LocalName, ObjectId, ObjectName, PrimCmd,
};

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InterpError {
    #[error("step budget of {0} exceeded")]
    BudgetExceeded(u64),
    #[error("call target value {0} is not an object id")]
    UnknownObject(i64),
    #[error("`{contract}` has no method `{method}`")]
    UnknownMethod { contract: ObjectName, method: String },
    #[error("`{contract}` declares named methods; the call site must pick one")]
    AmbiguousMethod { contract: ObjectName },
    #[error("undeclared local `{local}` in `{contract}`")]
    UndeclaredLocal { contract: ObjectName, local: LocalName },
    #[error("`{contract}` accessed undeclared field `{field}`")]
    EncapsulationFault { contract: ObjectName, field: String },
    #[error("step on a quiescent state")]
    Quiescent,
    #[error("havoc on a non-call command")]
    HavocPrecondition,
    #[error("context validation failed: {0}")]
    ValidationFailed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub object: ObjectId,
    /// Pending commands, top of stack last. Compound commands are expanded
    /// lazily; a frame whose worklist empties behaves as an implicit Return.
    pub work: Vec<Cmd>,
    pub env: BTreeMap<LocalName, i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecState {
    pub stack: Vec<Frame>,
    pub store: Store,
}

impl ExecState {
    pub fn quiescent(store: Store) -> Self {
        ExecState {
            stack: Vec::new(),
            store,
        }
    }

    pub fn depth(&self) -> u32 {
        self.stack.len() as u32
    }

    pub fn is_quiescent(&self) -> bool {
        self.stack.is_empty()
    }
}

/// Receives every recorded event as it happens; the monitor hooks in here.
pub trait ExecObserver {
    fn on_event(&mut self, ev: &Event);
    /// Called once per complete execution after the final event.
    fn on_execution_end(&mut self, _aborted: bool) {}
}

/// No-op observer for bare runs.
pub struct NoObserver;

impl ExecObserver for NoObserver {
    fn on_event(&mut self, _ev: &Event) {}
}

/// What a single step did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Event(Event),
    /// An assert evaluated to false; the event for the assert is included.
    AssertFailed(Event),
}

fn eval_expr(
    contract: &Contract,
    env: &BTreeMap<LocalName, i64>,
    expr: &Expr,
) -> Result<i64, InterpError> {
    Ok(match expr {
        Expr::Int(n) => *n,
        Expr::Local(l) => {
            if !contract.has_local(l) {
                return Err(InterpError::UndeclaredLocal {
                    contract: contract.name.clone(),
                    local: l.clone(),
                });
            }
            env.get(l).copied().unwrap_or(0)
        }
        Expr::Binary(op, a, b) => {
            let x = eval_expr(contract, env, a)?;
            let y = eval_expr(contract, env, b)?;
            match op {
                BinOp::Add => x.wrapping_add(y),
                BinOp::Sub => x.wrapping_sub(y),
                BinOp::Mul => x.wrapping_mul(y),
                BinOp::Eq => (x == y) as i64,
                BinOp::Ne => (x != y) as i64,
                BinOp::Lt => (x < y) as i64,
                BinOp::Le => (x <= y) as i64,
                BinOp::And => (x != 0 && y != 0) as i64,
                BinOp::Or => (x != 0 || y != 0) as i64,
            }
        }
        Expr::Not(a) => (eval_expr(contract, env, a)? == 0) as i64,
    })
}

/// Pops compound structure until the next primitive command is exposed.
/// Loop and branch conditions read locals only, so this emits no event.
fn next_prim(frame: &mut Frame, contract: &Contract) -> Result<PrimCmd, InterpError> {
    loop {
        let Some(cmd) = frame.work.pop() else {
            return Ok(PrimCmd::Return);
        };
        match cmd {
            Cmd::Prim(p) => return Ok(p),
            Cmd::Seq(a, b) => {
                frame.work.push(*b);
                frame.work.push(*a);
            }
            Cmd::If(cond, then_cmd, else_cmd) => {
                if eval_expr(contract, &frame.env, &cond)? != 0 {
                    frame.work.push(*then_cmd);
                } else {
                    frame.work.push(*else_cmd);
                }
            }
            Cmd::While(cond, body) => {
                if eval_expr(contract, &frame.env, &cond)? != 0 {
                    frame.work.push(Cmd::While(cond, body.clone()));
                    frame.work.push(*body);
                }
            }
        }
    }
}

/// True when the next primitive the top frame will execute is a call.
/// Compound wrappers are unfolded without being consumed.
pub fn at_call_site(state: &ExecState, ctx: &CodeContext) -> Option<PrimCmd> {
    let frame = state.stack.last()?;
    let contract = ctx.get(frame.object)?;
    let mut probe = frame.clone();
    match next_prim(&mut probe, contract) {
        Ok(p @ PrimCmd::Call { .. }) => Some(p),
        _ => None,
    }
}

/// Pushes the initial frame for a top-level call from a quiescent state and
/// returns the Enter event.
pub fn enter_toplevel(
    state: &mut ExecState,
    ctx: &CodeContext,
    target: ObjectId,
    selector: u32,
    arg: i64,
    next_index: u32,
) -> Event {
    let contract = ctx.get(target).expect("resolved target");
    let mut env = BTreeMap::new();
    env.insert("arg".into(), arg);
    env.insert("this".into(), target.as_value());
    env.insert("selector".into(), selector as i64);
    state.stack.push(Frame {
        object: target,
        work: vec![contract.body.clone()],
        env,
    });
    Event {
        index: next_index,
        object: target,
        kind: EventKind::Enter,
        text: "enter".to_string(),
        access: None,
        depth_after: state.depth(),
        value: Some(arg),
        selector: Some(selector),
    }
}

/// Executes one primitive command of the active frame.
pub fn step(
    state: &mut ExecState,
    ctx: &CodeContext,
    next_index: u32,
) -> Result<StepOutcome, InterpError> {
    let depth = state.depth();
    if depth == 0 {
        return Err(InterpError::Quiescent);
    }
    let frame = state.stack.last_mut().expect("active state");
    let object = frame.object;
    let contract = ctx.get(object).expect("frame object in context");
    let prim = next_prim(frame, contract)?;

    let mut event = Event {
        index: next_index,
        object,
        kind: EventKind::Skip,
        text: String::new(),
        access: None,
        depth_after: depth,
        value: None,
        selector: None,
    };

    match prim {
        PrimCmd::AssignLocal { dst, expr } => {
            let v = eval_expr(contract, &frame.env, &expr)?;
            event.kind = EventKind::Assign;
            event.text = print_prim(&PrimCmd::AssignLocal {
                dst: dst.clone(),
                expr,
            });
            frame.env.insert(dst, v);
        }
        PrimCmd::ReadField { dst, field, key } => {
            if contract.field(&field).is_none() {
                return Err(InterpError::EncapsulationFault {
                    contract: contract.name.clone(),
                    field: field.0,
                });
            }
            let k = match &key {
                Some(e) => Some(eval_expr(contract, &frame.env, e)?),
                None => None,
            };
            let v = state.store.read(object, &field, k);
            event.kind = EventKind::Read;
            event.text = print_prim(&PrimCmd::ReadField {
                dst: dst.clone(),
                field: field.clone(),
                key,
            });
            event.access = Some(Access {
                field,
                key: k,
                rw: Rw::Read,
            });
            frame.env.insert(dst, v);
        }
        PrimCmd::WriteField { field, key, src } => {
            if contract.field(&field).is_none() {
                return Err(InterpError::EncapsulationFault {
                    contract: contract.name.clone(),
                    field: field.0,
                });
            }
            if !contract.has_local(&src) {
                return Err(InterpError::UndeclaredLocal {
                    contract: contract.name.clone(),
                    local: src,
                });
            }
            let k = match &key {
                Some(e) => Some(eval_expr(contract, &frame.env, e)?),
                None => None,
            };
            let v = frame.env.get(&src).copied().unwrap_or(0);
            event.kind = EventKind::Write;
            event.text = print_prim(&PrimCmd::WriteField {
                field: field.clone(),
                key,
                src,
            });
            event.access = Some(Access {
                field,
                key: k,
                rw: Rw::Write,
            });
            state.store.write(object, &event.access.as_ref().unwrap().field, k, v);
        }
        PrimCmd::Assert(expr) => {
            let v = eval_expr(contract, &frame.env, &expr)?;
            event.kind = EventKind::Assert;
            event.text = format!("assert {};", print_expr(&expr));
            if v == 0 {
                return Ok(StepOutcome::AssertFailed(event));
            }
        }
        PrimCmd::Skip => {
            event.kind = EventKind::Skip;
            event.text = "skip;".to_string();
        }
        PrimCmd::Return => {
            let popped = state.stack.pop().expect("active state");
            let ret = popped.env.get(&LocalName::from("ret")).copied().unwrap_or(0);
            if let Some(caller) = state.stack.last_mut() {
                caller.env.insert("res".into(), ret);
            }
            event.kind = EventKind::Return;
            event.text = "return".to_string();
            event.depth_after = state.depth();
            event.value = Some(ret);
        }
        PrimCmd::Call {
            dst,
            target,
            method,
            arg,
        } => {
            let arg_v = eval_expr(contract, &frame.env, &arg)?;
            let callee_id = match &target {
                CallTarget::Contract(name) => ctx
                    .id_of(name)
                    .ok_or_else(|| InterpError::UnknownObject(-1))?,
                CallTarget::Local(l) => {
                    if !contract.has_local(l) {
                        return Err(InterpError::UndeclaredLocal {
                            contract: contract.name.clone(),
                            local: l.clone(),
                        });
                    }
                    let v = frame.env.get(l).copied().unwrap_or(0);
                    if v < 0 || v >= ctx.len() as i64 {
                        return Err(InterpError::UnknownObject(v));
                    }
                    ObjectId(v as u32)
                }
            };
            let callee = ctx.get(callee_id).expect("id in range");
            let selector = callee.resolve_method(method.as_deref()).ok_or_else(|| {
                match &method {
                    Some(m) => InterpError::UnknownMethod {
                        contract: callee.name.clone(),
                        method: m.clone(),
                    },
                    None => InterpError::AmbiguousMethod {
                        contract: callee.name.clone(),
                    },
                }
            })?;
            // The caller resumes with `x := res` once the callee returns.
            frame.work.push(Cmd::Prim(PrimCmd::AssignLocal {
                dst,
                expr: Expr::local("res"),
            }));
            let mut env = BTreeMap::new();
            env.insert("arg".into(), arg_v);
            env.insert("this".into(), callee_id.as_value());
            env.insert("selector".into(), selector as i64);
            state.stack.push(Frame {
                object: callee_id,
                work: vec![callee.body.clone()],
                env,
            });
            event.object = callee_id;
            event.kind = EventKind::Enter;
            event.text = "enter".to_string();
            event.depth_after = state.depth();
            event.value = Some(arg_v);
            event.selector = Some(selector);
        }
        PrimCmd::Enter => unreachable!("Enter never appears in parsed bodies"),
    }
    Ok(StepOutcome::Event(event))
}

/// Replaces the pending call of the top frame with a completed havoc:
/// `res` is bound to `value` and the caller's `x := res` runs next. No frame
/// is pushed and the store is unchanged; the (silent) havoc transition is
/// not part of the recorded trace.
pub fn havoc_step(state: &mut ExecState, ctx: &CodeContext, value: i64) -> Result<(), InterpError> {
    let frame = state.stack.last_mut().ok_or(InterpError::Quiescent)?;
    let contract = ctx.get(frame.object).expect("frame object in context");
    let prim = next_prim(frame, contract)?;
    match prim {
        PrimCmd::Call { dst, .. } => {
            frame.env.insert("res".into(), value);
            frame.work.push(Cmd::Prim(PrimCmd::AssignLocal {
                dst,
                expr: Expr::local("res"),
            }));
            Ok(())
        }
        other => {
            // Put the command back; the state is unchanged on error.
            frame.work.push(Cmd::Prim(other));
            Err(InterpError::HavocPrecondition)
        }
    }
}

/// How call commands are executed.
pub enum CallMode<'a> {
    /// Calls push frames and run callee code from the context.
    Concrete,
    /// Calls are havocked; the driver supplies each return value.
    Modular(&'a mut dyn FnMut() -> i64),
}

pub struct TopCall {
    pub target: ObjectId,
    pub selector: u32,
    pub arg: i64,
}

/// Runs one complete execution: quiescent to quiescent.
///
/// A failed assert reverts the store to the starting snapshot and yields a
/// trace marked aborted; exceeding the step budget is an error.
pub fn run_complete_execution(
    ctx: &CodeContext,
    store: Store,
    call: &TopCall,
    mode: &mut CallMode<'_>,
    budget: u64,
    observer: &mut dyn ExecObserver,
) -> Result<(Store, Trace), InterpError> {
    let initial_store = store.clone();
    let mut state = ExecState::quiescent(store);
    let mut events: Vec<Event> = Vec::new();

    let ev = enter_toplevel(&mut state, ctx, call.target, call.selector, call.arg, 1);
    observer.on_event(&ev);
    events.push(ev);

    let mut steps: u64 = 1;
    let mut aborted = false;
    while !state.is_quiescent() {
        if steps >= budget {
            return Err(InterpError::BudgetExceeded(budget));
        }
        steps += 1;
        if let CallMode::Modular(havoc) = mode {
            if at_call_site(&state, ctx).is_some() {
                let v = havoc();
                havoc_step(&mut state, ctx, v)?;
                continue;
            }
        }
        let next_index = (events.len() + 1) as u32;
        match step(&mut state, ctx, next_index)? {
            StepOutcome::Event(ev) => {
                observer.on_event(&ev);
                events.push(ev);
            }
            StepOutcome::AssertFailed(ev) => {
                observer.on_event(&ev);
                events.push(ev);
                aborted = true;
                break;
            }
        }
    }

    observer.on_execution_end(aborted);
    let final_store = if aborted {
        initial_store.clone()
    } else {
        state.store
    };
    let names: Vec<ObjectName> = (0..ctx.len())
        .map(|i| ctx.name_of(ObjectId(i as u32)).expect("dense ids").clone())
        .collect();
    let span = ExecSpan {
        start: 0,
        end: events.len(),
        aborted,
    };
    Ok((
        final_store.clone(),
        Trace {
            events,
            initial_store,
            final_store,
            spans: vec![span],
            names,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_contract;

    fn ctx_of(srcs: &[&str]) -> CodeContext {
        CodeContext::from_contracts(srcs.iter().map(|s| parse_contract(s).unwrap()).collect())
    }

    #[test]
    fn assign_step_updates_env() {
        let ctx = ctx_of(&["contract o { enter { var x; x := 5; return; } }"]);
        let mut state = ExecState::quiescent(Store::new());
        enter_toplevel(&mut state, &ctx, ObjectId(0), 0, 0, 1);
        let out = step(&mut state, &ctx, 2).unwrap();
        match out {
            StepOutcome::Event(ev) => {
                assert_eq!(ev.kind, EventKind::Assign);
                assert_eq!(ev.object, ObjectId(0));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            state.stack[0].env.get(&LocalName::from("x")),
            Some(&5i64)
        );
    }

    #[test]
    fn call_pushes_frame_with_arg_bound() {
        let ctx = ctx_of(&[
            "contract a { enter { var x; x := call b(7); return; } }",
            "contract b { enter { var y; y := arg; ret := y; return; } }",
        ]);
        let mut state = ExecState::quiescent(Store::new());
        enter_toplevel(&mut state, &ctx, ObjectId(0), 0, 0, 1);
        let out = step(&mut state, &ctx, 2).unwrap();
        let StepOutcome::Event(ev) = out else {
            panic!()
        };
        assert_eq!(ev.kind, EventKind::Enter);
        assert_eq!(ev.object, ObjectId(1));
        assert_eq!(ev.value, Some(7));
        assert_eq!(state.depth(), 2);
        assert_eq!(
            state.stack[1].env.get(&LocalName::from("arg")),
            Some(&7i64)
        );
    }

    #[test]
    fn return_transfers_ret_to_res() {
        let ctx = ctx_of(&[
            "contract a { enter { var x; x := call b(7); ret := x; return; } }",
            "contract b { enter { ret := 3; return; } }",
        ]);
        let call = TopCall {
            target: ObjectId(0),
            selector: 0,
            arg: 0,
        };
        let (_, trace) = run_complete_execution(
            &ctx,
            Store::new(),
            &call,
            &mut CallMode::Concrete,
            1000,
            &mut NoObserver,
        )
        .unwrap();
        // The callee's return carries ret=3; the caller then runs `x := res`.
        let ret_ev = trace
            .events
            .iter()
            .find(|e| e.kind == EventKind::Return && e.object == ObjectId(1))
            .unwrap();
        assert_eq!(ret_ev.value, Some(3));
        let final_ret = trace
            .events
            .iter()
            .rfind(|e| e.kind == EventKind::Return)
            .unwrap();
        assert_eq!(final_ret.value, Some(3));
    }

    #[test]
    fn skip_body_is_identity_on_store() {
        let ctx = ctx_of(&["contract o { field f; enter { skip; return; } }"]);
        let mut store = Store::new();
        store.write(ObjectId(0), &"f".into(), None, 42);
        let call = TopCall {
            target: ObjectId(0),
            selector: 0,
            arg: 0,
        };
        let (out, trace) = run_complete_execution(
            &ctx,
            store.clone(),
            &call,
            &mut CallMode::Concrete,
            1000,
            &mut NoObserver,
        )
        .unwrap();
        assert_eq!(out, store);
        assert!(!trace.aborted());
    }

    #[test]
    fn budget_exceeded_on_loop() {
        let ctx = ctx_of(&["contract o { enter { while 1 { skip; } } }"]);
        let call = TopCall {
            target: ObjectId(0),
            selector: 0,
            arg: 0,
        };
        let err = run_complete_execution(
            &ctx,
            Store::new(),
            &call,
            &mut CallMode::Concrete,
            500,
            &mut NoObserver,
        )
        .unwrap_err();
        assert_eq!(err, InterpError::BudgetExceeded(500));
    }

    #[test]
    fn assert_failure_reverts_store() {
        let ctx = ctx_of(&[
            "contract o { field f; enter { var x; x := 1; f := x; assert 0; return; } }",
        ]);
        let call = TopCall {
            target: ObjectId(0),
            selector: 0,
            arg: 0,
        };
        let (out, trace) = run_complete_execution(
            &ctx,
            Store::new(),
            &call,
            &mut CallMode::Concrete,
            1000,
            &mut NoObserver,
        )
        .unwrap();
        assert!(trace.aborted());
        assert_eq!(out.read(ObjectId(0), &"f".into(), None), 0);
    }

    #[test]
    fn havoc_step_completes_call_in_place() {
        let ctx = ctx_of(&[
            "contract o { field f; enter { var x; x := call ext(7); f := x; return; } }",
            "contract ext { enter { ret := 99; return; } }",
        ]);
        let mut state = ExecState::quiescent(Store::new());
        enter_toplevel(&mut state, &ctx, ObjectId(0), 0, 0, 1);
        havoc_step(&mut state, &ctx, 0).unwrap();
        assert_eq!(state.depth(), 1);
        // Two havocs with different values differ only in the local.
        let mut s2 = ExecState::quiescent(Store::new());
        enter_toplevel(&mut s2, &ctx, ObjectId(0), 0, 0, 1);
        havoc_step(&mut s2, &ctx, 5).unwrap();
        assert_eq!(state.store, s2.store);
        assert_eq!(state.depth(), s2.depth());
    }

    #[test]
    fn havoc_on_non_call_is_an_error() {
        let ctx = ctx_of(&["contract o { enter { skip; return; } }"]);
        let mut state = ExecState::quiescent(Store::new());
        enter_toplevel(&mut state, &ctx, ObjectId(0), 0, 0, 1);
        assert_eq!(
            havoc_step(&mut state, &ctx, 0),
            Err(InterpError::HavocPrecondition)
        );
    }
}
