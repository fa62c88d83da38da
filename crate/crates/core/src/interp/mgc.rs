//! The most general client: repeatedly invokes the call-free transform of a
//! single object. Every call site inside the object havocs instead of
//! descending, so the produced run is callback-free by construction and only
//! the object's own store changes.

use std::fmt::Write as _;

use crate::lang::{parse_contract, CodeContext, Contract, ObjectId};

use super::store::Store;
use super::trace::Trace;
use super::{run_complete_execution, CallMode, InterpError, NoObserver, TopCall};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MgcCall {
    pub method: Option<String>,
    pub arg: i64,
    /// Values consumed at call sites in execution order; exhausted lists
    /// continue with zero.
    pub havoc_values: Vec<i64>,
}

/// Runs the schedule against `NoCB(o)` and returns the final store and the
/// concatenated run trace.
pub fn run_mgc(
    o: ObjectId,
    ctx: &CodeContext,
    store: Store,
    schedule: &[MgcCall],
    budget: u64,
) -> Result<(Store, Trace), InterpError> {
    let contract = ctx.get(o).expect("object in context");
    let mut cur = store.clone();
    let mut traces = Vec::with_capacity(schedule.len());
    for call in schedule {
        let selector = contract.resolve_method(call.method.as_deref()).ok_or(
            match &call.method {
                Some(m) => InterpError::UnknownMethod {
                    contract: contract.name.clone(),
                    method: m.clone(),
                },
                None => InterpError::AmbiguousMethod {
                    contract: contract.name.clone(),
                },
            },
        )?;
        let top = TopCall {
            target: o,
            selector,
            arg: call.arg,
        };
        let mut site = 0usize;
        let values = call.havoc_values.clone();
        let mut next = move || {
            let v = values.get(site).copied().unwrap_or(0);
            site += 1;
            v
        };
        let (next_store, trace) = run_complete_execution(
            ctx,
            cur,
            &top,
            &mut CallMode::Modular(&mut next),
            budget,
            &mut NoObserver,
        )?;
        cur = next_store;
        traces.push(trace);
    }
    match Trace::concat(&traces) {
        Some(t) => Ok((cur, t)),
        None => {
            // Empty schedule: identity on the store, empty trace.
            let names = (0..ctx.len())
                .map(|i| ctx.name_of(ObjectId(i as u32)).unwrap().clone())
                .collect();
            Ok((
                cur.clone(),
                Trace {
                    events: vec![],
                    initial_store: store,
                    final_store: cur,
                    spans: vec![],
                    names,
                },
            ))
        }
    }
}

/// Builds a concrete context in which every external call of `o` is served
/// by a stub contract that replays the given return values in call order.
/// Used to reverse a modular projection into a well-formed concrete run.
///
/// All static call targets of `o` are remapped to the stub. Dynamic call
/// targets are not supported here; tests that use this helper stick to
/// static targets.
pub fn synthesize_stub_context(
    o: ObjectId,
    ctx: &CodeContext,
    havoc_values: &[i64],
) -> (CodeContext, ObjectId) {
    let contract = ctx.get(o).expect("object in context");
    let stub_name = "stub_env";
    let redirected = redirect_static_calls_to(contract, stub_name);

    let mut body = String::new();
    let _ = writeln!(body, "contract {stub_name} {{");
    let _ = writeln!(body, "  field stub_calls;");
    let _ = writeln!(body, "  enter {{");
    let _ = writeln!(body, "    var i, n, v;");
    let _ = writeln!(body, "    i := stub_calls;");
    let _ = writeln!(body, "    n := i + 1;");
    let _ = writeln!(body, "    stub_calls := n;");
    let _ = writeln!(body, "    v := 0;");
    for (idx, v) in havoc_values.iter().enumerate() {
        let _ = writeln!(body, "    if i == {idx} {{ v := {v}; }}");
    }
    let _ = writeln!(body, "    ret := v;");
    let _ = writeln!(body, "    return;");
    let _ = writeln!(body, "  }}");
    let _ = writeln!(body, "}}");
    let stub = parse_contract(&body).expect("generated stub parses");

    let mut new_ctx = CodeContext::new();
    let mut new_o = o;
    for (id, c) in ctx.iter() {
        if id == o {
            new_o = new_ctx.register(redirected.clone());
        } else {
            new_ctx.register(c.clone());
        }
    }
    let _stub_id = new_ctx.register(stub);
    (new_ctx, new_o)
}

/// A copy of the contract whose static call targets all point at `stub`
/// (an anonymous-entry contract); used to reverse modular runs into
/// concrete ones.
pub fn redirect_static_calls_to(contract: &Contract, stub: &str) -> Contract {
    use crate::lang::{CallTarget, Cmd, PrimCmd};
    fn walk(cmd: &Cmd, stub: &str) -> Cmd {
        match cmd {
            Cmd::Prim(PrimCmd::Call {
                dst,
                target: CallTarget::Contract(_),
                arg,
                ..
            }) => Cmd::Prim(PrimCmd::Call {
                dst: dst.clone(),
                target: CallTarget::Contract(stub.into()),
                method: None,
                arg: arg.clone(),
            }),
            Cmd::Prim(p) => Cmd::Prim(p.clone()),
            Cmd::Seq(a, b) => Cmd::Seq(Box::new(walk(a, stub)), Box::new(walk(b, stub))),
            Cmd::If(e, a, b) => Cmd::If(
                e.clone(),
                Box::new(walk(a, stub)),
                Box::new(walk(b, stub)),
            ),
            Cmd::While(e, a) => Cmd::While(e.clone(), Box::new(walk(a, stub))),
        }
    }
    let methods = contract
        .methods
        .iter()
        .map(|m| crate::lang::MethodDef {
            name: m.name.clone(),
            body: walk(&m.body, stub),
        })
        .collect::<Vec<_>>();
    let body = crate::lang::desugar_methods(&methods);
    Contract {
        name: contract.name.clone(),
        fields: contract.fields.clone(),
        locals: contract.locals.clone(),
        methods,
        body,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::store::Store;
    use crate::interp::trace::project_trace;
    use crate::lang::parse_contract;

    fn ctx_of(srcs: &[&str]) -> CodeContext {
        CodeContext::from_contracts(srcs.iter().map(|s| parse_contract(s).unwrap()).collect())
    }

    #[test]
    fn empty_schedule_is_identity() {
        let ctx = ctx_of(&["contract o { field f; enter { skip; return; } }"]);
        let mut store = Store::new();
        store.write(ObjectId(0), &"f".into(), None, 9);
        let (out, trace) = run_mgc(ObjectId(0), &ctx, store.clone(), &[], 1000).unwrap();
        assert_eq!(out, store);
        assert!(trace.events.is_empty());
    }

    #[test]
    fn havocked_calls_leave_other_stores_unchanged() {
        let ctx = ctx_of(&[
            "contract o { field f; enter { var x, t; x := call ext(1); t := x + 1; f := t; return; } }",
            "contract ext { field g; enter { var one; one := 1; g := one; ret := 5; return; } }",
        ]);
        let schedule = [MgcCall {
            method: None,
            arg: 0,
            havoc_values: vec![10],
        }];
        let (out, trace) = run_mgc(ObjectId(0), &ctx, Store::new(), &schedule, 1000).unwrap();
        assert_eq!(out.read(ObjectId(0), &"f".into(), None), 11);
        // ext was never entered: its store is untouched, trace has only o.
        assert_eq!(out.read(ObjectId(1), &"g".into(), None), 0);
        assert!(trace.events.iter().all(|e| e.object == ObjectId(0)));
    }

    #[test]
    fn stub_context_reproduces_projection() {
        let ctx = ctx_of(&[
            "contract o { field f; enter { var x, y, t; x := call ext(1); y := call ext(2); t := x + y; f := t; return; } }",
            "contract ext { enter { ret := 0; return; } }",
        ]);
        let schedule = [MgcCall {
            method: None,
            arg: 0,
            havoc_values: vec![10, 20],
        }];
        let (mgc_store, mgc_trace) =
            run_mgc(ObjectId(0), &ctx, Store::new(), &schedule, 1000).unwrap();

        let (stub_ctx, o) = synthesize_stub_context(ObjectId(0), &ctx, &[10, 20]);
        let top = TopCall {
            target: o,
            selector: 0,
            arg: 0,
        };
        let (concrete_store, concrete_trace) = run_complete_execution(
            &stub_ctx,
            Store::new(),
            &top,
            &mut CallMode::Concrete,
            10_000,
            &mut NoObserver,
        )
        .unwrap();

        assert_eq!(
            mgc_store.read(ObjectId(0), &"f".into(), None),
            concrete_store.read(o, &"f".into(), None)
        );
        let p1 = project_trace(&mgc_trace, ObjectId(0));
        let p2 = project_trace(&concrete_trace, o);
        let ids1: Vec<_> = p1.events.iter().map(|e| (e.text.clone(), e.access.clone(), e.depth_after)).collect();
        let ids2: Vec<_> = p2.events.iter().map(|e| (e.text.clone(), e.access.clone(), e.depth_after)).collect();
        assert_eq!(ids1, ids2);
    }
}
