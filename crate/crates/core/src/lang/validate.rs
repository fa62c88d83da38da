//! Context-level static validation. Returns diagnostics rather than failing:
//! callers decide which kinds are fatal for their execution mode.

use std::collections::BTreeMap;
use std::fmt;

use super::{CallTarget, Cmd, CodeContext, ObjectName, PrimCmd};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagnosticKind {
    /// Two contracts in the context share a contract name.
    DuplicateContract,
    /// A field name is declared by more than one contract.
    SharedFieldName,
    /// A static call target does not exist in the context. Only fatal in
    /// concrete (strict) mode; modular execution havocs the call anyway.
    UnresolvedCallTarget,
    /// A call names a method its static target does not declare.
    UnknownMethod,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiagnosticKind::DuplicateContract => "duplicate contract",
            DiagnosticKind::SharedFieldName => "field name shared across contracts",
            DiagnosticKind::UnresolvedCallTarget => "unresolved call target",
            DiagnosticKind::UnknownMethod => "unknown method",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub contract: ObjectName,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (in `{}`): {}", self.kind, self.contract, self.detail)
    }
}

/// Validates cross-contract invariants. The result is a sorted set, so it is
/// independent of contract declaration order.
pub fn validate_context(ctx: &CodeContext) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut seen_names: BTreeMap<&ObjectName, usize> = BTreeMap::new();
    for (_, c) in ctx.iter() {
        *seen_names.entry(&c.name).or_insert(0) += 1;
    }
    for (name, count) in &seen_names {
        if *count > 1 {
            out.push(Diagnostic {
                kind: DiagnosticKind::DuplicateContract,
                contract: (*name).clone(),
                detail: format!("declared {count} times"),
            });
        }
    }

    let mut field_owners: BTreeMap<&str, Vec<&ObjectName>> = BTreeMap::new();
    for (_, c) in ctx.iter() {
        for f in &c.fields {
            field_owners.entry(&f.name.0).or_default().push(&c.name);
        }
    }
    for (field, owners) in &field_owners {
        if owners.len() > 1 {
            // Report once per non-first owner so permuting declaration order
            // yields the same set.
            let mut owners = owners.clone();
            owners.sort();
            for owner in owners.iter().skip(1) {
                out.push(Diagnostic {
                    kind: DiagnosticKind::SharedFieldName,
                    contract: (*owner).clone(),
                    detail: format!("field `{field}` also declared by `{}`", owners[0]),
                });
            }
        }
    }

    for (_, c) in ctx.iter() {
        visit_calls(&c.body, &mut |target, method| {
            if let CallTarget::Contract(name) = target {
                match ctx.by_name(name) {
                    None => out.push(Diagnostic {
                        kind: DiagnosticKind::UnresolvedCallTarget,
                        contract: c.name.clone(),
                        detail: format!("call to undefined `{name}`"),
                    }),
                    Some(callee) => {
                        if callee.resolve_method(method.as_deref()).is_none() {
                            out.push(Diagnostic {
                                kind: DiagnosticKind::UnknownMethod,
                                contract: c.name.clone(),
                                detail: match method {
                                    Some(m) => format!("`{name}` has no method `{m}`"),
                                    None => format!(
                                        "`{name}` declares named methods; the call must pick one"
                                    ),
                                },
                            })
                        }
                    }
                }
            }
        });
    }

    out.sort();
    out.dedup();
    out
}

fn visit_calls(cmd: &Cmd, f: &mut impl FnMut(&CallTarget, &Option<String>)) {
    match cmd {
        Cmd::Prim(PrimCmd::Call { target, method, .. }) => f(target, method),
        Cmd::Prim(_) => {}
        Cmd::Seq(a, b) | Cmd::If(_, a, b) => {
            visit_calls(a, f);
            visit_calls(b, f);
        }
        Cmd::While(_, a) => visit_calls(a, f),
    }
}
