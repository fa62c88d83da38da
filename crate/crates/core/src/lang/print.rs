//! Pretty-printer. `parse(print(parse(s)))` is structurally equal to
//! `parse(s)`; the printer emits the declared methods, not the desugared
//! dispatch body.

use std::fmt::Write;

use super::{Cmd, Contract, Expr, PrimCmd};

pub fn print_contract(c: &Contract) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "contract {} {{", c.name);
    for f in &c.fields {
        if f.is_map {
            let _ = writeln!(out, "  field {} map;", f.name);
        } else {
            let _ = writeln!(out, "  field {};", f.name);
        }
    }
    for m in &c.methods {
        match &m.name {
            Some(n) => {
                let _ = writeln!(out, "  method {n} {{");
            }
            None => {
                let _ = writeln!(out, "  enter {{");
            }
        }
        let locals = locals_in(&m.body, c);
        if !locals.is_empty() {
            let _ = writeln!(out, "    var {};", locals.join(", "));
        }
        print_cmd(&m.body, 2, &mut out);
        let _ = writeln!(out, "  }}");
    }
    out.push_str("}\n");
    out
}

fn locals_in(body: &Cmd, c: &Contract) -> Vec<String> {
    // The AST keeps locals per contract; emit the ones this body mentions,
    // in declaration order.
    let mut used = std::collections::BTreeSet::new();
    collect_locals(body, &mut used);
    c.locals
        .iter()
        .filter(|l| used.contains(l.0.as_str()))
        .map(|l| l.0.clone())
        .collect()
}

fn collect_locals<'a>(cmd: &'a Cmd, out: &mut std::collections::BTreeSet<&'a str>) {
    fn expr_locals<'a>(e: &'a Expr, out: &mut std::collections::BTreeSet<&'a str>) {
        match e {
            Expr::Int(_) => {}
            Expr::Local(l) => {
                out.insert(l.0.as_str());
            }
            Expr::Binary(_, a, b) => {
                expr_locals(a, out);
                expr_locals(b, out);
            }
            Expr::Not(a) => expr_locals(a, out),
        }
    }
    match cmd {
        Cmd::Prim(p) => match p {
            PrimCmd::AssignLocal { dst, expr } => {
                out.insert(dst.0.as_str());
                expr_locals(expr, out);
            }
            PrimCmd::WriteField { key, src, .. } => {
                out.insert(src.0.as_str());
                if let Some(k) = key {
                    expr_locals(k, out);
                }
            }
            PrimCmd::ReadField { dst, key, .. } => {
                out.insert(dst.0.as_str());
                if let Some(k) = key {
                    expr_locals(k, out);
                }
            }
            PrimCmd::Assert(e) => expr_locals(e, out),
            PrimCmd::Call { dst, target, arg, .. } => {
                out.insert(dst.0.as_str());
                if let super::CallTarget::Local(l) = target {
                    out.insert(l.0.as_str());
                }
                expr_locals(arg, out);
            }
            _ => {}
        },
        Cmd::Seq(a, b) => {
            collect_locals(a, out);
            collect_locals(b, out);
        }
        Cmd::If(e, a, b) => {
            expr_locals(e, out);
            collect_locals(a, out);
            collect_locals(b, out);
        }
        Cmd::While(e, a) => {
            expr_locals(e, out);
            collect_locals(a, out);
        }
    }
}

fn indent(n: usize, out: &mut String) {
    for _ in 0..n + 1 {
        out.push_str("  ");
    }
}

fn print_cmd(cmd: &Cmd, level: usize, out: &mut String) {
    match cmd {
        Cmd::Seq(a, b) => {
            print_cmd(a, level, out);
            print_cmd(b, level, out);
        }
        Cmd::If(e, a, b) => {
            indent(level, out);
            let _ = writeln!(out, "if {} {{", print_expr(e));
            print_cmd(a, level + 1, out);
            indent(level, out);
            out.push_str("} else {\n");
            print_cmd(b, level + 1, out);
            indent(level, out);
            out.push_str("}\n");
        }
        Cmd::While(e, a) => {
            indent(level, out);
            let _ = writeln!(out, "while {} {{", print_expr(e));
            print_cmd(a, level + 1, out);
            indent(level, out);
            out.push_str("}\n");
        }
        Cmd::Prim(p) => {
            indent(level, out);
            let _ = writeln!(out, "{}", print_prim(p));
        }
    }
}

pub(crate) fn print_prim(p: &PrimCmd) -> String {
    match p {
        PrimCmd::AssignLocal { dst, expr } => format!("{dst} := {};", print_expr(expr)),
        PrimCmd::WriteField { field, key, src } => match key {
            Some(k) => format!("{field}[{}] := {src};", print_expr(k)),
            None => format!("{field} := {src};"),
        },
        PrimCmd::ReadField { dst, field, key } => match key {
            Some(k) => format!("{dst} := {field}[{}];", print_expr(k)),
            None => format!("{dst} := {field};"),
        },
        PrimCmd::Assert(e) => format!("assert {};", print_expr(e)),
        PrimCmd::Call {
            dst,
            target,
            method,
            arg,
        } => {
            let t = match target {
                super::CallTarget::Contract(o) => o.0.clone(),
                super::CallTarget::Local(l) => l.0.clone(),
            };
            match method {
                Some(m) => format!("{dst} := call {t}.{m}({});", print_expr(arg)),
                None => format!("{dst} := call {t}({});", print_expr(arg)),
            }
        }
        PrimCmd::Skip => "skip;".to_string(),
        PrimCmd::Enter => "enter".to_string(),
        PrimCmd::Return => "return;".to_string(),
    }
}

pub(crate) fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Int(n) => n.to_string(),
        Expr::Local(l) => l.0.clone(),
        Expr::Binary(op, a, b) => {
            format!("({} {} {})", print_expr(a), op.symbol(), print_expr(b))
        }
        Expr::Not(a) => format!("!{}", print_expr(a)),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_contract;
    use super::*;

    #[test]
    fn print_parse_round_trip() {
        let src = "contract C { field f; field m map; enter { var x, y; x := f; y := m[x + 1]; if x < y { m[0] := x; } else { skip; } while !(x == 3) { x := x + 1; } return; } }";
        let first = parse_contract(src).unwrap();
        let printed = print_contract(&first);
        let second = parse_contract(&printed).unwrap();
        assert_eq!(first, second, "printed form:\n{printed}");
    }
}
