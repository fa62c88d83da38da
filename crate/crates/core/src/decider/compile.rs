//! Flat compiled form of a contract body for configuration-graph
//! exploration: integer-indexed locals, jump-based control flow, and a
//! static table of (field, key) locations over the declared finite domains.

use std::collections::BTreeMap;

use crate::lang::{BinOp, Cmd, Contract, Expr, FieldName, LocalName, PrimCmd, RESERVED_LOCALS};
use crate::monitor::Location;

use super::{DeciderError, FieldDomain};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CExpr {
    Int(i64),
    Local(usize),
    Binary(BinOp, Box<CExpr>, Box<CExpr>),
    Not(Box<CExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Assign { dst: usize, expr: CExpr },
    Read { dst: usize, field: usize, key: Option<CExpr> },
    Write { field: usize, key: Option<CExpr>, src: usize },
    Assert { expr: CExpr },
    /// External call site; exploration replaces it with callbacks + havoc.
    Call { dst: usize, site: usize },
    Jump(usize),
    /// Falls through when the condition is nonzero.
    BranchIfZero { cond: CExpr, target: usize },
    Return,
}

#[derive(Debug, Clone)]
pub struct FieldInfo {
    pub name: FieldName,
    pub key_domain: Option<Vec<i64>>,
    pub value_domain: Vec<i64>,
    /// Base index into the location table; map fields occupy one slot per
    /// key in declaration order of the key domain.
    pub loc_base: usize,
}

#[derive(Debug, Clone)]
pub struct CompiledObject {
    pub ops: Vec<Op>,
    pub locals: Vec<LocalName>,
    pub fields: Vec<FieldInfo>,
    pub locations: Vec<Location>,
    pub call_sites: usize,
}

impl CompiledObject {
    pub fn local_index(&self, name: &str) -> Option<usize> {
        self.locals.iter().position(|l| l.0 == name)
    }

    /// Location index for a field access with a concrete key; None when the
    /// key falls outside the declared domain.
    pub fn location_of(&self, field: usize, key: Option<i64>) -> Option<usize> {
        let info = &self.fields[field];
        match (&info.key_domain, key) {
            (None, None) => Some(info.loc_base),
            (Some(dom), Some(k)) => dom
                .iter()
                .position(|&v| v == k)
                .map(|i| info.loc_base + i),
            _ => None,
        }
    }
}

pub fn compile_object(
    contract: &Contract,
    field_domains: &BTreeMap<FieldName, FieldDomain>,
) -> Result<CompiledObject, DeciderError> {
    let mut locals: Vec<LocalName> = RESERVED_LOCALS.iter().map(|s| LocalName::from(*s)).collect();
    for l in &contract.locals {
        if !locals.contains(l) {
            locals.push(l.clone());
        }
    }

    let mut fields = Vec::new();
    let mut locations = Vec::new();
    for decl in &contract.fields {
        let domain = field_domains.get(&decl.name).ok_or_else(|| {
            DeciderError::Spec(format!("no domain declared for field `{}`", decl.name))
        })?;
        let info = match (decl.is_map, domain) {
            (false, FieldDomain::Scalar(values)) => {
                let info = FieldInfo {
                    name: decl.name.clone(),
                    key_domain: None,
                    value_domain: values.clone(),
                    loc_base: locations.len(),
                };
                locations.push(Location {
                    field: decl.name.clone(),
                    key: None,
                });
                info
            }
            (true, FieldDomain::Map { key_domain, value_domain }) => {
                let info = FieldInfo {
                    name: decl.name.clone(),
                    key_domain: Some(key_domain.clone()),
                    value_domain: value_domain.clone(),
                    loc_base: locations.len(),
                };
                for &k in key_domain {
                    locations.push(Location {
                        field: decl.name.clone(),
                        key: Some(k),
                    });
                }
                info
            }
            (false, FieldDomain::Map { .. }) => {
                return Err(DeciderError::Spec(format!(
                    "field `{}` is scalar but its domain declares keys",
                    decl.name
                )))
            }
            (true, FieldDomain::Scalar(_)) => {
                return Err(DeciderError::Spec(format!(
                    "map field `{}` requires a key domain",
                    decl.name
                )))
            }
        };
        if domain_empty(domain) {
            return Err(DeciderError::Spec(format!(
                "field `{}` has an empty domain",
                decl.name
            )));
        }
        fields.push(info);
    }
    if locations.len() > 64 {
        return Err(DeciderError::Spec(format!(
            "{} locations exceed the 64-location set limit",
            locations.len()
        )));
    }

    let mut c = Compiler {
        contract,
        locals,
        fields,
        ops: Vec::new(),
        call_sites: 0,
    };
    c.cmd(&contract.body)?;
    c.ops.push(Op::Return);
    Ok(CompiledObject {
        ops: c.ops,
        locals: c.locals,
        fields: c.fields,
        locations,
        call_sites: c.call_sites,
    })
}

fn domain_empty(d: &FieldDomain) -> bool {
    match d {
        FieldDomain::Scalar(v) => v.is_empty(),
        FieldDomain::Map { key_domain, value_domain } => {
            key_domain.is_empty() || value_domain.is_empty()
        }
    }
}

struct Compiler<'a> {
    contract: &'a Contract,
    locals: Vec<LocalName>,
    fields: Vec<FieldInfo>,
    ops: Vec<Op>,
    call_sites: usize,
}

impl<'a> Compiler<'a> {
    fn local(&mut self, name: &LocalName) -> Result<usize, DeciderError> {
        self.locals
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| DeciderError::Spec(format!("undeclared local `{name}`")))
    }

    fn field(&self, name: &FieldName) -> Result<usize, DeciderError> {
        self.fields
            .iter()
            .position(|f| &f.name == name)
            .ok_or_else(|| DeciderError::Spec(format!("undeclared field `{name}`")))
    }

    fn expr(&mut self, e: &Expr) -> Result<CExpr, DeciderError> {
        Ok(match e {
            Expr::Int(n) => CExpr::Int(*n),
            Expr::Local(l) => CExpr::Local(self.local(l)?),
            Expr::Binary(op, a, b) => CExpr::Binary(
                *op,
                Box::new(self.expr(a)?),
                Box::new(self.expr(b)?),
            ),
            Expr::Not(a) => CExpr::Not(Box::new(self.expr(a)?)),
        })
    }

    fn cmd(&mut self, cmd: &Cmd) -> Result<(), DeciderError> {
        match cmd {
            Cmd::Prim(p) => self.prim(p)?,
            Cmd::Seq(a, b) => {
                self.cmd(a)?;
                self.cmd(b)?;
            }
            Cmd::If(cond, then_cmd, else_cmd) => {
                let cond = self.expr(cond)?;
                let branch_at = self.ops.len();
                self.ops.push(Op::BranchIfZero { cond, target: 0 });
                self.cmd(then_cmd)?;
                let jump_at = self.ops.len();
                self.ops.push(Op::Jump(0));
                let else_start = self.ops.len();
                self.cmd(else_cmd)?;
                let end = self.ops.len();
                self.patch(branch_at, else_start);
                self.patch(jump_at, end);
            }
            Cmd::While(cond, body) => {
                let head = self.ops.len();
                let cond = self.expr(cond)?;
                let branch_at = self.ops.len();
                self.ops.push(Op::BranchIfZero { cond, target: 0 });
                self.cmd(body)?;
                self.ops.push(Op::Jump(head));
                let end = self.ops.len();
                self.patch(branch_at, end);
            }
        }
        Ok(())
    }

    fn prim(&mut self, p: &PrimCmd) -> Result<(), DeciderError> {
        match p {
            PrimCmd::AssignLocal { dst, expr } => {
                let op = Op::Assign {
                    dst: self.local(dst)?,
                    expr: self.expr(expr)?,
                };
                self.ops.push(op);
            }
            PrimCmd::ReadField { dst, field, key } => {
                let op = Op::Read {
                    dst: self.local(dst)?,
                    field: self.field(field)?,
                    key: key.as_ref().map(|k| self.expr(k)).transpose()?,
                };
                self.ops.push(op);
            }
            PrimCmd::WriteField { field, key, src } => {
                let op = Op::Write {
                    field: self.field(field)?,
                    key: key.as_ref().map(|k| self.expr(k)).transpose()?,
                    src: self.local(src)?,
                };
                self.ops.push(op);
            }
            PrimCmd::Assert(e) => {
                let op = Op::Assert {
                    expr: self.expr(e)?,
                };
                self.ops.push(op);
            }
            PrimCmd::Call { dst, .. } => {
                let site = self.call_sites;
                self.call_sites += 1;
                let op = Op::Call {
                    dst: self.local(dst)?,
                    site,
                };
                self.ops.push(op);
            }
            PrimCmd::Skip => {}
            PrimCmd::Return => self.ops.push(Op::Return),
            PrimCmd::Enter => {
                return Err(DeciderError::Spec(
                    "enter cannot appear in a contract body".to_string(),
                ))
            }
        }
        let _ = self.contract;
        Ok(())
    }

    fn patch(&mut self, at: usize, target: usize) {
        match &mut self.ops[at] {
            Op::Jump(t) => *t = target,
            Op::BranchIfZero { target: t, .. } => *t = target,
            _ => unreachable!("patched op is a jump"),
        }
    }
}

pub fn eval_cexpr(e: &CExpr, locals: &[i64]) -> i64 {
    match e {
        CExpr::Int(n) => *n,
        CExpr::Local(i) => locals.get(*i).copied().unwrap_or(0),
        CExpr::Binary(op, a, b) => {
            let x = eval_cexpr(a, locals);
            let y = eval_cexpr(b, locals);
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
        CExpr::Not(a) => (eval_cexpr(a, locals) == 0) as i64,
    }
}
