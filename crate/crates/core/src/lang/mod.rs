//! The contract language: abstract syntax, a concrete text syntax with a
//! parser, a printer, and static validation of code contexts.
//!
//! Each contract owns a set of integer-valued fields (scalar or map-keyed)
//! and a single method body. Source files may declare several named entry
//! points; these are desugared into one body that dispatches on a reserved
//! `selector` local, so at the semantic level every contract still has
//! exactly one method.

mod lexer;
mod parser;
pub(crate) mod print;
mod validate;

pub use parser::{parse_contract, ParseError};
pub use print::print_contract;
pub use validate::{validate_context, Diagnostic, DiagnosticKind};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Name of a contract (also used as the object name at runtime).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectName(pub String);

/// Name of a field. Field names are globally unique across a code context.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FieldName(pub String);

/// Name of a method-local variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LocalName(pub String);

impl fmt::Display for ObjectName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}
impl fmt::Display for FieldName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}
impl fmt::Display for LocalName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectName {
    fn from(s: &str) -> Self {
        ObjectName(s.to_string())
    }
}
impl From<&str> for FieldName {
    fn from(s: &str) -> Self {
        FieldName(s.to_string())
    }
}
impl From<&str> for LocalName {
    fn from(s: &str) -> Self {
        LocalName(s.to_string())
    }
}

/// Interned object identifier. Contract names map to consecutive integers
/// in registration order so objects can be passed as call arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectId(pub u32);

impl ObjectId {
    pub fn as_value(self) -> i64 {
        self.0 as i64
    }
}

/// Locals that exist in every frame without declaration.
///
/// `arg` carries the single call argument, `ret` the value returned to the
/// caller, `res` receives a callee's `ret`, `this` the active object's
/// interned id, and `selector` the entry-point index chosen by the call site.
pub const RESERVED_LOCALS: [&str; 5] = ["arg", "ret", "res", "this", "selector"];

pub fn is_reserved_local(name: &str) -> bool {
    RESERVED_LOCALS.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

/// Pure integer expressions over locals and literals. Booleans are integers:
/// zero is false, anything else is true; comparisons yield 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Int(i64),
    Local(LocalName),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    pub fn local(name: &str) -> Expr {
        Expr::Local(name.into())
    }
}

/// Target of a call command. A name that matches a declared local is a
/// dynamic call through that local's value (an interned object id);
/// otherwise it names a contract directly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CallTarget {
    Contract(ObjectName),
    Local(LocalName),
}

/// Primitive commands. `Enter` never appears in source; it labels the
/// call transition in recorded traces, paired with `Return` on frame pop.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrimCmd {
    AssignLocal {
        dst: LocalName,
        expr: Expr,
    },
    /// `F := x` or `F[e] := x`; the source of a field write is a local.
    WriteField {
        field: FieldName,
        key: Option<Expr>,
        src: LocalName,
    },
    /// `x := F` or `x := F[e]`.
    ReadField {
        dst: LocalName,
        field: FieldName,
        key: Option<Expr>,
    },
    Assert(Expr),
    Call {
        dst: LocalName,
        target: CallTarget,
        method: Option<String>,
        arg: Expr,
    },
    Skip,
    Enter,
    Return,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmd {
    Prim(PrimCmd),
    Seq(Box<Cmd>, Box<Cmd>),
    If(Expr, Box<Cmd>, Box<Cmd>),
    While(Expr, Box<Cmd>),
}

impl Cmd {
    pub fn seq(cmds: Vec<Cmd>) -> Cmd {
        let mut it = cmds.into_iter().rev();
        let last = it.next().unwrap_or(Cmd::Prim(PrimCmd::Skip));
        it.fold(last, |acc, c| Cmd::Seq(Box::new(c), Box::new(acc)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: FieldName,
    pub is_map: bool,
}

/// A named (or single anonymous) entry point as written in source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDef {
    pub name: Option<String>,
    pub body: Cmd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contract {
    pub name: ObjectName,
    pub fields: Vec<FieldDecl>,
    pub locals: Vec<LocalName>,
    /// Entry points as declared; `body` is their desugared dispatch form.
    pub methods: Vec<MethodDef>,
    /// The single semantic method: dispatches on `selector`, ends in Return.
    pub body: Cmd,
}

impl Contract {
    pub fn field(&self, name: &FieldName) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| &f.name == name)
    }

    pub fn has_local(&self, name: &LocalName) -> bool {
        is_reserved_local(&name.0) || self.locals.contains(name)
    }

    /// Resolve a method name to its selector index.
    /// `None` resolves to 0 when the contract has a single entry point.
    pub fn resolve_method(&self, name: Option<&str>) -> Option<u32> {
        match name {
            Some(n) => self
                .methods
                .iter()
                .position(|m| m.name.as_deref() == Some(n))
                .map(|i| i as u32),
            None => {
                if self.methods.len() == 1 {
                    Some(0)
                } else {
                    None
                }
            }
        }
    }

    pub fn method_name(&self, selector: u32) -> Option<&str> {
        self.methods.get(selector as usize).and_then(|m| m.name.as_deref())
    }
}

/// Builds the dispatch body from the declared methods: selector 0 runs the
/// first method, and so on. Every branch ends in an explicit Return.
pub fn desugar_methods(methods: &[MethodDef]) -> Cmd {
    fn with_return(body: &Cmd) -> Cmd {
        Cmd::Seq(
            Box::new(body.clone()),
            Box::new(Cmd::Prim(PrimCmd::Return)),
        )
    }
    if methods.len() == 1 {
        return with_return(&methods[0].body);
    }
    let mut cmd = Cmd::Prim(PrimCmd::Return);
    for (idx, m) in methods.iter().enumerate().rev() {
        let cond = Expr::Binary(
            BinOp::Eq,
            Box::new(Expr::local("selector")),
            Box::new(Expr::Int(idx as i64)),
        );
        cmd = Cmd::If(cond, Box::new(with_return(&m.body)), Box::new(cmd));
    }
    cmd
}

/// The code context: all contracts visible to an execution, with interned
/// ids assigned in registration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CodeContext {
    contracts: Vec<Contract>,
    by_name: BTreeMap<ObjectName, ObjectId>,
}

impl CodeContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_contracts(contracts: Vec<Contract>) -> Self {
        let mut ctx = Self::new();
        for c in contracts {
            ctx.register(c);
        }
        ctx
    }

    /// Registers a contract, assigning the next interned id. A contract with
    /// a duplicate name replaces nothing; the duplicate is kept so that
    /// validation can flag it, but lookups resolve to the first occurrence.
    pub fn register(&mut self, contract: Contract) -> ObjectId {
        let id = ObjectId(self.contracts.len() as u32);
        self.by_name.entry(contract.name.clone()).or_insert(id);
        self.contracts.push(contract);
        id
    }

    pub fn id_of(&self, name: &ObjectName) -> Option<ObjectId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ObjectId) -> Option<&Contract> {
        self.contracts.get(id.0 as usize)
    }

    pub fn by_name(&self, name: &ObjectName) -> Option<&Contract> {
        self.id_of(name).and_then(|id| self.get(id))
    }

    pub fn name_of(&self, id: ObjectId) -> Option<&ObjectName> {
        self.get(id).map(|c| &c.name)
    }

    pub fn len(&self) -> usize {
        self.contracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ObjectId, &Contract)> {
        self.contracts
            .iter()
            .enumerate()
            .map(|(i, c)| (ObjectId(i as u32), c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desugar_single_method_appends_return() {
        let m = MethodDef {
            name: None,
            body: Cmd::Prim(PrimCmd::Skip),
        };
        let body = desugar_methods(&[m]);
        match body {
            Cmd::Seq(_, second) => assert_eq!(*second, Cmd::Prim(PrimCmd::Return)),
            other => panic!("expected Seq, got {other:?}"),
        }
    }

    #[test]
    fn interning_follows_registration_order() {
        let mut ctx = CodeContext::new();
        let a = parse_contract("contract a { enter { skip; } }").unwrap();
        let b = parse_contract("contract b { enter { skip; } }").unwrap();
        assert_eq!(ctx.register(a), ObjectId(0));
        assert_eq!(ctx.register(b), ObjectId(1));
        assert_eq!(ctx.id_of(&"b".into()), Some(ObjectId(1)));
    }
}
