//! Recursive-descent parser for contract source files.
//!
//! Statement forms: `x := e;`, `F := x;`, `F[e] := x;`, `x := F;`,
//! `x := F[e];`, `x := call T(e);`, `x := call T.m(e);`, `assert e;`,
//! `skip;`, `return;`, `if e { } else { }`, `while e { }`.
//! A name on either side of `:=` resolves against declared fields first,
//! then locals; field reads and writes always go through a local.

use std::collections::BTreeSet;

use thiserror::Error;

use super::lexer::{lex, Lexed, Pos, Tok};
use super::{
    desugar_methods, is_reserved_local, BinOp, Cmd, CallTarget, Contract, Expr, FieldDecl,
    FieldName, LocalName, MethodDef, ObjectName, PrimCmd,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("parse error at {line}:{col}: {msg}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

/// Parses a single contract from source text.
pub fn parse_contract(source: &str) -> Result<Contract, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        at: 0,
        fields: Vec::new(),
        locals: BTreeSet::new(),
    };
    let contract = p.contract()?;
    p.expect(Tok::Eof)?;
    Ok(contract)
}

struct Parser {
    toks: Vec<Lexed>,
    at: usize,
    fields: Vec<FieldDecl>,
    /// Locals of the method currently being parsed.
    locals: BTreeSet<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let pos = self.pos();
        Err(ParseError {
            line: pos.line,
            col: pos.col,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {tok}, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {other}")),
        }
    }

    fn is_field(&self, name: &str) -> bool {
        self.fields.iter().any(|f| f.name.0 == name)
    }

    fn field_decl_of(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name.0 == name)
    }

    fn is_local(&self, name: &str) -> bool {
        is_reserved_local(name) || self.locals.contains(name)
    }

    fn contract(&mut self) -> Result<Contract, ParseError> {
        self.expect(Tok::Contract)?;
        let name = self.ident()?;
        self.expect(Tok::LBrace)?;

        while *self.peek() == Tok::Field {
            self.bump();
            let pos = self.pos();
            let fname = self.ident()?;
            if self.is_field(&fname) {
                return Err(ParseError {
                    line: pos.line,
                    col: pos.col,
                    msg: format!("duplicate field `{fname}`"),
                });
            }
            let is_map = if *self.peek() == Tok::Map {
                self.bump();
                true
            } else {
                false
            };
            self.expect(Tok::Semi)?;
            self.fields.push(FieldDecl {
                name: FieldName(fname),
                is_map,
            });
        }

        let mut methods = Vec::new();
        let mut all_locals: Vec<LocalName> = Vec::new();
        match self.peek() {
            Tok::Enter => {
                self.bump();
                let body = self.block(&mut all_locals)?;
                methods.push(MethodDef { name: None, body });
            }
            Tok::Method => {
                while *self.peek() == Tok::Method {
                    self.bump();
                    let pos = self.pos();
                    let mname = self.ident()?;
                    if methods
                        .iter()
                        .any(|m: &MethodDef| m.name.as_deref() == Some(&mname))
                    {
                        return Err(ParseError {
                            line: pos.line,
                            col: pos.col,
                            msg: format!("duplicate method `{mname}`"),
                        });
                    }
                    let body = self.block(&mut all_locals)?;
                    methods.push(MethodDef {
                        name: Some(mname),
                        body,
                    });
                }
            }
            _ => return self.err("expected `enter` or `method` block"),
        }
        self.expect(Tok::RBrace)?;

        let body = desugar_methods(&methods);
        Ok(Contract {
            name: ObjectName(name),
            fields: std::mem::take(&mut self.fields),
            locals: all_locals,
            methods,
            body,
        })
    }

    /// `{ (var a, b, c;)? stmt* }` — locals are scoped to the block's method.
    fn block(&mut self, all_locals: &mut Vec<LocalName>) -> Result<Cmd, ParseError> {
        self.locals.clear();
        self.expect(Tok::LBrace)?;
        if *self.peek() == Tok::Var {
            self.bump();
            loop {
                let pos = self.pos();
                let name = self.ident()?;
                if is_reserved_local(&name) {
                    return Err(ParseError {
                        line: pos.line,
                        col: pos.col,
                        msg: format!("`{name}` is a reserved local"),
                    });
                }
                if self.is_field(&name) {
                    return Err(ParseError {
                        line: pos.line,
                        col: pos.col,
                        msg: format!("local `{name}` shadows a field"),
                    });
                }
                self.locals.insert(name.clone());
                let ln = LocalName(name);
                if !all_locals.contains(&ln) {
                    all_locals.push(ln);
                }
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::Semi)?;
        }
        let cmd = self.stmt_seq(Tok::RBrace)?;
        self.expect(Tok::RBrace)?;
        Ok(cmd)
    }

    /// `{ stmt* }` without a var declaration (used for nested blocks).
    fn nested_block(&mut self) -> Result<Cmd, ParseError> {
        self.expect(Tok::LBrace)?;
        let cmd = self.stmt_seq(Tok::RBrace)?;
        self.expect(Tok::RBrace)?;
        Ok(cmd)
    }

    fn stmt_seq(&mut self, until: Tok) -> Result<Cmd, ParseError> {
        let mut cmds = Vec::new();
        while *self.peek() != until && *self.peek() != Tok::Eof {
            cmds.push(self.stmt()?);
        }
        Ok(Cmd::seq(cmds))
    }

    fn stmt(&mut self) -> Result<Cmd, ParseError> {
        match self.peek().clone() {
            Tok::Skip => {
                self.bump();
                self.expect(Tok::Semi)?;
                Ok(Cmd::Prim(PrimCmd::Skip))
            }
            Tok::Return => {
                self.bump();
                self.expect(Tok::Semi)?;
                Ok(Cmd::Prim(PrimCmd::Return))
            }
            Tok::Assert => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                Ok(Cmd::Prim(PrimCmd::Assert(e)))
            }
            Tok::If => {
                self.bump();
                let cond = self.expr()?;
                let then_cmd = self.nested_block()?;
                let else_cmd = if *self.peek() == Tok::Else {
                    self.bump();
                    if *self.peek() == Tok::If {
                        self.stmt()?
                    } else {
                        self.nested_block()?
                    }
                } else {
                    Cmd::Prim(PrimCmd::Skip)
                };
                Ok(Cmd::If(cond, Box::new(then_cmd), Box::new(else_cmd)))
            }
            Tok::While => {
                self.bump();
                let cond = self.expr()?;
                let body = self.nested_block()?;
                Ok(Cmd::While(cond, Box::new(body)))
            }
            Tok::Ident(name) => {
                let pos = self.pos();
                self.bump();
                self.assignment(name, pos)
            }
            other => self.err(format!("expected statement, found {other}")),
        }
    }

    fn assignment(&mut self, lhs: String, lhs_pos: Pos) -> Result<Cmd, ParseError> {
        // Field write: F := x  or  F[e] := x
        if let Some(decl) = self.field_decl_of(&lhs).cloned() {
            let key = if *self.peek() == Tok::LBracket {
                self.bump();
                let k = self.expr()?;
                self.expect(Tok::RBracket)?;
                Some(k)
            } else {
                None
            };
            if decl.is_map != key.is_some() {
                return Err(ParseError {
                    line: lhs_pos.line,
                    col: lhs_pos.col,
                    msg: if decl.is_map {
                        format!("map field `{lhs}` requires a key")
                    } else {
                        format!("field `{lhs}` is scalar and takes no key")
                    },
                });
            }
            self.expect(Tok::Assign)?;
            let src_pos = self.pos();
            let src = self.ident()?;
            if !self.is_local(&src) {
                return Err(ParseError {
                    line: src_pos.line,
                    col: src_pos.col,
                    msg: format!(
                        "field writes take a local on the right-hand side; `{src}` is not a declared local"
                    ),
                });
            }
            self.expect(Tok::Semi)?;
            return Ok(Cmd::Prim(PrimCmd::WriteField {
                field: decl.name,
                key,
                src: LocalName(src),
            }));
        }

        if !self.is_local(&lhs) {
            return Err(ParseError {
                line: lhs_pos.line,
                col: lhs_pos.col,
                msg: format!("undeclared local `{lhs}`"),
            });
        }
        let dst = LocalName(lhs);
        self.expect(Tok::Assign)?;

        // Call: x := call T(e)  or  x := call T.m(e)
        if *self.peek() == Tok::Call {
            self.bump();
            let tname = self.ident()?;
            let method = if *self.peek() == Tok::Dot {
                self.bump();
                Some(self.ident()?)
            } else {
                None
            };
            self.expect(Tok::LParen)?;
            let arg = self.expr()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Semi)?;
            let target = if self.is_local(&tname) {
                CallTarget::Local(LocalName(tname))
            } else {
                CallTarget::Contract(ObjectName(tname))
            };
            return Ok(Cmd::Prim(PrimCmd::Call {
                dst,
                target,
                method,
                arg,
            }));
        }

        // Field read: x := F  or  x := F[e]
        if let Tok::Ident(rhs) = self.peek().clone() {
            if let Some(decl) = self.field_decl_of(&rhs).cloned() {
                self.bump();
                let key = if *self.peek() == Tok::LBracket {
                    self.bump();
                    let k = self.expr()?;
                    self.expect(Tok::RBracket)?;
                    Some(k)
                } else {
                    None
                };
                if decl.is_map != key.is_some() {
                    return self.err(if decl.is_map {
                        format!("map field `{rhs}` requires a key")
                    } else {
                        format!("field `{rhs}` is scalar and takes no key")
                    });
                }
                self.expect(Tok::Semi)?;
                return Ok(Cmd::Prim(PrimCmd::ReadField {
                    dst,
                    field: decl.name,
                    key,
                }));
            }
        }

        let expr = self.expr()?;
        self.expect(Tok::Semi)?;
        Ok(Cmd::Prim(PrimCmd::AssignLocal { dst, expr }))
    }

    // Precedence: || < && < comparisons < + - < * < unary.
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.cmp_expr()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.cmp_expr()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::EqEq => Some(BinOp::Eq),
            Tok::Ne => Some(BinOp::Ne),
            Tok::Lt => Some(BinOp::Lt),
            Tok::Le => Some(BinOp::Le),
            Tok::Gt | Tok::Ge => None, // handled by swapping below
            _ => return Ok(lhs),
        };
        match op {
            Some(op) => {
                self.bump();
                let rhs = self.add_expr()?;
                Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
            }
            None => {
                let swapped = match self.bump() {
                    Tok::Gt => BinOp::Lt,
                    _ => BinOp::Le,
                };
                let rhs = self.add_expr()?;
                Ok(Expr::Binary(swapped, Box::new(rhs), Box::new(lhs)))
            }
        }
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary_expr()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Expr::Not(Box::new(self.unary_expr()?)))
            }
            Tok::Minus => {
                self.bump();
                // Negative literals parse as literals; anything else
                // becomes a subtraction from zero.
                if let Tok::Int(n) = *self.peek() {
                    self.bump();
                    return Ok(Expr::Int(n.wrapping_neg()));
                }
                let e = self.unary_expr()?;
                Ok(Expr::Binary(
                    BinOp::Sub,
                    Box::new(Expr::Int(0)),
                    Box::new(e),
                ))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let pos = self.pos();
                self.bump();
                if self.is_field(&name) {
                    return Err(ParseError {
                        line: pos.line,
                        col: pos.col,
                        msg: format!(
                            "fields cannot appear in expressions; read `{name}` into a local first"
                        ),
                    });
                }
                if !self.is_local(&name) {
                    return Err(ParseError {
                        line: pos.line,
                        col: pos.col,
                        msg: format!("undeclared local `{name}`"),
                    });
                }
                Ok(Expr::Local(LocalName(name)))
            }
            other => self.err(format!("expected expression, found {other}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_contract_parses_to_field_write() {
        let c = parse_contract("contract C { field x; enter { x := arg; return; } }").unwrap();
        assert_eq!(c.fields.len(), 1);
        assert_eq!(c.methods.len(), 1);
        let mut found_write = false;
        fn walk(cmd: &Cmd, found: &mut bool) {
            match cmd {
                Cmd::Prim(PrimCmd::WriteField { field, src, .. }) => {
                    assert_eq!(field.0, "x");
                    assert_eq!(src.0, "arg");
                    *found = true;
                }
                Cmd::Seq(a, b) => {
                    walk(a, found);
                    walk(b, found);
                }
                Cmd::If(_, a, b) => {
                    walk(a, found);
                    walk(b, found);
                }
                Cmd::While(_, a) => walk(a, found),
                _ => {}
            }
        }
        walk(&c.body, &mut found_write);
        assert!(found_write);
    }

    #[test]
    fn undeclared_local_is_rejected() {
        let err = parse_contract("contract C { enter { y := 1; } }").unwrap_err();
        assert!(err.msg.contains("undeclared local `y`"), "{err}");
    }

    #[test]
    fn duplicate_field_is_rejected() {
        let err = parse_contract("contract C { field x; field x; enter { skip; } }").unwrap_err();
        assert!(err.msg.contains("duplicate field"), "{err}");
    }

    #[test]
    fn map_field_requires_key() {
        let err =
            parse_contract("contract C { field m map; var ; enter { skip; } }").unwrap_err();
        // malformed var list is caught first; check the map rule separately
        let _ = err;
        let err = parse_contract(
            "contract C { field m map; enter { var x; x := m; } }",
        )
        .unwrap_err();
        assert!(err.msg.contains("requires a key"), "{err}");
    }

    #[test]
    fn scalar_field_rejects_key() {
        let err = parse_contract("contract C { field s; enter { var x; x := s[0]; } }")
            .unwrap_err();
        assert!(err.msg.contains("takes no key"), "{err}");
    }

    #[test]
    fn named_methods_desugar_to_selector_dispatch() {
        let c = parse_contract(
            "contract C { field f; method a { var x; x := 1; f := x; } method b { skip; } }",
        )
        .unwrap();
        assert_eq!(c.methods.len(), 2);
        assert_eq!(c.resolve_method(Some("b")), Some(1));
        assert_eq!(c.resolve_method(Some("missing")), None);
        assert_eq!(c.resolve_method(None), None);
        match &c.body {
            Cmd::If(Expr::Binary(BinOp::Eq, lhs, rhs), _, _) => {
                assert_eq!(**lhs, Expr::local("selector"));
                assert_eq!(**rhs, Expr::Int(0));
            }
            other => panic!("expected selector dispatch, got {other:?}"),
        }
    }

    #[test]
    fn call_targets_resolve_locals_first() {
        let c = parse_contract(
            "contract C { enter { var o, x; o := arg; x := call o(1); x := call other(2); } }",
        )
        .unwrap();
        let mut targets = Vec::new();
        fn walk(cmd: &Cmd, out: &mut Vec<CallTarget>) {
            match cmd {
                Cmd::Prim(PrimCmd::Call { target, .. }) => out.push(target.clone()),
                Cmd::Seq(a, b) | Cmd::If(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Cmd::While(_, a) => walk(a, out),
                _ => {}
            }
        }
        walk(&c.body, &mut targets);
        assert_eq!(
            targets,
            vec![
                CallTarget::Local("o".into()),
                CallTarget::Contract("other".into())
            ]
        );
    }
}
