//! Hand-rolled lexer. Tokens carry line/column for error reporting.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    // keywords
    Contract,
    Field,
    Map,
    Enter,
    Method,
    Var,
    If,
    Else,
    While,
    Assert,
    Call,
    Skip,
    Return,
    // punctuation and operators
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Dot,
    Assign, // :=
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::Eof => write!(f, "end of input"),
            other => write!(f, "`{}`", other.text()),
        }
    }
}

impl Tok {
    fn text(&self) -> &'static str {
        match self {
            Tok::Contract => "contract",
            Tok::Field => "field",
            Tok::Map => "map",
            Tok::Enter => "enter",
            Tok::Method => "method",
            Tok::Var => "var",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::While => "while",
            Tok::Assert => "assert",
            Tok::Call => "call",
            Tok::Skip => "skip",
            Tok::Return => "return",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Assign => ":=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            _ => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone)]
pub struct Lexed {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn lex(src: &str) -> Result<Vec<Lexed>, super::ParseError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            out.push(Lexed {
                tok: $tok,
                pos: Pos { line, col },
            });
            i += $len;
            col += $len as u32;
        }};
    }

    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            '/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '{' => push!(Tok::LBrace, 1),
            '}' => push!(Tok::RBrace, 1),
            '(' => push!(Tok::LParen, 1),
            ')' => push!(Tok::RParen, 1),
            '[' => push!(Tok::LBracket, 1),
            ']' => push!(Tok::RBracket, 1),
            ';' => push!(Tok::Semi, 1),
            ',' => push!(Tok::Comma, 1),
            '.' => push!(Tok::Dot, 1),
            '+' => push!(Tok::Plus, 1),
            '-' => push!(Tok::Minus, 1),
            '*' => push!(Tok::Star, 1),
            ':' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::Assign, 2),
            '=' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::EqEq, 2),
            '=' => push!(Tok::EqEq, 1), // `=` is accepted as equality
            '!' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::Ne, 2),
            '!' => push!(Tok::Bang, 1),
            '<' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::Le, 2),
            '<' => push!(Tok::Lt, 1),
            '>' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::Ge, 2),
            '>' => push!(Tok::Gt, 1),
            '&' if bytes.get(i + 1) == Some(&b'&') => push!(Tok::AndAnd, 2),
            '|' if bytes.get(i + 1) == Some(&b'|') => push!(Tok::OrOr, 2),
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text = &src[start..i];
                let n: i64 = text.parse().map_err(|_| super::ParseError {
                    line,
                    col,
                    msg: format!("integer literal `{text}` out of range"),
                })?;
                out.push(Lexed {
                    tok: Tok::Int(n),
                    pos: Pos { line, col },
                });
                col += (i - start) as u32;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let text = &src[start..i];
                let tok = match text {
                    "contract" => Tok::Contract,
                    "field" => Tok::Field,
                    "map" => Tok::Map,
                    "enter" => Tok::Enter,
                    "method" => Tok::Method,
                    "var" => Tok::Var,
                    "if" => Tok::If,
                    "else" => Tok::Else,
                    "while" => Tok::While,
                    "assert" => Tok::Assert,
                    "call" => Tok::Call,
                    "skip" => Tok::Skip,
                    "return" => Tok::Return,
                    "and" => Tok::AndAnd,
                    "or" => Tok::OrOr,
                    "not" => Tok::Bang,
                    _ => Tok::Ident(text.to_string()),
                };
                out.push(Lexed {
                    tok,
                    pos: Pos { line, col },
                });
                col += (i - start) as u32;
            }
            other => {
                return Err(super::ParseError {
                    line,
                    col,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    out.push(Lexed {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}
