//! Arithmetic formula DSL for derived-column conditions.
//!
//! Infix over `{+, -, *, /}` (unicode `×`/`÷` accepted on input), decimal
//! literals, unary minus, parentheses. Column names are bare identifiers or
//! backquoted when they contain spaces or other non-identifier characters.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FormulaExpr {
    Col(String),
    Lit(f64),
    Neg(Box<FormulaExpr>),
    Add(Box<FormulaExpr>, Box<FormulaExpr>),
    Sub(Box<FormulaExpr>, Box<FormulaExpr>),
    Mul(Box<FormulaExpr>, Box<FormulaExpr>),
    Div(Box<FormulaExpr>, Box<FormulaExpr>),
}

impl FormulaExpr {
    /// Columns referenced anywhere in the expression.
    pub fn columns(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns(&self, out: &mut BTreeSet<String>) {
        match self {
            FormulaExpr::Col(name) => {
                out.insert(name.clone());
            }
            FormulaExpr::Lit(_) => {}
            FormulaExpr::Neg(inner) => inner.collect_columns(out),
            FormulaExpr::Add(a, b)
            | FormulaExpr::Sub(a, b)
            | FormulaExpr::Mul(a, b)
            | FormulaExpr::Div(a, b) => {
                a.collect_columns(out);
                b.collect_columns(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            FormulaExpr::Add(..) | FormulaExpr::Sub(..) => 1,
            FormulaExpr::Mul(..) | FormulaExpr::Div(..) => 2,
            FormulaExpr::Neg(..) => 3,
            FormulaExpr::Col(_) | FormulaExpr::Lit(_) => 4,
        }
    }
}

/// Canonical rendering: minimal parentheses, re-parses to an equal AST.
impl fmt::Display for FormulaExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Right operands at the same precedence level are parenthesized so
        // left associativity survives the round trip.
        fn write_at(e: &FormulaExpr, min_level: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let level = e.precedence();
            if level < min_level {
                write!(f, "(")?;
                write_node(e, f)?;
                write!(f, ")")
            } else {
                write_node(e, f)
            }
        }
        fn write_node(e: &FormulaExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match e {
                FormulaExpr::Col(name) => {
                    if is_bare_identifier(name) {
                        write!(f, "{name}")
                    } else {
                        write!(f, "`{name}`")
                    }
                }
                FormulaExpr::Lit(v) => write!(f, "{v}"),
                FormulaExpr::Neg(inner) => {
                    write!(f, "-")?;
                    write_at(inner, 4, f)
                }
                FormulaExpr::Add(a, b) => {
                    write_at(a, 1, f)?;
                    write!(f, " + ")?;
                    write_at(b, 2, f)
                }
                FormulaExpr::Sub(a, b) => {
                    write_at(a, 1, f)?;
                    write!(f, " - ")?;
                    write_at(b, 2, f)
                }
                FormulaExpr::Mul(a, b) => {
                    write_at(a, 2, f)?;
                    write!(f, " * ")?;
                    write_at(b, 3, f)
                }
                FormulaExpr::Div(a, b) => {
                    write_at(a, 2, f)?;
                    write!(f, " / ")?;
                    write_at(b, 3, f)
                }
            }
        }
        write_at(self, 0, f)
    }
}

fn is_bare_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Token, usize)>> {
        let mut lexer = Lexer { src, pos: 0 };
        let mut tokens = Vec::new();
        while let Some((tok, offset)) = lexer.next_token()? {
            tokens.push((tok, offset));
        }
        Ok(tokens)
    }

    fn next_token(&mut self) -> Result<Option<(Token, usize)>> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos] as char).is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= bytes.len() {
            return Ok(None);
        }
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let c = rest.chars().next().unwrap();
        let tok = match c {
            '+' => {
                self.pos += 1;
                Token::Plus
            }
            '-' | '−' => {
                self.pos += c.len_utf8();
                Token::Minus
            }
            '*' | '×' => {
                self.pos += c.len_utf8();
                Token::Star
            }
            '/' | '÷' => {
                self.pos += c.len_utf8();
                Token::Slash
            }
            '(' => {
                self.pos += 1;
                Token::LParen
            }
            ')' => {
                self.pos += 1;
                Token::RParen
            }
            '`' => {
                let inner = &rest[1..];
                match inner.find('`') {
                    Some(end) => {
                        let name = &inner[..end];
                        self.pos += 2 + end;
                        Token::Ident(name.to_string())
                    }
                    None => {
                        return Err(CoreError::FormulaSyntax {
                            offset: start,
                            message: "unterminated backquoted identifier".into(),
                        })
                    }
                }
            }
            c if c.is_ascii_digit() || c == '.' => {
                let end = rest
                    .find(|ch: char| !(ch.is_ascii_digit() || ch == '.'))
                    .unwrap_or(rest.len());
                let text = &rest[..end];
                let value: f64 = text.parse().map_err(|_| CoreError::FormulaSyntax {
                    offset: start,
                    message: format!("invalid numeric literal '{text}'"),
                })?;
                self.pos += end;
                Token::Number(value)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let end = rest
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                    .unwrap_or(rest.len());
                self.pos += end;
                Token::Ident(rest[..end].to_string())
            }
            other => {
                return Err(CoreError::FormulaSyntax {
                    offset: start,
                    message: format!("unknown token '{other}'"),
                })
            }
        };
        Ok(Some((tok, start)))
    }
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    src_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn advance(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        tok
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, o)| *o)
            .unwrap_or(self.src_len)
    }

    fn expr(&mut self) -> Result<FormulaExpr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.advance();
                    let rhs = self.term()?;
                    lhs = FormulaExpr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus) => {
                    self.advance();
                    let rhs = self.term()?;
                    lhs = FormulaExpr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<FormulaExpr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.advance();
                    let rhs = self.unary()?;
                    lhs = FormulaExpr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Slash) => {
                    self.advance();
                    let rhs = self.unary()?;
                    lhs = FormulaExpr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<FormulaExpr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.advance();
            let inner = self.unary()?;
            return Ok(FormulaExpr::Neg(Box::new(inner)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<FormulaExpr> {
        let offset = self.offset();
        match self.advance() {
            Some(Token::Number(v)) => Ok(FormulaExpr::Lit(v)),
            Some(Token::Ident(name)) => Ok(FormulaExpr::Col(name)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.advance() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(CoreError::FormulaSyntax {
                        offset: self.offset(),
                        message: "expected ')'".into(),
                    }),
                }
            }
            other => Err(CoreError::FormulaSyntax {
                offset,
                message: format!("expected value, found {other:?}"),
            }),
        }
    }
}

/// Parses infix arithmetic with standard precedence and left associativity.
pub fn parse_formula(text: &str) -> Result<FormulaExpr> {
    let tokens = Lexer::tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        src_len: text.len(),
    };
    let expr = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(CoreError::FormulaSyntax {
            offset: parser.offset(),
            message: "unexpected trailing input".into(),
        });
    }
    Ok(expr)
}

/// IEEE-754 double evaluation against a column resolver.
///
/// Division by an exactly-zero denominator is an explicit error.
pub fn eval_formula(
    expr: &FormulaExpr,
    resolve: &mut dyn FnMut(&str) -> Result<f64>,
) -> Result<f64> {
    match expr {
        FormulaExpr::Col(name) => resolve(name),
        FormulaExpr::Lit(v) => Ok(*v),
        FormulaExpr::Neg(inner) => Ok(-eval_formula(inner, resolve)?),
        FormulaExpr::Add(a, b) => Ok(eval_formula(a, resolve)? + eval_formula(b, resolve)?),
        FormulaExpr::Sub(a, b) => Ok(eval_formula(a, resolve)? - eval_formula(b, resolve)?),
        FormulaExpr::Mul(a, b) => Ok(eval_formula(a, resolve)? * eval_formula(b, resolve)?),
        FormulaExpr::Div(a, b) => {
            let num = eval_formula(a, resolve)?;
            let den = eval_formula(b, resolve)?;
            if den == 0.0 {
                return Err(CoreError::DivisionByZero(b.to_string()));
            }
            Ok(num / den)
        }
    }
}

/// Evaluates against one table row (numeric columns only).
pub fn eval_formula_at(expr: &FormulaExpr, table: &crate::table::Table, row: usize) -> Result<f64> {
    eval_formula(expr, &mut |name| {
        let col = table.column_index(name)?;
        match table.cell(row, col) {
            crate::table::Cell::Number(v) => Ok(v),
            crate::table::Cell::Timestamp(s) => Ok(s as f64),
            crate::table::Cell::Missing => Err(CoreError::MissingCell {
                row,
                column: name.to_string(),
            }),
            crate::table::Cell::Category(_) => Err(CoreError::KindMismatch {
                column: name.to_string(),
                expected: "numeric".into(),
                actual: "categorical".into(),
            }),
        }
    })
}
