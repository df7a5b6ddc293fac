//! Concrete syntax: parsing and printing of programs and stores.
//!
//! Grammar (`;` and the extension operators are right-associative; the
//! extension operators bind tighter than `;`):
//!
//! ```text
//! program := choice (';' program)?
//! choice  := unary (('<|' | '\/') choice)?
//! unary   := 'skip' | ident ':=' expr | 'while' expr '{' program '}'
//!          | 'floor' '(' program ')' | 'ceil' '(' program ')' | '(' program ')'
//! expr    := mul (('+' | '-') mul)*      (left-associative)
//! mul     := atom ('*' atom)*
//! atom    := number | ident | '(' expr ')'
//! ```
//!
//! Stores are comma-separated bindings `x=1,y=2`; the empty string (or `∅`)
//! is the all-zero store.

use std::fmt;

use thiserror::Error;

use super::expr::Expr;
use super::store::Store;
use crate::syntax::{Program, Term};

/// The operator kinds of the language, with their canonical operator names.
/// Assignments and loop headers carry their expression, so each distinct
/// assignment or loop condition is its own constant or unary operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WhileOp {
    Skip,
    Assign(String, Expr),
    Seq,
    While(Expr),
    Floor,
    Interleave,
    Branch,
    Ceil,
}

impl WhileOp {
    pub fn name(&self) -> String {
        match self {
            WhileOp::Skip => "skip".to_string(),
            WhileOp::Assign(x, e) => format!("{x} := {e}"),
            WhileOp::Seq => ";".to_string(),
            WhileOp::While(e) => format!("while {e}"),
            WhileOp::Floor => "floor".to_string(),
            WhileOp::Interleave => "<|".to_string(),
            WhileOp::Branch => "\\/".to_string(),
            WhileOp::Ceil => "ceil".to_string(),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            WhileOp::Skip | WhileOp::Assign(_, _) => 0,
            WhileOp::While(_) | WhileOp::Floor | WhileOp::Ceil => 1,
            WhileOp::Seq | WhileOp::Interleave | WhileOp::Branch => 2,
        }
    }

    /// Recovers the operator kind from a canonical operator name.
    pub fn from_name(name: &str) -> Option<WhileOp> {
        match name {
            "skip" => return Some(WhileOp::Skip),
            ";" => return Some(WhileOp::Seq),
            "floor" => return Some(WhileOp::Floor),
            "ceil" => return Some(WhileOp::Ceil),
            "<|" => return Some(WhileOp::Interleave),
            "\\/" => return Some(WhileOp::Branch),
            _ => {}
        }
        if let Some(rest) = name.strip_prefix("while ") {
            return parse_expr_text(rest).ok().map(WhileOp::While);
        }
        if let Some((var, expr)) = name.split_once(" := ") {
            if is_ident(var) {
                return parse_expr_text(expr)
                    .ok()
                    .map(|e| WhileOp::Assign(var.to_string(), e));
            }
        }
        None
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at {pos}: {message}")]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
}

const KEYWORDS: &[&str] = &["skip", "while", "floor", "ceil"];

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Parser<'a> {
        Parser {
            input: text.as_bytes(),
            pos: 0,
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            pos: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }


    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.input[self.pos..].starts_with(token.as_bytes()) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        if self.eat(token) {
            Ok(())
        } else {
            self.error(format!("expected `{token}`"))
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        let mut end = start;
        if end < self.input.len()
            && (self.input[end].is_ascii_alphabetic() || self.input[end] == b'_')
        {
            end += 1;
            while end < self.input.len()
                && (self.input[end].is_ascii_alphanumeric() || self.input[end] == b'_')
            {
                end += 1;
            }
        }
        if end == start {
            return None;
        }
        self.pos = end;
        Some(String::from_utf8_lossy(&self.input[start..end]).into_owned())
    }

    fn number(&mut self) -> Option<u64> {
        self.skip_ws();
        let start = self.pos;
        let mut end = start;
        while end < self.input.len() && self.input[end].is_ascii_digit() {
            end += 1;
        }
        if end == start {
            return None;
        }
        self.pos = end;
        std::str::from_utf8(&self.input[start..end])
            .ok()?
            .parse()
            .ok()
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.input.len()
    }

    // expressions

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul()?;
        loop {
            if self.eat("+") {
                lhs = Expr::add(lhs, self.mul()?);
            } else if self.eat("-") {
                lhs = Expr::monus(lhs, self.mul()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn mul(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.atom()?;
        while self.eat("*") {
            lhs = Expr::mul(lhs, self.atom()?);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        if self.eat("(") {
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        if let Some(n) = self.number() {
            return Ok(Expr::Const(n));
        }
        if let Some(id) = self.ident() {
            return Ok(Expr::Var(id));
        }
        self.error("expected a number, variable, or parenthesized expression")
    }

    // programs

    fn program(&mut self) -> Result<Term, ParseError> {
        let first = self.choice()?;
        if self.eat(";") {
            let rest = self.program()?;
            return Ok(Term::node(WhileOp::Seq.name(), vec![first, rest]));
        }
        Ok(first)
    }

    fn choice(&mut self) -> Result<Term, ParseError> {
        let first = self.unary()?;
        if self.eat("<|") {
            let rest = self.choice()?;
            return Ok(Term::node(WhileOp::Interleave.name(), vec![first, rest]));
        }
        if self.eat("\\/") {
            let rest = self.choice()?;
            return Ok(Term::node(WhileOp::Branch.name(), vec![first, rest]));
        }
        Ok(first)
    }

    fn unary(&mut self) -> Result<Term, ParseError> {
        if self.eat("(") {
            let p = self.program()?;
            self.expect(")")?;
            return Ok(p);
        }
        self.skip_ws();
        let at = self.pos;
        let Some(id) = self.ident() else {
            return self.error("expected a statement");
        };
        match id.as_str() {
            "skip" => Ok(Term::constant(WhileOp::Skip.name())),
            "while" => {
                let cond = self.expr()?;
                self.expect("{")?;
                let body = self.program()?;
                self.expect("}")?;
                Ok(Term::node(WhileOp::While(cond).name(), vec![body]))
            }
            "floor" | "ceil" => {
                self.expect("(")?;
                let body = self.program()?;
                self.expect(")")?;
                let op = if id == "floor" {
                    WhileOp::Floor
                } else {
                    WhileOp::Ceil
                };
                Ok(Term::node(op.name(), vec![body]))
            }
            _ => {
                if KEYWORDS.contains(&id.as_str()) {
                    self.pos = at;
                    return self.error(format!("misplaced keyword `{id}`"));
                }
                self.expect(":=")?;
                let e = self.expr()?;
                Ok(Term::constant(WhileOp::Assign(id, e).name()))
            }
        }
    }
}

/// Parses a program in concrete syntax.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(text);
    let term = p.program()?;
    if !p.at_end() {
        return p.error("trailing input after program");
    }
    Ok(Program::from_term_unchecked(term))
}

/// Parses an expression alone; used to recover operator payloads from
/// canonical names.
pub(crate) fn parse_expr_text(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text);
    let e = p.expr()?;
    if !p.at_end() {
        return p.error("trailing input after expression");
    }
    Ok(e)
}

/// Parses a store: comma-separated `x=1` bindings; empty (or `∅`) is the
/// all-zero store.
pub fn parse_store(text: &str) -> Result<Store, ParseError> {
    let trimmed = text.trim();
    if trimmed.is_empty() || trimmed == "∅" {
        return Ok(Store::empty());
    }
    let mut store = Store::empty();
    let mut offset = 0;
    for part in trimmed.split(',') {
        let err = |message: String| ParseError {
            pos: offset,
            message,
        };
        let (var, value) = part
            .split_once('=')
            .ok_or_else(|| err(format!("expected `var=value`, found `{part}`")))?;
        let var = var.trim();
        if !is_ident(var) {
            return Err(err(format!("`{var}` is not a variable name")));
        }
        let value: u64 = value
            .trim()
            .parse()
            .map_err(|_| err(format!("`{}` is not a natural number", value.trim())))?;
        store = store.with(var, value);
        offset += part.len() + 1;
    }
    Ok(store)
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

enum Level {
    Seq,
    Choice,
    Unary,
}

fn print_at(term: &Term, level: Level, out: &mut String) {
    let op_kind = match term {
        Term::Hole => {
            out.push_str("[]");
            return;
        }
        Term::Var(v) => {
            out.push_str(&v.to_string());
            return;
        }
        Term::Node { op, .. } => WhileOp::from_name(op),
    };
    let Term::Node { op, children } = term else {
        unreachable!()
    };
    let Some(kind) = op_kind else {
        // not a corpus operator: fall back to the applicative form
        out.push_str(&term.to_string());
        return;
    };
    let parens = match (&kind, &level) {
        (WhileOp::Seq, Level::Seq) => false,
        (WhileOp::Seq, _) => true,
        (WhileOp::Interleave | WhileOp::Branch, Level::Unary) => true,
        _ => false,
    };
    if parens {
        out.push('(');
    }
    match kind {
        WhileOp::Skip | WhileOp::Assign(_, _) => out.push_str(op),
        WhileOp::Seq => {
            print_at(&children[0], Level::Choice, out);
            out.push_str(" ; ");
            print_at(&children[1], Level::Seq, out);
        }
        WhileOp::Interleave | WhileOp::Branch => {
            let symbol = if matches!(kind, WhileOp::Interleave) {
                " <| "
            } else {
                " \\/ "
            };
            print_at(&children[0], Level::Unary, out);
            out.push_str(symbol);
            print_at(&children[1], Level::Choice, out);
        }
        WhileOp::While(_) => {
            out.push_str(op);
            out.push_str(" { ");
            print_at(&children[0], Level::Seq, out);
            out.push_str(" }");
        }
        WhileOp::Floor | WhileOp::Ceil => {
            out.push_str(op);
            out.push('(');
            print_at(&children[0], Level::Seq, out);
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
}

/// Renders a term in the concrete syntax, with `[]` for holes. Operators
/// outside this language print applicatively.
pub fn print_term(term: &Term) -> String {
    let mut out = String::new();
    print_at(term, Level::Seq, &mut out);
    out
}

/// Renders a program in the concrete syntax.
pub fn print_program(program: &Program) -> String {
    print_term(program.term())
}

impl fmt::Display for WhileOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_write_through_program() {
        let p = parse_program("x := 1 ; y := x").unwrap();
        assert_eq!(
            p.term(),
            &Term::node(
                ";",
                vec![Term::constant("x := 1"), Term::constant("y := x")]
            )
        );
    }

    #[test]
    fn empty_store_parses() {
        assert_eq!(parse_store("").unwrap(), Store::empty());
        assert_eq!(parse_store("∅").unwrap(), Store::empty());
        assert_eq!(
            parse_store("x=1,y=2").unwrap(),
            Store::empty().with("x", 1).with("y", 2)
        );
    }

    #[test]
    fn while_braces_parse() {
        let p = parse_program("while 1 { skip }").unwrap();
        assert_eq!(
            p.term(),
            &Term::node("while 1", vec![Term::constant("skip")])
        );
    }

    #[test]
    fn sequencing_is_right_associative() {
        let plain = parse_program("skip ; skip ; x := 1").unwrap();
        let explicit = parse_program("skip ; (skip ; x := 1)").unwrap();
        assert_eq!(plain, explicit);
        let left = parse_program("(skip ; skip) ; x := 1").unwrap();
        assert_ne!(plain, left);
    }

    #[test]
    fn extension_operators_parse() {
        let p = parse_program("floor(x := 1) ; ceil(skip)").unwrap();
        assert_eq!(print_program(&p), "floor(x := 1) ; ceil(skip)");
        let p = parse_program("skip <| x := 1 \\/ skip").unwrap();
        assert_eq!(print_program(&p), "skip <| x := 1 \\/ skip");
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse_program("x := ").unwrap_err();
        assert_eq!(err.pos, 5);
        let err = parse_program("while x skip").unwrap_err();
        assert!(err.message.contains("expected `{`"));
        let err = parse_store("x=").unwrap_err();
        assert!(err.message.contains("natural number"));
    }

    #[test]
    fn print_parse_round_trips() {
        let texts = [
            "skip",
            "x := x + 1 ; (y := 2 ; skip)",
            "while x - 1 { x := x - 1 ; y := y * 2 }",
            "floor(while 1 { skip })",
            "(x := 1 ; x := 2) <| skip",
            "ceil(x := (x + 1) * 2)",
            "(skip <| skip) \\/ x := 0",
        ];
        for text in texts {
            let p = parse_program(text).unwrap();
            let printed = print_program(&p);
            let again = parse_program(&printed)
                .unwrap_or_else(|e| panic!("reparse of `{printed}` failed: {e}"));
            assert_eq!(p, again, "round trip through `{printed}`");
        }
    }

    #[test]
    fn op_names_round_trip() {
        let ops = [
            WhileOp::Skip,
            WhileOp::Assign("x".into(), Expr::add(Expr::var("x"), Expr::Const(1))),
            WhileOp::Seq,
            WhileOp::While(Expr::monus(Expr::var("y"), Expr::Const(2))),
            WhileOp::Floor,
            WhileOp::Interleave,
            WhileOp::Branch,
            WhileOp::Ceil,
        ];
        for op in ops {
            assert_eq!(WhileOp::from_name(&op.name()), Some(op.clone()), "{op:?}");
        }
    }
}
