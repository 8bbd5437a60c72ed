//! Text syntax for clauses: `head(A) :- b1(A,B), b2(B).`
//!
//! Constants are lowercase identifiers, integers, or quoted with `'...'`
//! (a leading backtick is accepted as an opening quote). Variables start with
//! an uppercase letter or `_`; a lone `_` is anonymous. `%` starts a comment.

use std::collections::HashMap;

use thiserror::Error;

use super::term::{Atom, Clause, Program, Term, Var};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("syntax error at line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

struct Parser<'s> {
    src: &'s [u8],
    text: &'s str,
    pos: usize,
    vars: HashMap<String, Var>,
    next_var: u32,
}

impl<'s> Parser<'s> {
    fn new(text: &'s str) -> Self {
        Parser { src: text.as_bytes(), text, pos: 0, vars: HashMap::new(), next_var: 0 }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let before = &self.text[..self.pos.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Err(ParseError { line, col, msg: msg.into() })
    }

    fn reset_scope(&mut self) {
        self.vars.clear();
        self.next_var = 0;
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else if c == b'%' {
                while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn ident(&mut self) -> &'s str {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        &self.text[start..self.pos]
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        // opening quote already consumed
        let mut out = String::new();
        let mut chars = self.text[self.pos..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\'' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, e)) => out.push(e),
                    None => break,
                },
                c => out.push(c),
            }
        }
        self.pos = self.src.len();
        self.err("unterminated quoted constant")
    }

    fn symbol(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(b'\'') | Some(b'`') => {
                self.pos += 1;
                self.quoted()
            }
            Some(c) if c.is_ascii_lowercase() => Ok(self.ident().to_string()),
            _ => self.err("expected predicate name"),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(b'\'') | Some(b'`') => {
                self.pos += 1;
                Ok(Term::sym(&self.quoted()?))
            }
            Some(c) if c.is_ascii_digit() || c == b'-' => {
                let start = self.pos;
                self.pos += 1;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                match self.text[start..self.pos].parse::<i64>() {
                    Ok(v) => Ok(Term::Int(v)),
                    Err(_) => {
                        self.pos = start;
                        self.err("invalid integer")
                    }
                }
            }
            Some(c) if c.is_ascii_lowercase() => Ok(Term::sym(self.ident())),
            Some(c) if c.is_ascii_uppercase() || c == b'_' => {
                let name = self.ident().to_string();
                let v = if name == "_" {
                    let v = Var(self.next_var);
                    self.next_var += 1;
                    v
                } else {
                    let next = Var(self.next_var);
                    let v = *self.vars.entry(name).or_insert(next);
                    if v == next {
                        self.next_var += 1;
                    }
                    v
                };
                Ok(Term::Var(v))
            }
            _ => self.err("expected term"),
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let pred = self.symbol()?;
        let mut args = Vec::new();
        if self.eat("(") {
            loop {
                args.push(self.term()?);
                if self.eat(",") {
                    continue;
                }
                self.expect(")")?;
                break;
            }
        }
        Ok(Atom::new(&pred, args))
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        self.reset_scope();
        let head = self.atom()?;
        let mut body = Vec::new();
        if self.eat(":-") {
            loop {
                body.push(self.atom()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(".")?;
        Ok(Clause::new(head, body))
    }
}

/// Parses a whole program (zero or more clauses).
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(text);
    let mut clauses = Vec::new();
    while !p.at_end() {
        clauses.push(p.clause()?);
    }
    Ok(Program::new(clauses))
}

pub fn parse_clause(text: &str) -> Result<Clause, ParseError> {
    let mut p = Parser::new(text);
    let c = p.clause()?;
    if !p.at_end() {
        return p.err("trailing input after clause");
    }
    Ok(c)
}

/// Parses a comma-separated conjunction, optionally terminated by `.`.
/// Variables share one scope across the conjunction.
pub fn parse_conjunction(text: &str) -> Result<Vec<Atom>, ParseError> {
    let mut p = Parser::new(text);
    let mut atoms = vec![p.atom()?];
    while p.eat(",") {
        atoms.push(p.atom()?);
    }
    p.eat(".");
    if !p.at_end() {
        return p.err("trailing input after conjunction");
    }
    Ok(atoms)
}

pub fn parse_atom(text: &str) -> Result<Atom, ParseError> {
    let mut atoms = parse_conjunction(text)?;
    if atoms.len() != 1 {
        return Err(ParseError { line: 1, col: 1, msg: "expected a single atom".into() });
    }
    Ok(atoms.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_clause() {
        let c = parse_clause("header(A) :- above_below(A,B), cell_contains(B, 'LIST').").unwrap();
        assert_eq!(c.body.len(), 2);
        assert_eq!(c.body[1].args[1], Term::sym("LIST"));
        assert_eq!(c.to_string(), "header(A) :- above_below(A,B), cell_contains(B,'LIST').");
    }

    #[test]
    fn accepts_backtick_quote() {
        let c = parse_clause("header(A) :- cell_contains(A, `LIST').").unwrap();
        assert_eq!(c.body[0].args[1], Term::sym("LIST"));
    }

    #[test]
    fn variables_numbered_by_first_occurrence() {
        let c = parse_clause("materials(X,Y) :- succ(Z,X), above_below(Y,W), materials(Z,W).").unwrap();
        assert_eq!(
            c.to_string(),
            "materials(A,B) :- succ(C,A), above_below(B,D), materials(C,D)."
        );
    }

    #[test]
    fn program_with_comments_and_facts() {
        let p = parse_program("% facts\nq(a).\nq(1).\np(X) :- q(X). % rule\n").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.clauses[1].head.args[0], Term::Int(1));
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let c = parse_clause("p(_, _).").unwrap();
        assert_ne!(c.head.args[0], c.head.args[1]);
    }

    #[test]
    fn reports_position() {
        let e = parse_program("p(a).\nq(b :- r.").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn negative_integer() {
        assert_eq!(parse_atom("pld(w,-1,-1)").unwrap().args[1], Term::Int(-1));
    }
}
