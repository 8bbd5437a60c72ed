use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Logical variable, identified by its index within a clause or query scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var(pub u32);

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0;
        if n < 26 {
            write!(f, "{}", (b'A' + n as u8) as char)
        } else {
            write!(f, "V{n}")
        }
    }
}

/// A flat first-order term. The clause language has no function symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Sym(Arc<str>),
    Int(i64),
    Var(Var),
}

impl Term {
    pub fn sym(s: &str) -> Self {
        Term::Sym(Arc::from(s))
    }

    pub fn var(n: u32) -> Self {
        Term::Var(Var(n))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_var(&self) -> Option<Var> {
        match self {
            Term::Var(v) => Some(*v),
            _ => None,
        }
    }
}

impl From<i64> for Term {
    fn from(v: i64) -> Self {
        Term::Int(v)
    }
}

impl From<&str> for Term {
    fn from(s: &str) -> Self {
        Term::sym(s)
    }
}

/// True when `s` can be written without quotes.
fn is_bare_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn write_symbol(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    if is_bare_symbol(s) {
        return f.write_str(s);
    }
    f.write_char('\'')?;
    for c in s.chars() {
        match c {
            '\'' => f.write_str("\\'")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('\'')
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Sym(s) => write_symbol(f, s),
            Term::Int(i) => write!(f, "{i}"),
            Term::Var(v) => write!(f, "{v}"),
        }
    }
}

/// Predicate name and arity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredKey {
    pub name: Arc<str>,
    pub arity: usize,
}

impl PredKey {
    pub fn new(name: &str, arity: usize) -> Self {
        PredKey { name: Arc::from(name), arity }
    }
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub pred: Arc<str>,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Self {
        Atom { pred: Arc::from(pred), args }
    }

    pub fn with_pred(pred: Arc<str>, args: Vec<Term>) -> Self {
        Atom { pred, args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn key(&self) -> PredKey {
        PredKey { name: self.pred.clone(), arity: self.args.len() }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.args.iter().filter_map(Term::as_var)
    }

    pub fn apply(&self, subst: &Substitution) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().map(|t| subst.apply_term(t)).collect(),
        }
    }

    /// Adds `offset` to every variable index.
    pub fn shift_vars(&self, offset: u32) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(Var(n)) => Term::Var(Var(n + offset)),
                    other => other.clone(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_symbol(f, &self.pred)?;
        if self.args.is_empty() {
            return Ok(());
        }
        f.write_str("(")?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// A definite clause `head :- body`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn new(head: Atom, body: Vec<Atom>) -> Self {
        Clause { head, body }
    }

    pub fn fact(head: Atom) -> Self {
        Clause { head, body: Vec::new() }
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Number of literals, head included.
    pub fn len(&self) -> usize {
        1 + self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// One past the largest variable index used by the clause.
    pub fn var_span(&self) -> u32 {
        std::iter::once(&self.head)
            .chain(self.body.iter())
            .flat_map(|a| a.vars())
            .map(|v| v.0 + 1)
            .max()
            .unwrap_or(0)
    }

    /// Renumbers variables in first-occurrence order (head first, then body).
    pub fn normalized(&self) -> Clause {
        let mut map: BTreeMap<Var, Var> = BTreeMap::new();
        let mut rename = |a: &Atom| Atom {
            pred: a.pred.clone(),
            args: a
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => {
                        let next = Var(map.len() as u32);
                        Term::Var(*map.entry(*v).or_insert(next))
                    }
                    other => other.clone(),
                })
                .collect(),
        };
        let head = rename(&self.head);
        let body = self.body.iter().map(&mut rename).collect();
        Clause { head, body }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, b) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{b}")?;
            }
        }
        f.write_str(".")
    }
}

/// An ordered list of definite clauses.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub clauses: Vec<Clause>,
}

impl Program {
    pub fn new(clauses: Vec<Clause>) -> Self {
        Program { clauses }
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    /// Program size in literals (heads included).
    pub fn literal_count(&self) -> usize {
        self.clauses.iter().map(Clause::len).sum()
    }

    pub fn extend(&mut self, other: &Program) {
        self.clauses.extend(other.clauses.iter().cloned());
    }

    pub fn defines(&self, key: &PredKey) -> bool {
        self.clauses.iter().any(|c| &c.head.key() == key)
    }

    /// Clauses whose head predicate is `key`, in program order.
    pub fn clauses_for<'a>(&'a self, key: &'a PredKey) -> impl Iterator<Item = &'a Clause> + 'a {
        self.clauses.iter().filter(move |c| &c.head.key() == key)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A mapping from variables to terms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Substitution(pub BTreeMap<Var, Term>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: Var) -> Option<&Term> {
        self.0.get(&v)
    }

    pub fn insert(&mut self, v: Var, t: Term) {
        self.0.insert(v, t);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Follows variable bindings to the final term.
    pub fn walk(&self, t: &Term) -> Term {
        let mut cur = t.clone();
        while let Term::Var(v) = &cur {
            match self.0.get(v) {
                Some(next) if next != &cur => cur = next.clone(),
                _ => break,
            }
        }
        cur
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        self.walk(t)
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}/{t}")?;
        }
        f.write_str("}")
    }
}

/// Most general unifier of two atoms, or `None`.
///
/// Both atoms live in one variable namespace. Terms are flat so the occurs
/// check reduces to skipping `X = X`.
pub fn unify(a: &Atom, b: &Atom) -> Option<Substitution> {
    if a.pred != b.pred || a.args.len() != b.args.len() {
        return None;
    }
    let mut s = Substitution::new();
    for (x, y) in a.args.iter().zip(&b.args) {
        unify_terms(&mut s, x, y)?;
    }
    // resolve chains so the result is idempotent
    let keys: Vec<Var> = s.0.keys().copied().collect();
    for k in keys {
        let t = s.walk(&Term::Var(k));
        s.0.insert(k, t);
    }
    Some(s)
}

fn unify_terms(s: &mut Substitution, x: &Term, y: &Term) -> Option<()> {
    let x = s.walk(x);
    let y = s.walk(y);
    match (&x, &y) {
        _ if x == y => Some(()),
        (Term::Var(v), _) => {
            s.insert(*v, y);
            Some(())
        }
        (_, Term::Var(v)) => {
            s.insert(*v, x);
            Some(())
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(args: Vec<Term>) -> Atom {
        Atom::new("p", args)
    }

    #[test]
    fn unify_binds_variable() {
        let s = unify(&p(vec![Term::var(0)]), &p(vec![Term::sym("a")])).unwrap();
        assert_eq!(s.get(Var(0)), Some(&Term::sym("a")));
    }

    #[test]
    fn unify_constant_clash() {
        assert!(unify(&p(vec![Term::sym("a")]), &p(vec![Term::sym("b")])).is_none());
    }

    #[test]
    fn unify_repeated_variable_clash() {
        let a = p(vec![Term::var(0), Term::var(0)]);
        let b = p(vec![Term::sym("a"), Term::sym("b")]);
        assert!(unify(&a, &b).is_none());
    }

    #[test]
    fn unify_var_chain_resolves() {
        let a = p(vec![Term::var(0), Term::var(0)]);
        let b = p(vec![Term::var(1), Term::Int(3)]);
        let s = unify(&a, &b).unwrap();
        assert_eq!(s.walk(&Term::var(0)), Term::Int(3));
        assert_eq!(s.walk(&Term::var(1)), Term::Int(3));
    }

    #[test]
    fn var_names() {
        assert_eq!(Var(0).to_string(), "A");
        assert_eq!(Var(25).to_string(), "Z");
        assert_eq!(Var(26).to_string(), "V26");
    }

    #[test]
    fn symbols_quote_when_needed() {
        assert_eq!(Term::sym("drawn").to_string(), "drawn");
        assert_eq!(Term::sym("LIST").to_string(), "'LIST'");
        assert_eq!(Term::sym("it's").to_string(), "'it\\'s'");
    }
}
