//! Depth-bounded SLD resolution.
//!
//! The depth limit bounds the number of nested rule applications along any
//! branch of a proof tree. Matching a fact, or a program clause with an empty
//! body, costs nothing. A derivation that would exceed the limit is cut
//! silently, so `prove` with a larger limit always returns a superset.
//!
//! Ground goals for predicates that have rules are tabled within one call:
//! a ground goal provable with `d` remaining levels is provable with any
//! `d' >= d`, and one that fails with `d` fails with any `d' <= d`. Answers
//! equal those of untabled evaluation (as a set).

use std::collections::{HashMap, HashSet};

use super::facts::FactIndex;
use super::term::{Atom, Clause, PredKey, Program, Substitution, Term, Var};

pub const DEFAULT_DEPTH: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProveOptions {
    pub depth_limit: u32,
    /// Whether placeholder variables in facts may be bound during a proof.
    pub bind_placeholders: bool,
    pub tabling: bool,
}

impl Default for ProveOptions {
    fn default() -> Self {
        ProveOptions { depth_limit: DEFAULT_DEPTH, bind_placeholders: true, tabling: true }
    }
}

impl ProveOptions {
    pub fn with_depth(depth_limit: u32) -> Self {
        ProveOptions { depth_limit, ..Default::default() }
    }
}

/// Facts and rules visible to one proof. Borrowed, so assembling one per
/// query is cheap.
#[derive(Debug, Default, Clone)]
pub struct KnowledgeBase<'a> {
    facts: Vec<&'a FactIndex>,
    rules: HashMap<PredKey, Vec<&'a Clause>>,
}

impl<'a> KnowledgeBase<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_facts(&mut self, facts: &'a FactIndex) -> &mut Self {
        self.facts.push(facts);
        self
    }

    pub fn add_program(&mut self, program: &'a Program) -> &mut Self {
        for c in &program.clauses {
            self.add_clause(c);
        }
        self
    }

    pub fn add_clause(&mut self, clause: &'a Clause) -> &mut Self {
        self.rules.entry(clause.head.key()).or_default().push(clause);
        self
    }

    pub fn has_rules(&self, key: &PredKey) -> bool {
        self.rules.contains_key(key)
    }

    pub fn defines(&self, key: &PredKey) -> bool {
        self.has_rules(key) || self.facts.iter().any(|f| f.has_pred(key))
    }
}

/// All answer substitutions for `goal`, restricted to its variables, in
/// discovery order.
pub fn prove(kb: &KnowledgeBase<'_>, goal: &Atom, opts: ProveOptions) -> Vec<Substitution> {
    prove_conjunction(kb, std::slice::from_ref(goal), opts)
}

/// All answer substitutions for a conjunction of goals sharing variables.
pub fn prove_conjunction(
    kb: &KnowledgeBase<'_>,
    goals: &[Atom],
    opts: ProveOptions,
) -> Vec<Substitution> {
    let query_vars: Vec<Var> = {
        let mut seen = HashSet::new();
        goals.iter().flat_map(|g| g.vars()).filter(|v| seen.insert(*v)).collect()
    };
    let mut engine = Engine::new(kb, opts, goals);
    let mut stack = initial_stack(goals, opts.depth_limit);
    let mut answers = Vec::new();
    let mut seen = HashSet::new();
    engine.solve(&mut stack, &mut |e| {
        let mut s = Substitution::new();
        for &v in &query_vars {
            let t = e.walk(&Term::Var(v));
            if t != Term::Var(v) {
                s.insert(v, t);
            }
        }
        if seen.insert(s.clone()) {
            answers.push(s);
        }
        true
    });
    answers
}

/// True when the conjunction has at least one proof.
pub fn holds(kb: &KnowledgeBase<'_>, goals: &[Atom], opts: ProveOptions) -> bool {
    let mut engine = Engine::new(kb, opts, goals);
    let mut stack = initial_stack(goals, opts.depth_limit);
    let mut found = false;
    engine.solve(&mut stack, &mut |_| {
        found = true;
        false
    });
    found
}

fn initial_stack(goals: &[Atom], depth: u32) -> Vec<Goal> {
    goals.iter().rev().map(|a| Goal { atom: a.clone(), depth }).collect()
}

#[derive(Debug, Clone)]
struct Goal {
    atom: Atom,
    depth: u32,
}

#[derive(Debug, Default, Clone, Copy)]
struct Memo {
    proven_at: Option<u32>,
    failed_at: Option<u32>,
}

struct Engine<'k, 'a> {
    kb: &'k KnowledgeBase<'a>,
    opts: ProveOptions,
    store: Vec<Option<Term>>,
    trail: Vec<u32>,
    memo: HashMap<Atom, Memo>,
}

type Callback<'c> = dyn FnMut(&Engine<'_, '_>) -> bool + 'c;

impl<'k, 'a> Engine<'k, 'a> {
    fn new(kb: &'k KnowledgeBase<'a>, opts: ProveOptions, goals: &[Atom]) -> Self {
        let span = goals.iter().flat_map(|g| g.vars()).map(|v| v.0 + 1).max().unwrap_or(0);
        Engine {
            kb,
            opts,
            store: vec![None; span as usize],
            trail: Vec::new(),
            memo: HashMap::new(),
        }
    }

    fn walk(&self, t: &Term) -> Term {
        let mut cur = t;
        loop {
            match cur {
                Term::Var(v) => match self.store.get(v.0 as usize) {
                    Some(Some(next)) => cur = next,
                    _ => return cur.clone(),
                },
                _ => return cur.clone(),
            }
        }
    }

    fn bind(&mut self, v: Var, t: Term) {
        self.store[v.0 as usize] = Some(t);
        self.trail.push(v.0);
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap();
            self.store[v as usize] = None;
        }
    }

    fn unify_term(&mut self, a: &Term, b: &Term) -> bool {
        let a = self.walk(a);
        let b = self.walk(b);
        if a == b {
            return true;
        }
        match (a, b) {
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                self.bind(v, t);
                true
            }
            _ => false,
        }
    }

    fn unify_args(&mut self, goal: &[Term], other: &[Term]) -> bool {
        goal.iter().zip(other).all(|(g, o)| self.unify_term(g, o))
    }

    fn fresh_block(&mut self, n: u32) -> u32 {
        let offset = self.store.len() as u32;
        self.store.resize(self.store.len() + n as usize, None);
        offset
    }

    /// Returns false once the callback asked to stop.
    fn solve(&mut self, goals: &mut Vec<Goal>, on_answer: &mut Callback<'_>) -> bool {
        let Some(goal) = goals.pop() else {
            return on_answer(self);
        };
        let atom = Atom::with_pred(
            goal.atom.pred.clone(),
            goal.atom.args.iter().map(|t| self.walk(t)).collect(),
        );
        let cont = self.solve_goal(&atom, goal.depth, goals, on_answer);
        goals.push(goal);
        cont
    }

    fn solve_goal(
        &mut self,
        atom: &Atom,
        depth: u32,
        goals: &mut Vec<Goal>,
        on_answer: &mut Callback<'_>,
    ) -> bool {
        let key = atom.key();
        if self.opts.tabling && atom.is_ground() && self.kb.has_rules(&key) {
            if self.ground_provable(atom, depth) {
                return self.solve(goals, on_answer);
            }
            return true;
        }
        self.expand(atom, &key, depth, goals, on_answer)
    }

    fn ground_provable(&mut self, atom: &Atom, depth: u32) -> bool {
        if let Some(m) = self.memo.get(atom) {
            if m.proven_at.is_some_and(|d| d <= depth) {
                return true;
            }
            if m.failed_at.is_some_and(|d| d >= depth) {
                return false;
            }
        }
        let mut found = false;
        let mut sub = Vec::new();
        let key = atom.key();
        let mark = self.trail.len();
        let store_len = self.store.len();
        self.expand(atom, &key, depth, &mut sub, &mut |_| {
            found = true;
            false
        });
        self.undo(mark);
        self.store.truncate(store_len);
        let m = self.memo.entry(atom.clone()).or_default();
        if found {
            m.proven_at = Some(m.proven_at.map_or(depth, |d| d.min(depth)));
        } else {
            m.failed_at = Some(m.failed_at.map_or(depth, |d| d.max(depth)));
        }
        found
    }

    fn expand(
        &mut self,
        atom: &Atom,
        key: &PredKey,
        depth: u32,
        goals: &mut Vec<Goal>,
        on_answer: &mut Callback<'_>,
    ) -> bool {
        let kb = self.kb;
        if let Some(rules) = kb.rules.get(key) {
            for clause in rules {
                let cost = u32::from(!clause.body.is_empty());
                if depth < cost {
                    continue;
                }
                let mark = self.trail.len();
                let store_len = self.store.len();
                let offset = self.fresh_block(clause.var_span());
                let head = clause.head.shift_vars(offset);
                let mut cont = true;
                if self.unify_args(&atom.args, &head.args) {
                    let base = goals.len();
                    for b in clause.body.iter().rev() {
                        goals.push(Goal { atom: b.shift_vars(offset), depth: depth - cost });
                    }
                    cont = self.solve(goals, on_answer);
                    goals.truncate(base);
                }
                self.undo(mark);
                self.store.truncate(store_len);
                if !cont {
                    return false;
                }
            }
        }
        for facts in &kb.facts {
            for &id in facts.candidates(key, &atom.args) {
                let fact = facts.fact(id);
                let mark = self.trail.len();
                let store_len = self.store.len();
                let ok = if fact.is_ground() {
                    self.unify_args(&atom.args, &fact.args)
                } else if self.opts.bind_placeholders {
                    let span = fact.vars().map(|v| v.0 + 1).max().unwrap_or(0);
                    let offset = self.fresh_block(span);
                    let renamed = fact.shift_vars(offset);
                    self.unify_args(&atom.args, &renamed.args)
                } else {
                    let frozen = facts.frozen(id).expect("non-ground fact has frozen copy");
                    self.unify_args(&atom.args, &frozen.args)
                };
                let cont = !ok || self.solve(goals, on_answer);
                self.undo(mark);
                self.store.truncate(store_len);
                if !cont {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::syntax::{parse_atom, parse_program};

    fn facts(text: &str) -> FactIndex {
        let p = parse_program(text).unwrap();
        FactIndex::from_atoms(p.clauses.into_iter().map(|c| c.head))
    }

    fn answers(kb: &KnowledgeBase<'_>, goal: &str, depth: u32) -> Vec<String> {
        prove(kb, &parse_atom(goal).unwrap(), ProveOptions::with_depth(depth))
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn single_rule() {
        let f = facts("q(a).");
        let p = parse_program("p(X) :- q(X).").unwrap();
        let mut kb = KnowledgeBase::new();
        kb.add_facts(&f).add_program(&p);
        assert_eq!(answers(&kb, "p(X)", 12), ["{A/a}"]);
    }

    #[test]
    fn recursive_reach() {
        let f = facts("succ(0,1). succ(1,2).");
        let p = parse_program(
            "reach(X,Y) :- succ(X,Y).\nreach(X,Z) :- succ(X,Y), reach(Y,Z).",
        )
        .unwrap();
        let mut kb = KnowledgeBase::new();
        kb.add_facts(&f).add_program(&p);
        assert_eq!(answers(&kb, "reach(0,Z)", 12), ["{A/1}", "{A/2}"]);
        // one rule application only reaches the direct successor
        assert_eq!(answers(&kb, "reach(0,Z)", 1), ["{A/1}"]);
    }

    #[test]
    fn depth_cut_is_silent() {
        let p = parse_program("loop(X) :- loop(X).").unwrap();
        let mut kb = KnowledgeBase::new();
        kb.add_program(&p);
        assert!(answers(&kb, "loop(a)", 50).is_empty());
        let opts = ProveOptions { tabling: false, ..ProveOptions::with_depth(20) };
        assert!(prove(&kb, &parse_atom("loop(Y)").unwrap(), opts).is_empty());
    }

    #[test]
    fn tabling_matches_untabled() {
        let f = facts("e(a,b). e(b,c). e(c,a). e(c,d).");
        let p = parse_program("path(X,Y) :- e(X,Y).\npath(X,Y) :- e(X,Z), path(Z,Y).").unwrap();
        let mut kb = KnowledgeBase::new();
        kb.add_facts(&f).add_program(&p);
        for depth in 1..8 {
            for goal in ["path(a,X)", "path(X,d)", "path(a,d)", "path(d,a)"] {
                let g = parse_atom(goal).unwrap();
                let mut t = prove(&kb, &g, ProveOptions::with_depth(depth));
                let mut u = prove(
                    &kb,
                    &g,
                    ProveOptions { tabling: false, ..ProveOptions::with_depth(depth) },
                );
                t.sort();
                u.sort();
                assert_eq!(t, u, "{goal} at depth {depth}");
            }
        }
    }

    #[test]
    fn placeholders_bind_only_when_allowed() {
        let f = FactIndex::from_atoms(vec![
            Atom::new("cell_contains", vec![Term::sym("c1"), Term::sym("x")]),
            Atom::new("cell_contains", vec![Term::sym("c2"), Term::var(0)]),
        ]);
        let mut kb = KnowledgeBase::new();
        kb.add_facts(&f);
        let goal = [Atom::new("cell_contains", vec![Term::var(0), Term::sym("y")])];
        assert!(holds(&kb, &goal, ProveOptions::default()));
        let strict = ProveOptions { bind_placeholders: false, ..Default::default() };
        assert!(!holds(&kb, &goal, strict));
        // binding a query variable to the placeholder does not instantiate it
        let any = [Atom::new("cell_contains", vec![Term::sym("c2"), Term::var(0)])];
        assert!(holds(&kb, &any, strict));
    }
}
