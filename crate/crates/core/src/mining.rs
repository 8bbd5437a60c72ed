//! Level-wise mining of frequent connected conjunctive patterns, and
//! propositionalization of drawings into pattern bit vectors.
//!
//! The pattern language is given by body mode declarations: `+` and `-`
//! arguments become variables, `#` arguments constants. Variables carry
//! the type of the argument they first appear in and only join arguments of
//! the same type.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ilp::{ArgMode, Bias, ModeDecl};
use crate::logic::{
    holds, parse_conjunction, prove, Atom, KnowledgeBase, ProveOptions, Term, Var,
    DEFAULT_DEPTH,
};

#[derive(Debug, Error, PartialEq)]
pub enum MiningError {
    #[error("mining bias declares no body modes")]
    EmptyBias,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("min_support must lie in [0, 1], got {0}")]
    InvalidSupport(f64),
    #[error("pattern line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Conjunction of literals sharing variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pattern {
    pub literals: Vec<Atom>,
}

impl Pattern {
    pub fn new(literals: Vec<Atom>) -> Self {
        Pattern { literals }
    }

    pub fn parse(text: &str) -> Result<Pattern, String> {
        parse_conjunction(text).map(Pattern::new).map_err(|e| e.to_string())
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// Every literal shares a variable with some other literal, directly or
    /// through a chain.
    pub fn is_connected(&self) -> bool {
        connected(&self.literals)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

fn connected(lits: &[Atom]) -> bool {
    if lits.len() <= 1 {
        return true;
    }
    let vars: Vec<BTreeSet<Var>> = lits.iter().map(|l| l.vars().collect()).collect();
    let mut reached = vec![false; lits.len()];
    reached[0] = true;
    let mut frontier = vec![0];
    while let Some(i) = frontier.pop() {
        for j in 0..lits.len() {
            if !reached[j] && !vars[i].is_disjoint(&vars[j]) {
                reached[j] = true;
                frontier.push(j);
            }
        }
    }
    reached.into_iter().all(|r| r)
}

/// Key equal for two patterns iff they are equal up to variable renaming
/// and literal order. Literals are sorted by predicate and constant
/// arguments; ties are resolved by taking the smallest rendering over all
/// orders of the tied literals, with variables renamed by first occurrence.
pub fn canonical_form(p: &Pattern) -> String {
    let skeleton = |a: &Atom| -> String {
        let args: Vec<String> = a
            .args
            .iter()
            .map(|t| if t.is_var() { "_".to_string() } else { t.to_string() })
            .collect();
        format!("{}/{}({})", a.pred, a.arity(), args.join(","))
    };
    let mut order: Vec<usize> = (0..p.literals.len()).collect();
    order.sort_by_cached_key(|&i| skeleton(&p.literals[i]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last: Option<String> = None;
    for i in order {
        let s = skeleton(&p.literals[i]);
        if last.as_ref() == Some(&s) {
            groups.last_mut().unwrap().push(i);
        } else {
            groups.push(vec![i]);
            last = Some(s);
        }
    }
    let mut best: Option<String> = None;
    let mut current = Vec::with_capacity(p.literals.len());
    permute_groups(&groups, 0, &mut current, &mut |seq| {
        let r = render_renamed(&p.literals, seq);
        if best.as_ref().is_none_or(|b| r < *b) {
            best = Some(r);
        }
    });
    best.unwrap_or_default()
}

fn permute_groups(
    groups: &[Vec<usize>],
    g: usize,
    current: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if g == groups.len() {
        visit(current);
        return;
    }
    let mut items = groups[g].clone();
    permutations(&mut items, 0, &mut |perm| {
        let n = current.len();
        current.extend_from_slice(perm);
        permute_groups(groups, g + 1, current, visit);
        current.truncate(n);
    });
}

fn permutations(items: &mut [usize], k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

fn render_renamed(lits: &[Atom], order: &[usize]) -> String {
    let mut map: BTreeMap<Var, u32> = BTreeMap::new();
    let mut out = String::new();
    for (n, &i) in order.iter().enumerate() {
        let args = lits[i]
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => {
                    let next = map.len() as u32;
                    Term::var(*map.entry(*v).or_insert(next))
                }
                t => t.clone(),
            })
            .collect();
        if n > 0 {
            out.push_str(", ");
        }
        out.push_str(&Atom::with_pred(lits[i].pred.clone(), args).to_string());
    }
    out
}

/// True iff the existential closure of the pattern is provable.
pub fn pattern_holds(p: &Pattern, kb: &KnowledgeBase<'_>, depth: u32) -> bool {
    holds(kb, &p.literals, ProveOptions::with_depth(depth))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinedPattern {
    pub pattern: Pattern,
    pub support: usize,
}

/// Mined patterns in bit order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSet {
    pub patterns: Vec<MinedPattern>,
}

impl PatternSet {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pattern> {
        self.patterns.iter().map(|m| &m.pattern)
    }

    /// `support<TAB>pattern` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for m in &self.patterns {
            s.push_str(&format!("{}\t{}\n", m.support, m.pattern));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<PatternSet, MiningError> {
        let mut patterns = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| MiningError::Parse { line: i + 1, msg };
            let (support, pat) = line.split_once('\t').ok_or_else(|| err("missing tab".into()))?;
            let support = support.trim().parse().map_err(|e| err(format!("support: {e}")))?;
            let pattern = Pattern::parse(pat).map_err(err)?;
            patterns.push(MinedPattern { pattern, support });
        }
        Ok(PatternSet { patterns })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningParams {
    /// Fraction of drawings a pattern must hold in.
    pub min_support: f64,
    pub max_literals: usize,
    pub depth: u32,
    /// Stop extending once this many patterns are frequent; 0 means no cap.
    pub max_patterns: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams { min_support: 0.10, max_literals: 6, depth: DEFAULT_DEPTH, max_patterns: 0 }
    }
}

impl MiningParams {
    /// Smallest drawing count meeting `min_support` on `n` drawings.
    pub fn min_count(&self, n: usize) -> usize {
        ((self.min_support * n as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

/// A literal shape: one mode plus a tuple of constants for its `#` slots.
#[derive(Debug, Clone)]
pub(crate) struct Template {
    pred: std::sync::Arc<str>,
    /// `Some(type)` for variable slots, `None` for constant slots.
    slots: Vec<Option<String>>,
    constants: Vec<Term>,
}

impl Template {
    fn instantiate(&self, vars: &[Var]) -> Atom {
        let mut vi = vars.iter();
        let mut ci = self.constants.iter();
        let args = self
            .slots
            .iter()
            .map(|s| match s {
                Some(_) => Term::Var(*vi.next().unwrap()),
                None => ci.next().unwrap().clone(),
            })
            .collect();
        Atom::with_pred(self.pred.clone(), args)
    }

    fn var_types(&self) -> Vec<&str> {
        self.slots.iter().filter_map(|s| s.as_deref()).collect()
    }
}

/// Literal shapes with every constant tuple frequent enough, in mode order
/// then constant order.
pub(crate) fn templates(
    kbs: &[KnowledgeBase<'_>],
    bias: &Bias,
    params: &MiningParams,
) -> Vec<Template> {
    let min = params.min_count(kbs.len());
    let mut out: Vec<Template> = Vec::new();
    let mut seen_shapes = HashSet::new();
    for mode in bias.body_modes() {
        let slots: Vec<Option<String>> = mode
            .args
            .iter()
            .map(|a| (a.mode != ArgMode::Constant).then(|| a.ty.clone()))
            .collect();
        if !seen_shapes.insert((mode.pred.clone(), slots.clone())) {
            continue;
        }
        let const_pos: Vec<usize> =
            slots.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(i, _)| i).collect();
        let pred: std::sync::Arc<str> = mode.pred.as_str().into();
        if const_pos.is_empty() {
            out.push(Template { pred, slots, constants: Vec::new() });
            continue;
        }
        for constants in frequent_constants(kbs, mode, &const_pos, min, params.depth) {
            out.push(Template { pred: pred.clone(), slots: slots.clone(), constants });
        }
    }
    out
}

fn frequent_constants(
    kbs: &[KnowledgeBase<'_>],
    mode: &ModeDecl,
    const_pos: &[usize],
    min: usize,
    depth: u32,
) -> Vec<Vec<Term>> {
    let goal = Atom::new(&mode.pred, (0..mode.args.len() as u32).map(Term::var).collect());
    let per_drawing: Vec<BTreeSet<Vec<Term>>> = kbs
        .par_iter()
        .map(|kb| {
            prove(kb, &goal, ProveOptions::with_depth(depth))
                .iter()
                .filter_map(|s| {
                    let a = goal.apply(s);
                    let tuple: Vec<Term> = const_pos.iter().map(|&i| a.args[i].clone()).collect();
                    tuple.iter().all(|t| !t.is_var()).then_some(tuple)
                })
                .collect()
        })
        .collect();
    let mut counts: BTreeMap<Vec<Term>, usize> = BTreeMap::new();
    for set in per_drawing {
        for t in set {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut tuples: Vec<Vec<Term>> =
        counts.into_iter().filter(|(_, c)| *c >= min.max(1)).map(|(t, _)| t).collect();
    tuples.sort_by_cached_key(|t| t.iter().map(|x| x.to_string()).collect::<Vec<_>>());
    tuples
}

/// Candidate pattern with the types of its variables `0..types.len()`.
#[derive(Debug, Clone)]
struct Candidate {
    lits: Vec<Atom>,
    types: Vec<String>,
}

/// Every way to add one literal of `tpl` to `base`: each variable slot takes
/// an existing variable of the same type or a fresh one (fresh variables
/// numbered in order of first use). When `base` is nonempty at least one
/// slot must reuse an existing variable.
fn extensions(base: &Candidate, tpl: &Template, out: &mut Vec<Candidate>) {
    let types = tpl.var_types();
    let mut choice = Vec::with_capacity(types.len());
    fill(base, tpl, &types, &mut choice, out);
}

fn fill(base: &Candidate, tpl: &Template, types: &[&str], choice: &mut Vec<u32>, out: &mut Vec<Candidate>) {
    let n_old = base.types.len() as u32;
    if choice.len() == types.len() {
        if !base.lits.is_empty() && !choice.iter().any(|&v| v < n_old) {
            return;
        }
        let vars: Vec<Var> = choice.iter().map(|&v| Var(v)).collect();
        let lit = tpl.instantiate(&vars);
        if base.lits.contains(&lit) {
            return;
        }
        let mut c = base.clone();
        for (slot, &v) in choice.iter().enumerate() {
            if v as usize >= c.types.len() {
                c.types.push(types[slot].to_string());
            }
        }
        c.lits.push(lit);
        out.push(c);
        return;
    }
    let slot = choice.len();
    let ty = types[slot];
    let next_fresh = choice.iter().copied().filter(|&v| v >= n_old).max().map_or(n_old, |m| m + 1);
    for v in 0..next_fresh {
        let vty = if v < n_old {
            base.types[v as usize].as_str()
        } else {
            types[choice.iter().position(|&c| c == v).unwrap()]
        };
        if vty == ty {
            choice.push(v);
            fill(base, tpl, types, choice, out);
            choice.pop();
        }
    }
    choice.push(next_fresh);
    fill(base, tpl, types, choice, out);
    choice.pop();
}

/// Level-wise search. Level 1 holds single literals; level `k+1` extends
/// each frequent level-`k` pattern by one connected literal. Support is the
/// number of knowledge bases (drawings) in which a pattern holds.
pub fn mine(
    kbs: &[KnowledgeBase<'_>],
    bias: &Bias,
    params: &MiningParams,
) -> Result<PatternSet, MiningError> {
    if bias.body_modes().next().is_none() {
        return Err(MiningError::EmptyBias);
    }
    if kbs.is_empty() {
        return Err(MiningError::EmptyCorpus);
    }
    if !(0.0..=1.0).contains(&params.min_support) {
        return Err(MiningError::InvalidSupport(params.min_support));
    }
    let min = params.min_count(kbs.len()).max(1);
    let tpls = templates(kbs, bias, params);
    let mut result = PatternSet::default();
    let mut level = vec![Candidate { lits: Vec::new(), types: Vec::new() }];
    for k in 1..=params.max_literals {
        let mut seen = HashSet::new();
        let mut cands = Vec::new();
        for base in &level {
            let mut ext = Vec::new();
            for t in &tpls {
                extensions(base, t, &mut ext);
            }
            for c in ext {
                if seen.insert(canonical_form(&Pattern::new(c.lits.clone()))) {
                    cands.push(c);
                }
            }
        }
        let supports: Vec<usize> = cands
            .par_iter()
            .map(|c| kbs.iter().filter(|kb| holds(kb, &c.lits, ProveOptions::with_depth(params.depth))).count())
            .collect();
        let mut next = Vec::new();
        for (c, s) in cands.into_iter().zip(supports) {
            if s >= min {
                result.patterns.push(MinedPattern { pattern: Pattern::new(c.lits.clone()), support: s });
                next.push(c);
            }
        }
        log::debug!("level {k}: {} frequent patterns", next.len());
        if params.max_patterns > 0 && result.len() >= params.max_patterns {
            result.patterns.truncate(params.max_patterns);
            break;
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub drawing: String,
    pub bits: Vec<bool>,
}

pub fn vectorize(id: &str, kb: &KnowledgeBase<'_>, patterns: &PatternSet, depth: u32) -> FeatureVector {
    let bits = patterns.iter().map(|p| pattern_holds(p, kb, depth)).collect();
    FeatureVector { drawing: id.to_string(), bits }
}
