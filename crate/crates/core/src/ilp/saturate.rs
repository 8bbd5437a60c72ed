use std::collections::{HashMap, HashSet};

use super::modes::{ArgMode, Bias, ModeDecl};
use super::task::SearchParams;
use crate::logic::{prove, Atom, Clause, KnowledgeBase, PredKey, ProveOptions, Term, Var};

/// Most specific clause for one seed example, with per-literal variable
/// roles kept for the clause search.
#[derive(Debug, Clone)]
pub struct BottomClause {
    pub clause: Clause,
    pub literals: Vec<LiteralRoles>,
    pub head_inputs: Vec<Var>,
    pub head_outputs: Vec<Var>,
    pub var_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralRoles {
    pub inputs: Vec<Var>,
    pub outputs: Vec<Var>,
    pub layer: usize,
}

struct VarTable {
    by_term: HashMap<Term, Var>,
    terms: Vec<Term>,
    types: Vec<String>,
    layers: Vec<usize>,
}

impl VarTable {
    fn get_or_add(&mut self, term: &Term, ty: &str, layer: usize) -> Var {
        if let Some(v) = self.by_term.get(term) {
            return *v;
        }
        let v = Var(self.terms.len() as u32);
        self.by_term.insert(term.clone(), v);
        self.terms.push(term.clone());
        self.types.push(ty.to_string());
        self.layers.push(layer);
        v
    }
}

/// Builds the bottom clause of `seed`.
///
/// The head replaces each `+`/`-` argument constant with a variable (equal
/// constants share a variable). Each layer then calls every body mode with
/// all input combinations drawn from terms seen in earlier layers, at least
/// one of them from the previous layer, and adds one literal per answer.
/// Literals come out in derivation order; the body is cut at
/// `params.saturation_cap`.
pub fn saturate(
    seed: &Atom,
    kb: &KnowledgeBase<'_>,
    bias: &Bias,
    params: &SearchParams,
) -> BottomClause {
    let key = seed.key();
    let head_mode = bias.head_mode(&key);
    let mut vars = VarTable {
        by_term: HashMap::new(),
        terms: Vec::new(),
        types: Vec::new(),
        layers: Vec::new(),
    };
    let mut head_inputs = Vec::new();
    let mut head_outputs = Vec::new();
    let head_args = seed
        .args
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (mode, ty) = head_mode
                .and_then(|m| m.args.get(i))
                .map(|a| (a.mode, a.ty.as_str()))
                .unwrap_or((ArgMode::Input, "any"));
            match mode {
                ArgMode::Constant => t.clone(),
                ArgMode::Input => {
                    let v = vars.get_or_add(t, ty, 0);
                    head_inputs.push(v);
                    Term::Var(v)
                }
                ArgMode::Output => {
                    let v = vars.get_or_add(t, ty, usize::MAX);
                    head_outputs.push(v);
                    Term::Var(v)
                }
            }
        })
        .collect();
    let head = Atom::with_pred(seed.pred.clone(), head_args);

    let opts = ProveOptions::with_depth(params.proof_depth);
    let mut body: Vec<Atom> = Vec::new();
    let mut roles: Vec<LiteralRoles> = Vec::new();
    let mut seen: HashSet<Atom> = HashSet::new();
    let body_modes: Vec<&ModeDecl> = bias.body_modes().collect();

    'layers: for layer in 1..=params.var_depth {
        let available = vars.terms.len();
        for mode in &body_modes {
            let mkey = mode.key();
            if !kb.defines(&mkey) {
                continue;
            }
            let input_slots: Vec<(usize, &str)> = mode
                .args
                .iter()
                .enumerate()
                .filter(|(_, a)| a.mode == ArgMode::Input)
                .map(|(i, a)| (i, a.ty.as_str()))
                .collect();
            let choices: Vec<Vec<Var>> = input_slots
                .iter()
                .map(|(_, ty)| {
                    (0..available)
                        .filter(|&v| vars.layers[v] < layer && vars.types[v] == *ty)
                        .map(|v| Var(v as u32))
                        .collect()
                })
                .collect();
            for combo in cartesian(&choices) {
                let fresh = combo.iter().any(|v| vars.layers[v.0 as usize] + 1 == layer);
                if !input_slots.is_empty() && !fresh {
                    continue;
                }
                if input_slots.is_empty() && layer > 1 {
                    continue;
                }
                let mut query_args = Vec::with_capacity(mode.args.len());
                let mut next_q = 0u32;
                let mut slot = 0;
                for a in &mode.args {
                    if a.mode == ArgMode::Input {
                        query_args.push(vars.terms[combo[slot].0 as usize].clone());
                        slot += 1;
                    } else {
                        query_args.push(Term::var(next_q));
                        next_q += 1;
                    }
                }
                let query = Atom::with_pred(mkey.name.clone(), query_args);
                for answer in prove(kb, &query, opts) {
                    let mut lit_args = Vec::with_capacity(mode.args.len());
                    let mut inputs = Vec::new();
                    let mut outputs = Vec::new();
                    let mut slot = 0;
                    let mut complete = true;
                    for (i, a) in mode.args.iter().enumerate() {
                        match a.mode {
                            ArgMode::Input => {
                                let v = combo[slot];
                                slot += 1;
                                inputs.push(v);
                                lit_args.push(Term::Var(v));
                            }
                            ArgMode::Output | ArgMode::Constant => {
                                let t = answer.apply_term(&query.args[i]);
                                if t.is_var() {
                                    complete = false;
                                    break;
                                }
                                if a.mode == ArgMode::Constant {
                                    lit_args.push(t);
                                } else {
                                    let v = vars.get_or_add(&t, &a.ty, layer);
                                    outputs.push(v);
                                    lit_args.push(Term::Var(v));
                                }
                            }
                        }
                    }
                    if !complete {
                        continue;
                    }
                    let lit = Atom::with_pred(mkey.name.clone(), lit_args);
                    if lit == head || !seen.insert(lit.clone()) {
                        continue;
                    }
                    body.push(lit);
                    roles.push(LiteralRoles { inputs, outputs, layer });
                    if body.len() >= params.saturation_cap {
                        log::debug!("bottom clause for {seed} truncated at {} literals", body.len());
                        break 'layers;
                    }
                }
            }
        }
    }
    if body.is_empty() {
        log::debug!("seed {seed} has no connection to the background");
    }
    BottomClause {
        clause: Clause::new(head, body),
        literals: roles,
        head_inputs,
        head_outputs,
        var_count: vars.terms.len() as u32,
    }
}

fn cartesian(choices: &[Vec<Var>]) -> Vec<Vec<Var>> {
    let mut out: Vec<Vec<Var>> = vec![Vec::new()];
    for c in choices {
        let mut next = Vec::with_capacity(out.len() * c.len());
        for prefix in &out {
            for v in c {
                let mut p = prefix.clone();
                p.push(*v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// True if the target predicate `key` has an `index`-typed argument.
pub(crate) fn index_positions(bias: &Bias, key: &PredKey) -> Vec<bool> {
    bias.head_mode(key)
        .map(|m| m.args.iter().map(|a| a.ty == "index").collect())
        .unwrap_or_else(|| vec![false; key.arity])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_atom, parse_program, FactIndex};

    fn index(text: &str) -> FactIndex {
        FactIndex::from_atoms(parse_program(text).unwrap().clauses.into_iter().map(|c| c.head))
    }

    #[test]
    fn empty_background_gives_bare_head() {
        let facts = FactIndex::default();
        let mut kb = KnowledgeBase::new();
        kb.add_facts(&facts);
        let bias = Bias::parse("head p(+cell)\nbody q(+cell, -cell)").unwrap();
        let b = saturate(&parse_atom("p(c1)").unwrap(), &kb, &bias, &SearchParams::default());
        assert!(b.clause.body.is_empty());
        assert_eq!(b.clause.to_string(), "p(A).");
    }

    #[test]
    fn author_constant_literal() {
        let facts = index("cell(c1). cell_contains(c1, drawn). cell_contains(c1, 'SMITH').");
        let mut kb = KnowledgeBase::new();
        kb.add_facts(&facts);
        let bias = Bias::parse("head author(+cell)\nbody cell_contains(+cell, #token)").unwrap();
        let b = saturate(&parse_atom("author(c1)").unwrap(), &kb, &bias, &SearchParams::default());
        assert_eq!(
            b.clause.to_string(),
            "author(A) :- cell_contains(A,drawn), cell_contains(A,'SMITH')."
        );
    }

    #[test]
    fn layers_chain_outputs() {
        let facts = index("ab(h, t). cell_contains(t, 'LIST'). ab(x, h).");
        let mut kb = KnowledgeBase::new();
        kb.add_facts(&facts);
        let bias = Bias::parse(
            "head header(+cell)\nbody ab(+cell, -cell)\nbody cell_contains(+cell, #token)",
        )
        .unwrap();
        let b = saturate(&parse_atom("header(h)").unwrap(), &kb, &bias, &SearchParams::default());
        assert_eq!(b.clause.to_string(), "header(A) :- ab(A,B), cell_contains(B,'LIST').");
        assert_eq!(b.literals[1].inputs, vec![Var(1)]);
        assert_eq!(b.literals[1].layer, 2);
    }

    #[test]
    fn cap_truncates() {
        let facts = index("cell_contains(c, a). cell_contains(c, b). cell_contains(c, d).");
        let mut kb = KnowledgeBase::new();
        kb.add_facts(&facts);
        let bias = Bias::parse("head t(+cell)\nbody cell_contains(+cell, #token)").unwrap();
        let params = SearchParams { saturation_cap: 2, ..Default::default() };
        let b = saturate(&parse_atom("t(c)").unwrap(), &kb, &bias, &params);
        assert_eq!(b.clause.body.len(), 2);
    }
}
