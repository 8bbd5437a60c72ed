use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::saturate::BottomClause;
use super::task::{Example, SearchParams};
use crate::logic::{holds, unify, Atom, Clause, KnowledgeBase, PredKey, ProveOptions};

/// Per-drawing knowledge bases used to test whether a clause covers an
/// example.
pub struct Coverage<'a> {
    pub kbs: Vec<KnowledgeBase<'a>>,
    pub opts: ProveOptions,
}

impl Coverage<'_> {
    pub fn covers(&self, clause: &Clause, ex: &Example) -> bool {
        let Some(s) = unify(&clause.head, &ex.atom) else {
            return false;
        };
        let body: Vec<Atom> = clause.body.iter().map(|a| a.apply(&s)).collect();
        body.is_empty() || holds(&self.kbs[ex.drawing], &body, self.opts)
    }
}

/// Best clause found by one search.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub clause: Clause,
    /// Indices into the positive slice passed to the search.
    pub covered: Vec<usize>,
    pub negatives_covered: usize,
    pub score: i64,
    pub nodes: usize,
}

struct Node {
    lits: Vec<usize>,
    pos: Vec<usize>,
    neg: Vec<usize>,
    score: i64,
    seq: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.score, Reverse(self.lits.len()), Reverse(self.seq)).cmp(&(
            other.score,
            Reverse(other.lits.len()),
            Reverse(other.seq),
        ))
    }
}

/// Compression score: positives minus negatives minus body literals.
pub fn score(pos: usize, neg: usize, clause_len: usize) -> i64 {
    pos as i64 - neg as i64 - clause_len as i64 + 1
}

/// Best-first search over subsets of the bottom clause body.
///
/// Subsets are built by appending literals in increasing bottom-clause
/// order. A literal may only be appended once its input variables are bound
/// by the head or earlier literals. Returns `None` when no acceptable clause
/// (covering at least one positive and at most `params.noise` negatives) is
/// found within `params.node_bound` evaluations.
pub fn search_clause(
    bottom: &BottomClause,
    pos: &[Example],
    neg: &[Example],
    cov: &Coverage<'_>,
    index_args: &[bool],
    params: &SearchParams,
) -> Option<SearchResult> {
    let max_body = params.max_clause_len.saturating_sub(1);
    let head = &bottom.clause.head;
    let target = head.key();
    let mut nodes = 0usize;
    let mut seq = 0usize;
    let mut best: Option<Node> = None;
    let mut queue = BinaryHeap::new();

    let root = {
        let clause = build(bottom, &[]);
        let p: Vec<usize> = filter(cov, &clause, pos, 0..pos.len());
        let n: Vec<usize> = filter(cov, &clause, neg, 0..neg.len());
        nodes += 1;
        Node { score: score(p.len(), n.len(), 1), lits: Vec::new(), pos: p, neg: n, seq }
    };
    consider(&root, bottom, &target, index_args, params, &mut best);
    queue.push(root);

    'search: while let Some(node) = queue.pop() {
        if node.lits.len() >= max_body {
            continue;
        }
        if let Some(b) = &best {
            // Refinements cover no more positives and are one literal longer.
            if (node.pos.len() as i64) - (node.lits.len() as i64) <= b.score {
                continue;
            }
        }
        let start = node.lits.last().map_or(0, |l| l + 1);
        for j in start..bottom.clause.body.len() {
            if !inputs_bound(bottom, &node.lits, j) {
                continue;
            }
            let mut lits = node.lits.clone();
            lits.push(j);
            let clause = build(bottom, &lits);
            let p = filter(cov, &clause, pos, node.pos.iter().copied());
            if p.is_empty() {
                nodes += 1;
                if nodes >= params.node_bound {
                    break 'search;
                }
                continue;
            }
            let n = filter(cov, &clause, neg, node.neg.iter().copied());
            seq += 1;
            nodes += 1;
            let child = Node { score: score(p.len(), n.len(), lits.len() + 1), lits, pos: p, neg: n, seq };
            consider(&child, bottom, &target, index_args, params, &mut best);
            queue.push(child);
            if nodes >= params.node_bound {
                log::debug!("clause search hit node bound {}", params.node_bound);
                break 'search;
            }
        }
    }

    best.map(|b| SearchResult {
        clause: build(bottom, &b.lits),
        covered: b.pos,
        negatives_covered: b.neg.len(),
        score: b.score,
        nodes,
    })
}

fn consider(
    node: &Node,
    bottom: &BottomClause,
    target: &PredKey,
    index_args: &[bool],
    params: &SearchParams,
    best: &mut Option<Node>,
) {
    if node.pos.is_empty() || node.neg.len() > params.noise {
        return;
    }
    if !outputs_bound(bottom, &node.lits) {
        return;
    }
    let body: Vec<&Atom> = node.lits.iter().map(|&i| &bottom.clause.body[i]).collect();
    if !recursion_safe(&bottom.clause.head, &body, target, index_args) {
        return;
    }
    let better = match best {
        None => true,
        Some(b) => node.score > b.score || (node.score == b.score && node.lits.len() < b.lits.len()),
    };
    if better {
        *best = Some(Node {
            lits: node.lits.clone(),
            pos: node.pos.clone(),
            neg: node.neg.clone(),
            score: node.score,
            seq: node.seq,
        });
    }
}

fn build(bottom: &BottomClause, lits: &[usize]) -> Clause {
    Clause::new(
        bottom.clause.head.clone(),
        lits.iter().map(|&i| bottom.clause.body[i].clone()).collect(),
    )
}

fn filter(
    cov: &Coverage<'_>,
    clause: &Clause,
    examples: &[Example],
    ids: impl Iterator<Item = usize>,
) -> Vec<usize> {
    let ids: Vec<usize> = ids.collect();
    ids.into_par_iter().filter(|&i| cov.covers(clause, &examples[i])).collect()
}

fn inputs_bound(bottom: &BottomClause, lits: &[usize], j: usize) -> bool {
    bottom.literals[j].inputs.iter().all(|v| {
        bottom.head_inputs.contains(v) || lits.iter().any(|&l| bottom.literals[l].outputs.contains(v))
    })
}

fn outputs_bound(bottom: &BottomClause, lits: &[usize]) -> bool {
    bottom
        .head_outputs
        .iter()
        .all(|v| lits.iter().any(|&l| bottom.literals[l].outputs.contains(v)))
}

/// A recursive call must be on a strictly smaller argument: an index-typed
/// argument decreased by an earlier `succ/2` literal, or for targets without
/// index arguments a cell reached from the head cell by one adjacency step.
pub fn recursion_safe(head: &Atom, body: &[&Atom], target: &PredKey, index_args: &[bool]) -> bool {
    let has_index = index_args.iter().any(|&b| b);
    body.iter().enumerate().all(|(k, lit)| {
        if lit.key() != *target {
            return true;
        }
        let earlier = &body[..k];
        lit.args.iter().enumerate().any(|(p, arg)| {
            let Some(h) = head.args.get(p) else {
                return false;
            };
            if !arg.is_var() || !h.is_var() || arg == h {
                return false;
            }
            if has_index {
                index_args.get(p).copied().unwrap_or(false)
                    && earlier.iter().any(|e| &*e.pred == "succ" && e.args == [arg.clone(), h.clone()])
            } else {
                earlier.iter().any(|e| {
                    matches!(&*e.pred, "above_below" | "left_right")
                        && e.args.len() == 2
                        && ((e.args[0] == *h && e.args[1] == *arg) || (e.args[0] == *arg && e.args[1] == *h))
                })
            }
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_clause;

    #[test]
    fn score_formula() {
        assert_eq!(score(10, 0, 3), 8);
        assert_eq!(score(1, 0, 1), 1);
        assert_eq!(score(4, 2, 2), 1);
    }

    #[test]
    fn recursion_needs_succ_step() {
        let t = PredKey::new("materials", 2);
        let ok = parse_clause("materials(X,Y) :- succ(Z,X), above_below(W,Y), materials(Z,W).").unwrap();
        let body: Vec<&Atom> = ok.body.iter().collect();
        assert!(recursion_safe(&ok.head, &body, &t, &[true, false]));
        let bad = parse_clause("materials(X,Y) :- above_below(W,Y), materials(X,W).").unwrap();
        let body: Vec<&Atom> = bad.body.iter().collect();
        assert!(!recursion_safe(&bad.head, &body, &t, &[true, false]));
    }

    #[test]
    fn recursion_via_adjacency() {
        let t = PredKey::new("row", 1);
        let ok = parse_clause("row(X) :- above_below(Y,X), row(Y).").unwrap();
        let body: Vec<&Atom> = ok.body.iter().collect();
        assert!(recursion_safe(&ok.head, &body, &t, &[false]));
        let bad = parse_clause("row(X) :- row(X).").unwrap();
        let body: Vec<&Atom> = bad.body.iter().collect();
        assert!(!recursion_safe(&bad.head, &body, &t, &[false]));
    }
}
