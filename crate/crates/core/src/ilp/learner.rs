use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::modes::Bias;
use super::saturate::{index_positions, saturate};
use super::search::{search_clause, Coverage};
use super::task::{CorpusDrawing, Example, LearningTask};
use super::IlpError;
use crate::logic::{
    prove, Atom, Clause, FactIndex, KnowledgeBase, PredKey, Program, ProveOptions, Term,
};

/// Outcome of one clause search inside the cover loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchTrace {
    pub seed: String,
    pub clause: Option<String>,
    pub covered: usize,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Induction {
    pub target: PredKey,
    pub program: Program,
    pub training: Metrics,
    pub trace: Vec<SearchTrace>,
    /// Positives no accepted clause covers.
    pub uncovered: usize,
}

/// Learns a definition of `task.target` with the cover loop: saturate the
/// first uncovered positive, search for the best clause, drop the positives
/// it covers, repeat. Recursive literals are checked against the positive
/// examples of the same drawing while learning.
pub fn induce(task: &LearningTask) -> Result<Induction, IlpError> {
    task.validate()?;
    let params = task.params;
    let target = task.target.clone();
    let mut bias = task.bias.clone();
    if params.recursion {
        if let Some(h) = bias.head_mode(&target).cloned() {
            bias.add(h.as_body());
        }
    }
    let index_args = index_positions(&bias, &target);

    let extensional: Vec<FactIndex> = (0..task.drawings.len())
        .map(|d| {
            FactIndex::from_atoms(
                task.positives.iter().filter(|e| e.drawing == d).map(|e| e.atom.clone()),
            )
        })
        .collect();
    let opts = ProveOptions::with_depth(params.proof_depth);
    let kbs = task
        .drawings
        .iter()
        .zip(&extensional)
        .map(|(d, ext)| {
            let mut kb = KnowledgeBase::new();
            kb.add_facts(&d.facts).add_facts(ext).add_program(&task.background);
            kb
        })
        .collect();
    let cov = Coverage { kbs, opts };

    let mut remaining: Vec<Example> = task.positives.clone();
    let mut program = Program::default();
    let mut trace = Vec::new();
    while let Some(seed) = remaining.first().cloned() {
        let bottom = saturate(&seed.atom, &cov.kbs[seed.drawing], &bias, &params);
        log::debug!("bottom clause for {}: {} literals", seed.atom, bottom.clause.body.len());
        let found = search_clause(&bottom, &remaining, &task.negatives, &cov, &index_args, &params);
        match found {
            Some(r) if !r.covered.is_empty() => {
                let clause = r.clause.normalized();
                log::info!("{target}: {clause} covers {} positives", r.covered.len());
                trace.push(SearchTrace {
                    seed: seed.atom.to_string(),
                    clause: Some(clause.to_string()),
                    covered: r.covered.len(),
                    nodes: r.nodes,
                });
                let covered: HashSet<usize> = r.covered.into_iter().collect();
                remaining = remaining
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| !covered.contains(i))
                    .map(|(_, e)| e)
                    .collect();
                if !program.clauses.contains(&clause) {
                    program.clauses.push(clause);
                }
            }
            other => {
                log::info!("{target}: no clause found for seed {}", seed.atom);
                trace.push(SearchTrace {
                    seed: seed.atom.to_string(),
                    clause: None,
                    covered: 0,
                    nodes: other.map_or(0, |r| r.nodes),
                });
                remaining.remove(0);
            }
        }
    }

    let program = prune_redundant(program, task);
    let training = evaluate(&program, &task.background, &task.drawings, &target, params.proof_depth)
        .metrics;
    let uncovered = count_uncovered(&program, task);
    Ok(Induction { target, program, training, trace, uncovered })
}

fn covered_positives(program: &Program, task: &LearningTask) -> usize {
    let opts = ProveOptions::with_depth(task.params.proof_depth);
    task.positives
        .par_iter()
        .filter(|e| {
            let mut kb = KnowledgeBase::new();
            kb.add_facts(&task.drawings[e.drawing].facts)
                .add_program(&task.background)
                .add_program(program);
            !prove(&kb, &e.atom, opts).is_empty()
        })
        .count()
}

fn count_uncovered(program: &Program, task: &LearningTask) -> usize {
    task.positives.len() - covered_positives(program, task)
}

/// Drops clauses whose removal does not reduce the positives the program
/// proves on its own, without the extensional examples.
fn prune_redundant(mut program: Program, task: &LearningTask) -> Program {
    loop {
        let full = covered_positives(&program, task);
        let mut removed = false;
        for i in (0..program.clauses.len()).rev() {
            let mut candidate = program.clone();
            candidate.clauses.remove(i);
            if covered_positives(&candidate, task) >= full {
                log::debug!("dropping redundant clause {}", program.clauses[i]);
                program = candidate;
                removed = true;
                break;
            }
        }
        if !removed {
            return program;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    /// Precision and recall of an empty denominator are 1 when the other
    /// side is empty too (nothing to find, nothing predicted) and 0 otherwise.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Metrics {
        let ratio = |num: usize, den: usize, other_empty: bool| {
            if den == 0 {
                if other_empty { 1.0 } else { 0.0 }
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp, fn_ == 0);
        let recall = ratio(tp, tp + fn_, fp == 0);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics { tp, fp, fn_, precision, recall, f1 }
    }

    pub fn add(&self, other: &Metrics) -> Metrics {
        Metrics::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrawingEvaluation {
    pub drawing: String,
    pub metrics: Metrics,
    pub false_positives: Vec<String>,
    pub false_negatives: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub drawings: Vec<DrawingEvaluation>,
}

/// Ground target atoms `program` derives for one drawing.
pub fn predict(
    program: &Program,
    background: &Program,
    drawing: &CorpusDrawing,
    target: &PredKey,
    depth: u32,
) -> Vec<Atom> {
    let mut kb = KnowledgeBase::new();
    kb.add_facts(&drawing.facts).add_program(background).add_program(program);
    let goal = Atom::with_pred(target.name.clone(), (0..target.arity as u32).map(Term::var).collect());
    let mut out: Vec<Atom> = prove(&kb, &goal, ProveOptions::with_depth(depth))
        .iter()
        .map(|s| goal.apply(s))
        .filter(Atom::is_ground)
        .collect();
    out.sort_by_key(|a| a.to_string());
    out.dedup();
    out
}

/// Compares predictions against each drawing's annotations for `target`.
pub fn evaluate(
    program: &Program,
    background: &Program,
    drawings: &[CorpusDrawing],
    target: &PredKey,
    depth: u32,
) -> Evaluation {
    let per: Vec<DrawingEvaluation> = drawings
        .par_iter()
        .map(|d| {
            let predicted: HashSet<Atom> =
                predict(program, background, d, target, depth).into_iter().collect();
            let actual: HashSet<Atom> = d
                .drawing
                .label_atoms(&target.name)
                .into_iter()
                .filter(|a| a.arity() == target.arity)
                .collect();
            let mut fp: Vec<String> =
                predicted.difference(&actual).map(|a| a.to_string()).collect();
            let mut fn_: Vec<String> =
                actual.difference(&predicted).map(|a| a.to_string()).collect();
            fp.sort();
            fn_.sort();
            let tp = predicted.intersection(&actual).count();
            DrawingEvaluation {
                drawing: d.id().to_string(),
                metrics: Metrics::from_counts(tp, fp.len(), fn_.len()),
                false_positives: fp,
                false_negatives: fn_,
            }
        })
        .collect();
    let metrics = per.iter().fold(Metrics::from_counts(0, 0, 0), |acc, d| {
        Metrics::from_counts(acc.tp + d.metrics.tp, acc.fp + d.metrics.fp, acc.fn_ + d.metrics.fn_)
    });
    Evaluation { metrics, drawings: per }
}

/// Clause `a` θ-subsumes `b` when some substitution maps `a`'s head onto
/// `b`'s head and every body literal of `a` onto a literal of `b`.
pub fn subsumes(a: &Clause, b: &Clause) -> bool {
    let b_frozen = freeze(b);
    let mut goals = vec![a.head.clone()];
    goals.extend(a.body.iter().cloned());
    let facts = FactIndex::from_atoms(
        std::iter::once(b_frozen.head.clone()).chain(b_frozen.body.iter().cloned()),
    );
    let mut kb = KnowledgeBase::new();
    kb.add_facts(&facts);
    // The head must map onto the head, not onto a body literal.
    let head_goal = a.head.clone();
    let Some(s) = crate::logic::unify(&head_goal, &b_frozen.head) else {
        return false;
    };
    let body: Vec<Atom> = a.body.iter().map(|l| l.apply(&s)).collect();
    body.is_empty() || crate::logic::holds(&kb, &body, ProveOptions::with_depth(0))
}

fn freeze(c: &Clause) -> Clause {
    let f = |a: &Atom| {
        Atom::with_pred(
            a.pred.clone(),
            a.args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Term::sym(&format!("$v{}", v.0)),
                    t => t.clone(),
                })
                .collect(),
        )
    };
    Clause::new(f(&c.head), c.body.iter().map(f).collect())
}

/// Body modes that let other targets call a learned predicate.
pub fn export_modes(bias: &Bias, target: &PredKey) -> Option<super::modes::ModeDecl> {
    bias.head_mode(target).map(|m| m.as_body())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_clause;

    #[test]
    fn f1_conventions() {
        assert_eq!(Metrics::from_counts(0, 0, 0).f1, 1.0);
        assert_eq!(Metrics::from_counts(0, 2, 0).f1, 0.0);
        assert_eq!(Metrics::from_counts(0, 0, 3).f1, 0.0);
        let m = Metrics::from_counts(3, 1, 2);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-12);
    }

    #[test]
    fn subsumption() {
        let general = parse_clause("p(X) :- q(X, Y).").unwrap();
        let specific = parse_clause("p(A) :- q(A, b), r(A).").unwrap();
        assert!(subsumes(&general, &specific));
        assert!(!subsumes(&specific, &general));
        let other = parse_clause("p(A) :- q(c, A).").unwrap();
        assert!(!subsumes(&general, &other));
    }
}
