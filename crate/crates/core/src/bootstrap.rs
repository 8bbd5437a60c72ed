//! Learning with bootstrapping: targets that standard induction handles
//! poorly are relearned with the programs of easier targets available as
//! background knowledge.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ilp::{induce, Bias, CorpusDrawing, IlpError, Induction, LearningTask, SearchParams};
use crate::logic::Program;

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("dependency graph has a cycle through {0}")]
    Cycle(String),
    #[error("dependency graph line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no learning task for label {0}")]
    UnknownLabel(String),
    #[error("empty ranking")]
    EmptyRanking,
    #[error(transparent)]
    Ilp(#[from] IlpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTarget {
    pub label: String,
    pub f1: f64,
    pub literals: usize,
}

/// Hardest targets first: ascending training F1, then descending program
/// size, then label name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRanking(pub Vec<RankedTarget>);

pub fn rank_targets(results: &[RankedTarget]) -> TargetRanking {
    let mut v = results.to_vec();
    v.sort_by(|a, b| {
        a.f1.partial_cmp(&b.f1)
            .unwrap_or(Ordering::Equal)
            .then(b.literals.cmp(&a.literals))
            .then(a.label.cmp(&b.label))
    });
    TargetRanking(v)
}

/// Directed graph over labels; an edge `a -> b` means `a` depends on `b`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub nodes: Vec<String>,
    pub edges: BTreeSet<(String, String)>,
}

impl DependencyGraph {
    /// Graph without edges: every label is learned on its own.
    pub fn empty(labels: impl IntoIterator<Item = String>) -> Self {
        DependencyGraph { nodes: labels.into_iter().collect(), edges: BTreeSet::new() }
    }

    /// Parses `a -> b` lines. Blank lines and lines starting with `#` or
    /// `%` are skipped. Labels only mentioned in `extra_nodes` become
    /// isolated nodes.
    pub fn parse(text: &str, extra_nodes: &[String]) -> Result<Self, BootstrapError> {
        let mut g = DependencyGraph::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
                continue;
            }
            let (a, b) = line
                .split_once("->")
                .ok_or_else(|| BootstrapError::Parse { line: i + 1, msg: "expected `a -> b`".into() })?;
            let (a, b) = (a.trim(), b.trim());
            if a.is_empty() || b.is_empty() {
                return Err(BootstrapError::Parse { line: i + 1, msg: "empty label".into() });
            }
            g.add_node(a);
            g.add_node(b);
            g.edges.insert((a.to_string(), b.to_string()));
        }
        for n in extra_nodes {
            g.add_node(n);
        }
        g.check_acyclic()?;
        Ok(g)
    }

    fn add_node(&mut self, n: &str) {
        if !self.nodes.iter().any(|x| x == n) {
            self.nodes.push(n.to_string());
        }
    }

    pub fn dependencies<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.iter().filter(move |(a, _)| a == label).map(|(_, b)| b.as_str())
    }

    /// Every label reachable from `label` along dependency edges.
    pub fn descendants(&self, label: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![label.to_string()];
        while let Some(n) = stack.pop() {
            for d in self.dependencies(&n) {
                if out.insert(d.to_string()) {
                    stack.push(d.to_string());
                }
            }
        }
        out
    }

    pub fn check_acyclic(&self) -> Result<(), BootstrapError> {
        self.learning_order().map(|_| ())
    }

    /// Dependencies before dependents; among ready labels, node order.
    pub fn learning_order(&self) -> Result<Vec<String>, BootstrapError> {
        let mut done: BTreeSet<&str> = BTreeSet::new();
        let mut order = Vec::with_capacity(self.nodes.len());
        while order.len() < self.nodes.len() {
            let next = self.nodes.iter().find(|n| {
                !done.contains(n.as_str()) && self.dependencies(n).all(|d| done.contains(d))
            });
            match next {
                Some(n) => {
                    done.insert(n);
                    order.push(n.clone());
                }
                None => {
                    let stuck = self.nodes.iter().find(|n| !done.contains(n.as_str())).unwrap();
                    return Err(BootstrapError::Cycle(stuck.clone()));
                }
            }
        }
        Ok(order)
    }
}

impl fmt::Display for DependencyGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, b) in &self.edges {
            writeln!(f, "{a} -> {b}")?;
        }
        Ok(())
    }
}

/// Each label depends on every label ranked after it.
pub fn build_dependency_graph(ranking: &TargetRanking) -> Result<DependencyGraph, BootstrapError> {
    if ranking.0.is_empty() {
        return Err(BootstrapError::EmptyRanking);
    }
    let nodes: Vec<String> = ranking.0.iter().map(|r| r.label.clone()).collect();
    let mut edges = BTreeSet::new();
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            edges.insert((a.clone(), b.clone()));
        }
    }
    Ok(DependencyGraph { nodes, edges })
}

/// Learns every label in `graph` order. The task of each label gets the
/// programs of all its descendants appended to its background, and body
/// modes for calling them.
pub fn induce_bootstrap(
    tasks: &BTreeMap<String, LearningTask>,
    graph: &DependencyGraph,
) -> Result<BTreeMap<String, Induction>, BootstrapError> {
    let order = graph.learning_order()?;
    let mut learned: BTreeMap<String, Induction> = BTreeMap::new();
    for label in &order {
        let base = tasks.get(label).ok_or_else(|| BootstrapError::UnknownLabel(label.clone()))?;
        let mut task = base.clone();
        let deps = graph.descendants(label);
        for d in order.iter().filter(|o| deps.contains(*o)) {
            let dep = &learned[d];
            task.background.extend(&dep.program);
            if let Some(m) = tasks[d].bias.head_mode(&dep.target) {
                task.bias.add(m.as_body());
            }
        }
        log::info!("learning {label} with {} background clauses", task.background.len());
        learned.insert(label.clone(), induce(&task)?);
    }
    Ok(learned)
}

/// Per-label standard induction, ranked for bootstrapping.
pub fn standard_results(
    tasks: &BTreeMap<String, LearningTask>,
) -> Result<(BTreeMap<String, Induction>, TargetRanking), BootstrapError> {
    let mut out = BTreeMap::new();
    let mut rows = Vec::new();
    for (label, task) in tasks {
        let ind = induce(task)?;
        rows.push(RankedTarget {
            label: label.clone(),
            f1: ind.training.f1,
            literals: ind.program.literal_count(),
        });
        out.insert(label.clone(), ind);
    }
    Ok((out, rank_targets(&rows)))
}

/// All learned clauses in learning order, as one program.
pub fn combined_program(order: &[String], learned: &BTreeMap<String, Induction>) -> Program {
    let mut p = Program::default();
    for l in order {
        if let Some(i) = learned.get(l) {
            p.extend(&i.program);
        }
    }
    p
}

/// One task per head mode of `bias`, keyed by predicate name.
pub fn tasks_for_bias(
    drawings: &[CorpusDrawing],
    bias: &Bias,
    params: SearchParams,
) -> Result<BTreeMap<String, LearningTask>, BootstrapError> {
    let mut tasks = BTreeMap::new();
    for target in bias.targets() {
        let label = target.name.to_string();
        tasks.insert(label, LearningTask::from_corpus(target, drawings, bias, params)?);
    }
    Ok(tasks)
}

#[derive(Debug, Clone)]
pub struct BootstrapOutcome {
    /// Present when the graph was derived from a standard learning pass.
    pub ranking: Option<TargetRanking>,
    pub graph: DependencyGraph,
    pub order: Vec<String>,
    pub learned: BTreeMap<String, Induction>,
    pub program: Program,
}

/// Bootstrapped learning of every task. Without a graph, one is derived
/// from the ranking of a standard learning pass.
pub fn learn_bootstrapped(
    tasks: &BTreeMap<String, LearningTask>,
    graph: Option<DependencyGraph>,
) -> Result<BootstrapOutcome, BootstrapError> {
    let (ranking, graph) = match graph {
        Some(g) => (None, g),
        None => {
            let (_, ranking) = standard_results(tasks)?;
            let g = build_dependency_graph(&ranking)?;
            (Some(ranking), g)
        }
    };
    let order = graph.learning_order()?;
    let learned = induce_bootstrap(tasks, &graph)?;
    let program = combined_program(&order, &learned);
    Ok(BootstrapOutcome { ranking, graph, order, learned, program })
}
