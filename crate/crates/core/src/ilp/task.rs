use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::modes::Bias;
use super::IlpError;
use crate::drawing::{AdjacencyParams, Drawing};
use crate::logic::{Atom, FactIndex, FactSet, PredKey, Program, Term, DEFAULT_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    /// Nested rule applications allowed when proving an example.
    pub proof_depth: u32,
    /// Literals per clause, head included.
    pub max_clause_len: usize,
    /// Candidate clauses evaluated per clause search.
    pub node_bound: usize,
    /// Negatives a clause may cover.
    pub noise: usize,
    /// Variable layers explored during saturation.
    pub var_depth: usize,
    /// Body literals kept in a bottom clause.
    pub saturation_cap: usize,
    /// Let the target appear in its own clause bodies.
    pub recursion: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            proof_depth: DEFAULT_DEPTH,
            max_clause_len: 5,
            node_bound: 60_000,
            noise: 0,
            var_depth: 3,
            saturation_cap: 64,
            recursion: true,
        }
    }
}

/// A drawing with its background facts indexed for proving.
#[derive(Debug, Clone)]
pub struct CorpusDrawing {
    pub drawing: Arc<Drawing>,
    pub facts: Arc<FactIndex>,
}

impl CorpusDrawing {
    pub fn new(drawing: Drawing, adjacency: &AdjacencyParams) -> Self {
        let facts = drawing.background(adjacency);
        Self::with_facts(drawing, &facts)
    }

    pub fn with_facts(drawing: Drawing, facts: &FactSet) -> Self {
        CorpusDrawing { facts: Arc::new(FactIndex::new(facts)), drawing: Arc::new(drawing) }
    }

    pub fn id(&self) -> &str {
        &self.drawing.id
    }
}

pub fn corpus(drawings: Vec<Drawing>, adjacency: &AdjacencyParams) -> Vec<CorpusDrawing> {
    drawings.into_iter().map(|d| CorpusDrawing::new(d, adjacency)).collect()
}

/// A ground target atom tied to the drawing it is about.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Example {
    pub drawing: usize,
    pub atom: Atom,
}

/// Every candidate target atom of one drawing: `t(c)` per cell, or
/// `t(i, c)` for `i` in `0..=max_index` where `max_index` is the largest
/// annotated index of `t` in this drawing.
pub fn target_universe(drawing: &Drawing, target: &PredKey) -> Vec<Atom> {
    match target.arity {
        1 => drawing
            .cells
            .iter()
            .map(|c| Atom::with_pred(target.name.clone(), vec![Term::sym(&c.id)]))
            .collect(),
        2 => {
            let max = drawing.max_label_index(&target.name).unwrap_or(0);
            (0..=max as i64)
                .flat_map(|i| {
                    drawing.cells.iter().map(move |c| {
                        Atom::with_pred(target.name.clone(), vec![Term::Int(i), Term::sym(&c.id)])
                    })
                })
                .collect()
        }
        _ => Vec::new(),
    }
}

/// Universe minus positives, in universe order.
pub fn derive_negatives(universe: &[Atom], positives: &[Atom]) -> Vec<Atom> {
    let pos: HashSet<&Atom> = positives.iter().collect();
    universe.iter().filter(|a| !pos.contains(a)).cloned().collect()
}

#[derive(Debug, Clone)]
pub struct LearningTask {
    pub target: PredKey,
    pub positives: Vec<Example>,
    pub negatives: Vec<Example>,
    pub drawings: Vec<CorpusDrawing>,
    /// Extra clauses available to every proof (learned dependency programs).
    pub background: Program,
    pub bias: Bias,
    pub params: SearchParams,
}

impl LearningTask {
    /// Builds positives from the label annotations and negatives as the
    /// complement within each drawing's target universe.
    pub fn from_corpus(
        target: PredKey,
        drawings: &[CorpusDrawing],
        bias: &Bias,
        params: SearchParams,
    ) -> Result<LearningTask, IlpError> {
        if bias.head_mode(&target).is_none() {
            return Err(IlpError::NoHeadMode(target.to_string()));
        }
        if bias.body_modes().next().is_none() {
            return Err(IlpError::NoBodyModes);
        }
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for (i, d) in drawings.iter().enumerate() {
            let pos: Vec<Atom> = d
                .drawing
                .label_atoms(&target.name)
                .into_iter()
                .filter(|a| a.arity() == target.arity)
                .collect();
            let universe = target_universe(&d.drawing, &target);
            for a in derive_negatives(&universe, &pos) {
                negatives.push(Example { drawing: i, atom: a });
            }
            for a in pos {
                positives.push(Example { drawing: i, atom: a });
            }
        }
        Ok(LearningTask {
            target,
            positives,
            negatives,
            drawings: drawings.to_vec(),
            background: Program::default(),
            bias: bias.clone(),
            params,
        })
    }

    /// Reorders the positive examples, which changes seed selection.
    pub fn shuffle_examples<R: Rng>(&mut self, rng: &mut R) {
        self.positives.shuffle(rng);
    }

    pub fn validate(&self) -> Result<(), IlpError> {
        let pos: HashSet<&Example> = self.positives.iter().collect();
        if self.negatives.iter().any(|n| pos.contains(n)) {
            return Err(IlpError::OverlappingExamples);
        }
        if self.bias.head_mode(&self.target).is_none() {
            return Err(IlpError::NoHeadMode(self.target.to_string()));
        }
        Ok(())
    }
}
