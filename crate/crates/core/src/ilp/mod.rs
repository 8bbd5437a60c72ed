//! Inductive learning of parser clauses from annotated drawings.

mod learner;
mod modes;
mod saturate;
mod search;
mod task;

use thiserror::Error;

pub use learner::{
    evaluate, export_modes, induce, predict, subsumes, DrawingEvaluation, Evaluation, Induction,
    Metrics, SearchTrace,
};
pub use modes::{ArgMode, Bias, BiasError, ModeArg, ModeDecl, ModeKind};
pub use saturate::{saturate, BottomClause, LiteralRoles};
pub use search::{recursion_safe, score, search_clause, Coverage, SearchResult};
pub use task::{
    corpus, derive_negatives, target_universe, CorpusDrawing, Example, LearningTask, SearchParams,
};

#[derive(Debug, Error)]
pub enum IlpError {
    #[error("no head mode declared for {0}")]
    NoHeadMode(String),
    #[error("bias declares no body modes")]
    NoBodyModes,
    #[error("an example is both positive and negative")]
    OverlappingExamples,
    #[error(transparent)]
    Bias(#[from] BiasError),
}
