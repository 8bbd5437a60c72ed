//! First-order terms, clauses, and depth-bounded SLD proof.

mod facts;
mod prove;
mod syntax;
mod term;

pub use facts::{FactIndex, FactSet};
pub use prove::{holds, prove, prove_conjunction, KnowledgeBase, ProveOptions, DEFAULT_DEPTH};
pub use syntax::{parse_atom, parse_clause, parse_conjunction, parse_program, ParseError};
pub use term::{unify, Atom, Clause, PredKey, Program, Substitution, Term, Var};
