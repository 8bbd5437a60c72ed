//! Tabular, visual and combined similarity, three-valued pattern evaluation
//! on partial designs, and ranking.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{holds, KnowledgeBase, ProveOptions};
use crate::mining::{Pattern, PatternSet};

/// Floor applied to each component before the geometric mean.
pub const EPSILON: f64 = 1e-6;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty vectors")]
    Empty,
    #[error("visual vector is all zero")]
    ZeroVector,
    #[error("visual vector has a non-finite entry")]
    NonFinite,
    #[error("every feature of the query is unknown")]
    NoInformativeFeatures,
    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("weights must be non-negative with a positive sum")]
    InvalidWeights,
    #[error("similarity component {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("k must be at least 1")]
    InvalidK,
}

/// Complement of the normalized Hamming distance.
pub fn sim_tabular(x: &[bool], y: &[bool]) -> Result<f64, SimilarityError> {
    if x.len() != y.len() {
        return Err(SimilarityError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.is_empty() {
        return Err(SimilarityError::Empty);
    }
    let diff = x.iter().zip(y).filter(|(a, b)| a != b).count();
    Ok(1.0 - diff as f64 / x.len() as f64)
}

pub fn check_visual(x: &[f64]) -> Result<(), SimilarityError> {
    if x.is_empty() {
        return Err(SimilarityError::Empty);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SimilarityError::NonFinite);
    }
    if x.iter().all(|v| *v == 0.0) {
        return Err(SimilarityError::ZeroVector);
    }
    Ok(())
}

/// Cosine similarity clamped to [0, 1].
pub fn sim_visual(x: &[f64], y: &[f64]) -> Result<f64, SimilarityError> {
    if x.len() != y.len() {
        return Err(SimilarityError::LengthMismatch { left: x.len(), right: y.len() });
    }
    check_visual(x)?;
    check_visual(y)?;
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok((dot / (nx * ny)).clamp(0.0, 1.0))
}

/// `(∏ x_i^{w_i})^{1/Σw}` with each `x_i` floored at [`EPSILON`].
pub fn weighted_geometric_mean(values: &[f64], weights: &[f64]) -> Result<f64, SimilarityError> {
    if values.len() != weights.len() {
        return Err(SimilarityError::LengthMismatch { left: values.len(), right: weights.len() });
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || !(total > 0.0) {
        return Err(SimilarityError::InvalidWeights);
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(SimilarityError::OutOfRange(*v));
    }
    let log_sum: f64 = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| w * v.max(EPSILON).ln())
        .sum();
    Ok((log_sum / total).exp())
}

/// `st^α · sv^(1−α)`.
pub fn combined(st: f64, sv: f64, alpha: f64) -> Result<f64, SimilarityError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SimilarityError::InvalidAlpha(alpha));
    }
    weighted_geometric_mean(&[st, sv], &[alpha, 1.0 - alpha])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriState {
    True,
    False,
    Unknown,
}

/// True when the pattern holds without binding any placeholder, False when
/// it fails even if placeholders may take any value, Unknown otherwise.
/// Each use of a placeholder fact binds independently.
pub fn evaluate_partial(p: &Pattern, kb: &KnowledgeBase<'_>, depth: u32) -> TriState {
    let strict = ProveOptions { bind_placeholders: false, ..ProveOptions::with_depth(depth) };
    if holds(kb, &p.literals, strict) {
        return TriState::True;
    }
    if holds(kb, &p.literals, ProveOptions::with_depth(depth)) {
        TriState::Unknown
    } else {
        TriState::False
    }
}

pub fn evaluate_partial_all(patterns: &PatternSet, kb: &KnowledgeBase<'_>, depth: u32) -> Vec<TriState> {
    patterns.iter().map(|p| evaluate_partial(p, kb, depth)).collect()
}

/// Tabular similarity over the features the query knows.
pub fn sim_partial(partial: &[TriState], candidate: &[bool]) -> Result<f64, SimilarityError> {
    if partial.len() != candidate.len() {
        return Err(SimilarityError::LengthMismatch { left: partial.len(), right: candidate.len() });
    }
    let (q, c): (Vec<bool>, Vec<bool>) = partial
        .iter()
        .zip(candidate)
        .filter(|(t, _)| **t != TriState::Unknown)
        .map(|(t, c)| (*t == TriState::True, *c))
        .unzip();
    if q.is_empty() {
        return Err(SimilarityError::NoInformativeFeatures);
    }
    sim_tabular(&q, &c)
}

/// Tabular side of a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "features")]
pub enum QueryTabular {
    Full(Vec<bool>),
    Partial(Vec<TriState>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub tabular: QueryTabular,
    pub visual: Option<Vec<f64>>,
}

/// One design as seen by the ranker.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub id: &'a str,
    pub features: &'a [bool],
    pub visual: Option<&'a [f64]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDesign {
    pub id: String,
    pub sim_tabular: f64,
    pub sim_visual: Option<f64>,
    pub combined: f64,
    pub rank: usize,
}

/// Scores every candidate and returns the best `k`, by descending combined
/// score then ascending id. Without visual vectors on both sides the score
/// is the tabular similarity alone.
pub fn rank<'a>(
    query: &Query,
    candidates: impl IntoIterator<Item = Candidate<'a>>,
    alpha: f64,
    k: usize,
) -> Result<Vec<RankedDesign>, SimilarityError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SimilarityError::InvalidAlpha(alpha));
    }
    if k == 0 {
        return Err(SimilarityError::InvalidK);
    }
    if let Some(v) = &query.visual {
        check_visual(v)?;
    }
    let mut scored = Vec::new();
    for c in candidates {
        let st = match &query.tabular {
            QueryTabular::Full(bits) => sim_tabular(bits, c.features)?,
            QueryTabular::Partial(tri) => sim_partial(tri, c.features)?,
        };
        let sv = match (&query.visual, c.visual) {
            (Some(q), Some(v)) => Some(sim_visual(q, v)?),
            _ => None,
        };
        let score = match sv {
            Some(sv) => combined(st, sv, alpha)?,
            None => st,
        };
        scored.push(RankedDesign { id: c.id.to_string(), sim_tabular: st, sim_visual: sv, combined: score, rank: 0 });
    }
    scored.sort_by(|a, b| {
        b.combined.partial_cmp(&a.combined).unwrap_or(Ordering::Equal).then_with(|| a.id.cmp(&b.id))
    });
    scored.truncate(k);
    for (i, r) in scored.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(scored)
}
