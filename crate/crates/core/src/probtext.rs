//! Probabilistic reasoning over OCR output.
//!
//! OCR yields a distribution over characters at every position. Two
//! corrections are supported: matching the noisy string against a list of
//! known strings with a max-product edit lattice, and revising a single
//! character distribution with a type prior by virtual evidence.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed on the total mass of an OCR distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TextError {
    #[error("character distribution at position {0} is empty")]
    EmptyDistribution(usize),
    #[error("probability {value} for {ch:?} is outside (0, 1]")]
    InvalidProbability { ch: char, value: f64 },
    #[error("distribution mass {0} exceeds 1")]
    MassExceedsOne(f64),
    #[error("declared length {declared} does not match {actual} positions")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("prior and observation supports do not overlap")]
    NoOverlap,
    #[error("edit penalty {0} is outside (0, 1)")]
    InvalidPenalty(f64),
    #[error("type prior ratio must be >= 1, got {0}")]
    InvalidRatio(f64),
    #[error("empty support")]
    EmptySupport,
    #[error("no candidates given")]
    NoCandidates,
    #[error("unknown character class {0:?}")]
    UnknownClass(String),
}

/// Distribution over characters at one position. OCR engines may drop tail
/// mass, so the total may be below one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CharDistribution(pub BTreeMap<char, f64>);

impl CharDistribution {
    pub fn new(entries: impl IntoIterator<Item = (char, f64)>) -> Result<Self, TextError> {
        let d = CharDistribution(entries.into_iter().collect());
        d.validate(0)?;
        Ok(d)
    }

    /// Point mass on `c`.
    pub fn certain(c: char) -> Self {
        CharDistribution(BTreeMap::from([(c, 1.0)]))
    }

    pub fn validate(&self, position: usize) -> Result<(), TextError> {
        if self.0.is_empty() {
            return Err(TextError::EmptyDistribution(position));
        }
        for (&ch, &value) in &self.0 {
            if !(value > 0.0 && value <= 1.0) {
                return Err(TextError::InvalidProbability { ch, value });
            }
        }
        let mass = self.mass();
        if mass > 1.0 + MASS_TOLERANCE {
            return Err(TextError::MassExceedsOne(mass));
        }
        Ok(())
    }

    pub fn get(&self, c: char) -> f64 {
        self.0.get(&c).copied().unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn support(&self) -> impl Iterator<Item = char> + '_ {
        self.0.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (char, f64)> + '_ {
        self.0.iter().map(|(&c, &p)| (c, p))
    }

    /// Most probable character; ties go to the smaller code point.
    pub fn argmax(&self) -> Option<char> {
        self.0
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(&c, _)| c)
    }
}

/// Per-position character distributions for one OCR'd string.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbString {
    pub positions: Vec<CharDistribution>,
    pub length: usize,
}

impl ProbString {
    pub fn new(positions: Vec<CharDistribution>) -> Self {
        let length = positions.len();
        ProbString { positions, length }
    }

    /// Deterministic observation of `s`.
    pub fn certain(s: &str) -> Self {
        Self::new(s.chars().map(CharDistribution::certain).collect())
    }

    pub fn validate(&self) -> Result<(), TextError> {
        if self.length != self.positions.len() {
            return Err(TextError::LengthMismatch {
                declared: self.length,
                actual: self.positions.len(),
            });
        }
        for (i, p) in self.positions.iter().enumerate() {
            p.validate(i)?;
        }
        Ok(())
    }

    /// Position-wise argmax reading.
    pub fn best_reading(&self) -> String {
        self.positions.iter().filter_map(CharDistribution::argmax).collect()
    }
}

/// Transition probabilities of the edit lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditPenalties {
    pub p_insert: f64,
    pub p_delete: f64,
    pub p_substitute: f64,
}

impl Default for EditPenalties {
    fn default() -> Self {
        EditPenalties { p_insert: 0.3, p_delete: 0.3, p_substitute: 0.3 }
    }
}

impl EditPenalties {
    pub fn validate(&self) -> Result<(), TextError> {
        for p in [self.p_insert, self.p_delete, self.p_substitute] {
            if !(p > 0.0 && p < 1.0) {
                return Err(TextError::InvalidPenalty(p));
            }
        }
        Ok(())
    }
}

/// Max-product score of the best alignment of `candidate` against `obs`.
///
/// The lattice starts at (-1, -1) with score 1. Every other cell on the
/// boundary row or column is unreachable, so the first candidate character
/// is always aligned with the first observed position. Deleting a candidate
/// character, inserting an observed position, and substituting each
/// multiply in their penalty; a match or substitution also multiplies in
/// the observed character's probability.
pub fn prob_levenshtein(
    candidate: &str,
    obs: &ProbString,
    pen: &EditPenalties,
) -> Result<f64, TextError> {
    obs.validate()?;
    pen.validate()?;
    let cand: Vec<char> = candidate.chars().collect();
    let (n, m) = (cand.len(), obs.length);
    // table[i][j] holds S(i-1, j-1)
    let mut table = vec![vec![0.0f64; m + 1]; n + 1];
    table[0][0] = 1.0;
    for i in 1..=n {
        for j in 1..=m {
            let sub = obs.positions[j - 1]
                .iter()
                .map(|(x, p)| p * if x == cand[i - 1] { 1.0 } else { pen.p_substitute })
                .fold(0.0, f64::max);
            table[i][j] = (pen.p_delete * table[i - 1][j])
                .max(pen.p_insert * table[i][j - 1])
                .max(sub * table[i - 1][j - 1]);
        }
    }
    Ok(table[n][m])
}

/// Candidates scored against `obs`, best first; equal scores in
/// lexicographic order.
pub fn best_match<S: AsRef<str>>(
    candidates: &[S],
    obs: &ProbString,
    pen: &EditPenalties,
) -> Result<Vec<(String, f64)>, TextError> {
    if candidates.is_empty() {
        return Err(TextError::NoCandidates);
    }
    let mut scored = candidates
        .iter()
        .map(|c| Ok((c.as_ref().to_string(), prob_levenshtein(c.as_ref(), obs, pen)?)))
        .collect::<Result<Vec<_>, TextError>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored)
}

/// Revises `prior` with the uncertain observation `ocr` by Bayes'
/// conditioning: `posterior(x) ∝ prior(x) · ocr(x)` over the shared support.
pub fn virtual_evidence_posterior(
    prior: &CharDistribution,
    ocr: &CharDistribution,
) -> Result<CharDistribution, TextError> {
    let joint: Vec<(char, f64)> = prior
        .iter()
        .filter_map(|(c, p)| {
            let o = ocr.get(c);
            (o > 0.0 && p > 0.0).then_some((c, p * o))
        })
        .collect();
    let z: f64 = joint.iter().map(|(_, w)| w).sum();
    if joint.is_empty() || z <= 0.0 {
        return Err(TextError::NoOverlap);
    }
    Ok(CharDistribution(joint.into_iter().map(|(c, w)| (c, w / z)).collect()))
}

/// Named character classes usable as type information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharClass {
    Digit,
    UpperAlpha,
    Alnum,
}

impl CharClass {
    pub fn contains(self, c: char) -> bool {
        match self {
            CharClass::Digit => c.is_ascii_digit(),
            CharClass::UpperAlpha => c.is_uppercase(),
            CharClass::Alnum => c.is_alphanumeric(),
        }
    }
}

impl FromStr for CharClass {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "digit" => Ok(CharClass::Digit),
            "upper_alpha" => Ok(CharClass::UpperAlpha),
            "alnum" => Ok(CharClass::Alnum),
            other => Err(TextError::UnknownClass(other.to_string())),
        }
    }
}

impl fmt::Display for CharClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CharClass::Digit => "digit",
            CharClass::UpperAlpha => "upper_alpha",
            CharClass::Alnum => "alnum",
        })
    }
}

pub const DEFAULT_PRIOR_RATIO: f64 = 8.0;

/// Prior over the OCR support giving class members `ratio` times the
/// weight of other characters.
pub fn type_prior(
    ocr_support: impl IntoIterator<Item = char>,
    in_class: impl Fn(char) -> bool,
    ratio: f64,
) -> Result<CharDistribution, TextError> {
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(TextError::InvalidRatio(ratio));
    }
    let weights: BTreeMap<char, f64> = ocr_support
        .into_iter()
        .map(|c| (c, if in_class(c) { ratio } else { 1.0 }))
        .collect();
    if weights.is_empty() {
        return Err(TextError::EmptySupport);
    }
    let z: f64 = weights.values().sum();
    Ok(CharDistribution(weights.into_iter().map(|(c, w)| (c, w / z)).collect()))
}

/// Corrects a single-character OCR distribution with a class prior.
pub fn correct_with_class(
    ocr: &CharDistribution,
    class: CharClass,
    ratio: f64,
) -> Result<CharDistribution, TextError> {
    let prior = type_prior(ocr.support(), |c| class.contains(c), ratio)?;
    virtual_evidence_posterior(&prior, ocr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy_dries() -> ProbString {
        ProbString::new(vec![
            CharDistribution::new([('d', 0.8), ('b', 0.1), ('o', 0.1)]).unwrap(),
            CharDistribution::certain('r'),
            CharDistribution::certain('i'),
            CharDistribution::new([('e', 0.8), ('3', 0.2)]).unwrap(),
            CharDistribution::certain('s'),
        ])
    }

    #[test]
    fn noisy_dries_scores() {
        let pen = EditPenalties::default();
        let obs = noisy_dries();
        let dries = prob_levenshtein("dries", &obs, &pen).unwrap();
        assert!((dries - 0.64).abs() < 1e-12);
        // d=d 0.8, i/r substituted 0.3, i=i, 3 against {e:0.8, 3:0.2}: substituting
        // e (0.8 * 0.3) beats matching 3 (0.2), s=s
        let dii3s = prob_levenshtein("dii3s", &obs, &pen).unwrap();
        assert!((dii3s - 0.8 * 0.3 * 0.8 * 0.3).abs() < 1e-12);
        let wannes = prob_levenshtein("wannes", &obs, &pen).unwrap();
        assert!(wannes < dii3s);
    }

    #[test]
    fn deterministic_exact_match_scores_one() {
        let obs = ProbString::certain("QTY");
        assert_eq!(prob_levenshtein("QTY", &obs, &EditPenalties::default()).unwrap(), 1.0);
    }

    #[test]
    fn empty_position_rejected() {
        let obs = ProbString::new(vec![CharDistribution::default()]);
        assert_eq!(
            prob_levenshtein("a", &obs, &EditPenalties::default()),
            Err(TextError::EmptyDistribution(0))
        );
    }

    #[test]
    fn best_match_orders_and_breaks_ties() {
        let pen = EditPenalties::default();
        let ranked = best_match(&["wannes", "dii3s", "dries"], &noisy_dries(), &pen).unwrap();
        assert_eq!(ranked[0].0, "dries");
        let obs = ProbString::certain("ab");
        let ranked = best_match(&["ax", "aa"], &obs, &pen).unwrap();
        assert_eq!(ranked[0].1, ranked[1].1);
        assert_eq!(ranked[0].0, "aa");
        assert_eq!(best_match::<&str>(&[], &obs, &pen), Err(TextError::NoCandidates));
    }

    #[test]
    fn prior_ratio_eight() {
        let prior = type_prior([']', '1', '|', 'I', 'J', 'l'], |c| c.is_ascii_digit(), 8.0).unwrap();
        assert!((prior.get('1') - 8.0 / 13.0).abs() < 1e-12);
        assert!((prior.get(']') - 1.0 / 13.0).abs() < 1e-12);
        let flat = type_prior(['a', 'b'], |_| true, 8.0).unwrap();
        assert_eq!(flat.get('a'), 0.5);
        let one = type_prior(['1', 'b'], |c| c.is_ascii_digit(), 1.0).unwrap();
        assert_eq!(one.get('1'), 0.5);
    }

    #[test]
    fn posterior_edge_cases() {
        let ocr = CharDistribution::new([('a', 0.6), ('b', 0.2)]).unwrap();
        let uniform = CharDistribution::new([('a', 0.5), ('b', 0.5)]).unwrap();
        let post = virtual_evidence_posterior(&uniform, &ocr).unwrap();
        assert!((post.get('a') - 0.75).abs() < 1e-12);
        let point = CharDistribution::certain('b');
        let post = virtual_evidence_posterior(&point, &ocr).unwrap();
        assert_eq!(post.get('b'), 1.0);
        let disjoint = CharDistribution::certain('z');
        assert_eq!(virtual_evidence_posterior(&disjoint, &ocr), Err(TextError::NoOverlap));
    }

    #[test]
    fn class_names_parse() {
        assert_eq!("digit".parse::<CharClass>().unwrap(), CharClass::Digit);
        assert!("hex".parse::<CharClass>().is_err());
    }
}
