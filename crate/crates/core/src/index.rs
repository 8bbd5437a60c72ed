//! Persistent design database and ranking against it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::drawing::{AdjacencyParams, Drawing, DrawingError};
use crate::ilp::{Bias, BiasError};
use crate::logic::{
    parse_program, prove, Atom, FactIndex, FactSet, KnowledgeBase, PredKey, Program, ProveOptions,
    Term,
};
use crate::mining::{mine, vectorize, MiningError, MiningParams, PatternSet};
use crate::similarity::{
    check_visual, evaluate_partial_all, rank, Candidate, Query, QueryTabular, RankedDesign,
    SimilarityError, TriState,
};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "tdassist-index";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("design {0} already indexed with a different document")]
    Conflict(String),
    #[error("design {0} has empty cells; only complete designs can be indexed")]
    PartialDesign(String),
    #[error("unknown design {0}")]
    UnknownDesign(String),
    #[error("index is empty")]
    Empty,
    #[error("index file is corrupt: {0}")]
    Integrity(String),
    #[error("index format version {found} is not supported (expected {expected})")]
    Migration { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Drawing(#[from] DrawingError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Bias(#[from] BiasError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedDesign {
    pub id: String,
    pub digest: String,
    pub facts: FactSet,
    pub features: Vec<bool>,
    pub visual: Option<Vec<f64>>,
}

/// Settings fixed when an index is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub adjacency: AdjacencyParams,
    pub depth: u32,
    pub mining: MiningParams,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            adjacency: AdjacencyParams::default(),
            depth: crate::logic::DEFAULT_DEPTH,
            mining: MiningParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignIndex {
    pub version: u32,
    pub config: IndexConfig,
    pub bias: Bias,
    pub programs: Program,
    pub patterns: PatternSet,
    pub designs: BTreeMap<String, IndexedDesign>,
}

/// Hex SHA-256 of the drawing's canonical JSON.
pub fn document_digest(d: &Drawing) -> String {
    hex::encode(Sha256::digest(d.to_json()))
}

/// Background facts of a complete drawing plus every atom the parser
/// programs derive for it.
pub fn extract_facts(d: &Drawing, programs: &Program, config: &IndexConfig) -> FactSet {
    let mut facts = d.background(&config.adjacency);
    let idx = FactIndex::new(&facts);
    let mut kb = KnowledgeBase::new();
    kb.add_facts(&idx).add_program(programs);
    let targets: BTreeSet<PredKey> = programs.clauses.iter().map(|c| c.head.key()).collect();
    let mut derived = Vec::new();
    for t in &targets {
        let goal = Atom::with_pred(t.name.clone(), (0..t.arity as u32).map(Term::var).collect());
        let mut atoms: Vec<Atom> = prove(&kb, &goal, ProveOptions::with_depth(config.depth))
            .iter()
            .map(|s| goal.apply(s))
            .filter(Atom::is_ground)
            .collect();
        atoms.sort();
        derived.extend(atoms);
    }
    facts.extend(derived);
    facts
}

impl DesignIndex {
    pub fn new(bias: Bias, programs: Program, patterns: PatternSet, config: IndexConfig) -> Self {
        DesignIndex { version: FORMAT_VERSION, config, bias, programs, patterns, designs: BTreeMap::new() }
    }

    /// Mines the pattern set from `drawings` and indexes all of them.
    pub fn build(
        drawings: &[Drawing],
        programs: Program,
        bias: Bias,
        config: IndexConfig,
    ) -> Result<Self, IndexError> {
        for d in drawings {
            d.validate()?;
            if d.is_partial() {
                return Err(IndexError::PartialDesign(d.id.clone()));
            }
        }
        let facts: Vec<FactIndex> = drawings
            .par_iter()
            .map(|d| FactIndex::new(&extract_facts(d, &programs, &config)))
            .collect();
        let kbs: Vec<KnowledgeBase> = facts
            .iter()
            .map(|f| {
                let mut kb = KnowledgeBase::new();
                kb.add_facts(f);
                kb
            })
            .collect();
        let patterns = mine(&kbs, &bias, &config.mining)?;
        log::info!("mined {} patterns from {} drawings", patterns.len(), drawings.len());
        let mut index = DesignIndex::new(bias, programs, patterns, config);
        for d in drawings {
            index.add_design(d)?;
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.designs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.designs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&IndexedDesign> {
        self.designs.get(id)
    }

    /// Bit vector of a complete drawing against the frozen pattern set.
    pub fn features(&self, facts: &FactSet) -> Vec<bool> {
        let idx = FactIndex::new(facts);
        let mut kb = KnowledgeBase::new();
        kb.add_facts(&idx);
        vectorize("", &kb, &self.patterns, self.config.depth).bits
    }

    /// Three-valued features of any drawing, evaluated with the parser
    /// programs over its background facts.
    pub fn partial_features(&self, d: &Drawing) -> Vec<TriState> {
        let facts = d.background(&self.config.adjacency);
        let idx = FactIndex::new(&facts);
        let mut kb = KnowledgeBase::new();
        kb.add_facts(&idx).add_program(&self.programs);
        evaluate_partial_all(&self.patterns, &kb, self.config.depth)
    }

    /// Stores `d`. Returns false when the identical document is already
    /// present.
    pub fn add_design(&mut self, d: &Drawing) -> Result<bool, IndexError> {
        d.validate()?;
        if d.is_partial() {
            return Err(IndexError::PartialDesign(d.id.clone()));
        }
        if let Some(v) = &d.visual_features {
            check_visual(v)?;
        }
        let digest = document_digest(d);
        if let Some(existing) = self.designs.get(&d.id) {
            return if existing.digest == digest { Ok(false) } else { Err(IndexError::Conflict(d.id.clone())) };
        }
        let facts = extract_facts(d, &self.programs, &self.config);
        let features = self.features(&facts);
        self.designs.insert(
            d.id.clone(),
            IndexedDesign { id: d.id.clone(), digest, facts, features, visual: d.visual_features.clone() },
        );
        Ok(true)
    }

    fn candidates(&self) -> impl Iterator<Item = Candidate<'_>> {
        self.designs.values().map(|d| Candidate {
            id: &d.id,
            features: &d.features,
            visual: d.visual.as_deref(),
        })
    }

    /// Query features: binary for complete drawings, three-valued for
    /// drawings with empty cells.
    pub fn query_for(&self, d: &Drawing) -> Query {
        let tabular = if d.is_partial() {
            QueryTabular::Partial(self.partial_features(d))
        } else {
            QueryTabular::Full(self.features(&extract_facts(d, &self.programs, &self.config)))
        };
        Query { tabular, visual: d.visual_features.clone() }
    }

    pub fn rank_query(&self, q: &Query, alpha: f64, k: usize) -> Result<Vec<RankedDesign>, IndexError> {
        if self.is_empty() {
            return Err(IndexError::Empty);
        }
        Ok(rank(q, self.candidates(), alpha, k)?)
    }

    pub fn rank(&self, d: &Drawing, alpha: f64, k: usize) -> Result<Vec<RankedDesign>, IndexError> {
        d.validate()?;
        self.rank_query(&self.query_for(d), alpha, k)
    }

    /// Ranks through the three-valued path whether or not cells are empty.
    pub fn rank_partial(
        &self,
        d: &Drawing,
        alpha: f64,
        k: usize,
    ) -> Result<(Vec<RankedDesign>, Vec<TriState>), IndexError> {
        d.validate()?;
        let tri = self.partial_features(d);
        let q = Query { tabular: QueryTabular::Partial(tri.clone()), visual: d.visual_features.clone() };
        Ok((self.rank_query(&q, alpha, k)?, tri))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = Payload {
            config: self.config.clone(),
            bias: self.bias.to_string(),
            programs: self.programs.to_string(),
            patterns: self.patterns.to_text(),
            designs: self
                .designs
                .values()
                .map(|d| StoredDesign {
                    id: d.id.clone(),
                    digest: d.digest.clone(),
                    facts: d.facts.to_string(),
                    features: d.features.iter().map(|b| if *b { '1' } else { '0' }).collect(),
                    visual: d.visual.clone(),
                })
                .collect(),
        };
        let body = serde_json::to_vec(&payload).expect("index payload serializes");
        let mut out = format!("{MAGIC} {} sha256:{}\n", self.version, hex::encode(Sha256::digest(&body)))
            .into_bytes();
        out.extend(body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let integrity = |m: &str| IndexError::Integrity(m.to_string());
        let nl = bytes.iter().position(|b| *b == b'\n').ok_or_else(|| integrity("missing header"))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| integrity("header is not UTF-8"))?;
        let mut parts = header.split(' ');
        if parts.next() != Some(MAGIC) {
            return Err(integrity("not an index file"));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| integrity("bad version field"))?;
        if version != FORMAT_VERSION {
            return Err(IndexError::Migration { found: version, expected: FORMAT_VERSION });
        }
        let digest = parts
            .next()
            .and_then(|d| d.strip_prefix("sha256:"))
            .ok_or_else(|| integrity("bad digest field"))?;
        let body = &bytes[nl + 1..];
        if hex::encode(Sha256::digest(body)) != digest {
            return Err(integrity("content digest mismatch"));
        }
        let p: Payload = serde_json::from_slice(body).map_err(|e| IndexError::Integrity(e.to_string()))?;
        let programs = parse_program(&p.programs).map_err(|e| IndexError::Integrity(e.to_string()))?;
        let patterns = PatternSet::from_text(&p.patterns)?;
        let bias = Bias::parse(&p.bias)?;
        let mut designs = BTreeMap::new();
        for d in p.designs {
            let facts: FactSet = parse_program(&d.facts)
                .map_err(|e| IndexError::Integrity(e.to_string()))?
                .clauses
                .into_iter()
                .map(|c| c.head)
                .collect();
            let features: Vec<bool> = d.features.chars().map(|c| c == '1').collect();
            if features.len() != patterns.len() {
                return Err(integrity("feature vector length differs from pattern count"));
            }
            designs.insert(
                d.id.clone(),
                IndexedDesign { id: d.id, digest: d.digest, facts, features, visual: d.visual },
            );
        }
        Ok(DesignIndex { version, config: p.config, bias, programs, patterns, designs })
    }

    /// Writes atomically through a temporary file in the same directory.
    pub fn persist(&self, path: &Path) -> Result<(), IndexError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct Payload {
    config: IndexConfig,
    bias: String,
    programs: String,
    patterns: String,
    designs: Vec<StoredDesign>,
}

#[derive(Serialize, Deserialize)]
struct StoredDesign {
    id: String,
    digest: String,
    facts: String,
    features: String,
    visual: Option<Vec<f64>>,
}
