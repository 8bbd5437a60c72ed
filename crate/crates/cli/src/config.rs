use std::path::{Path, PathBuf};

use serde::Deserialize;
use tdassist_core::drawing::AdjacencyParams;
use tdassist_core::ilp::SearchParams;
use tdassist_core::mining::MiningParams;
use tdassist_core::probtext::EditPenalties;
use tdassist_core::segmentation::SegmentParams;
use tdassist_core::similarity::DEFAULT_ALPHA;

use crate::CliError;

pub const CONFIG_ENV: &str = "TDASSIST_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub bias: Option<PathBuf>,
    pub programs: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
}

/// File configuration. Command-line flags take precedence.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub paths: Paths,
    pub search: SearchParams,
    pub penalties: EditPenalties,
    pub mining: MiningParams,
    pub adjacency: AdjacencyParams,
    pub segment: SegmentParams,
    pub alpha: f64,
    pub k: usize,
    pub bind: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            paths: Paths::default(),
            search: SearchParams::default(),
            penalties: EditPenalties::default(),
            mining: MiningParams::default(),
            adjacency: AdjacencyParams::default(),
            segment: SegmentParams::default(),
            alpha: DEFAULT_ALPHA,
            k: 10,
            bind: "127.0.0.1:8080".into(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))?;
        let cfg: Config =
            toml::from_str(&text).map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file named by `explicit`, else by the environment, else
    /// returns defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Config, CliError> {
        match explicit.map(Path::to_path_buf).or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from)) {
            Some(p) => Config::load(&p),
            None => Ok(Config::default()),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Invalid(m));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.mining.min_support > 0.0 && self.mining.min_support <= 1.0) {
            return bad(format!("mining.min_support must lie in (0, 1], got {}", self.mining.min_support));
        }
        if self.mining.max_literals == 0 {
            return bad("mining.max_literals must be at least 1".into());
        }
        if self.search.max_clause_len < 1 || self.search.node_bound == 0 {
            return bad("search.max_clause_len and search.node_bound must be positive".into());
        }
        if !(self.segment.eps > 0.0) {
            return bad(format!("segment.eps must be positive, got {}", self.segment.eps));
        }
        self.penalties.validate().map_err(|e| CliError::Invalid(format!("penalties: {e}")))
    }
}
