//! The `tdassist` command line.
//!
//! Each subcommand loads its inputs, makes one library call and prints the
//! result as JSON (or a plain table with `--pretty`).

mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use tdassist_core::bootstrap::{learn_bootstrapped, standard_results, tasks_for_bias, DependencyGraph};
use tdassist_core::drawing::Drawing;
use tdassist_core::ilp::{corpus, evaluate, predict, Bias, CorpusDrawing, Metrics};
use tdassist_core::index::{extract_facts, DesignIndex, IndexConfig, IndexError};
use tdassist_core::logic::{parse_program, PredKey, Program};
use tdassist_core::mining::mine;
use tdassist_core::probtext::best_match;
use tdassist_core::segmentation::{segment, Bitmap};
use tdassist_core::similarity::RankedDesign;
use thiserror::Error;

pub use config::{Config, Paths, CONFIG_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed inputs.
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

// Index errors on the read side are bad input; write failures go through
// `persist` below.
impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        invalid(e)
    }
}

fn persist(index: &DesignIndex, path: &Path) -> Result<(), CliError> {
    index.persist(path).map_err(|e| internal(format!("{}: {e}", path.display())))
}

fn load_index(path: &Path) -> Result<DesignIndex, CliError> {
    DesignIndex::load(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

#[derive(Debug, Parser)]
#[command(name = "tdassist", version, about = "Learn table parsers for technical drawings and search a design database")]
pub struct Cli {
    /// Seed for example-order shuffling during learning.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Plain-text tables instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Config file; defaults to $TDASSIST_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a PGM or PNG drawing into dense regions.
    Segment {
        image: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        threshold: Option<u8>,
        #[arg(long)]
        min_pts: Option<usize>,
    },
    /// Learn parser programs from a directory of labeled drawings.
    Learn {
        dir: Option<PathBuf>,
        #[arg(long)]
        bias: Option<PathBuf>,
        #[arg(long)]
        bootstrap: bool,
        /// Dependency graph (`a -> b` lines); derived from a standard pass if absent.
        #[arg(long, requires = "bootstrap")]
        graph: Option<PathBuf>,
        /// Labeled drawings to report test F1 on.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Extract facts and labels from one drawing with learned programs.
    Parse {
        document: PathBuf,
        #[arg(long)]
        programs: Option<PathBuf>,
    },
    /// Mine frequent patterns from a directory of drawings.
    Mine {
        dir: Option<PathBuf>,
        #[arg(long)]
        bias: Option<PathBuf>,
        #[arg(long)]
        programs: Option<PathBuf>,
        #[arg(long)]
        min_support: Option<f64>,
        #[arg(long)]
        max_literals: Option<usize>,
    },
    /// Build or extend a design index.
    Index {
        #[command(subcommand)]
        action: IndexCommand,
    },
    /// Rank indexed designs against a drawing.
    Rank {
        document: PathBuf,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(short, long)]
        k: Option<usize>,
        /// Use three-valued features even when no cell is empty.
        #[arg(long)]
        partial: bool,
    },
    /// Correct OCR'd cell texts against a dictionary.
    Correct {
        document: PathBuf,
        #[arg(long)]
        dictionary: Option<PathBuf>,
    },
    /// Write a synthetic labeled parts-list corpus, one drawing per row count.
    Synth {
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
        rows: Vec<usize>,
    },
    /// Serve the HTTP search API.
    Serve {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Mine patterns from a corpus and index all of it.
    Build {
        dir: Option<PathBuf>,
        #[command(flatten)]
        opts: BuildOpts,
    },
    /// Add one drawing to an existing index.
    Add {
        document: PathBuf,
        #[arg(long)]
        index: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct BuildOpts {
    /// Mode declarations for mining.
    #[arg(long)]
    bias: Option<PathBuf>,
    #[arg(long)]
    programs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    min_support: Option<f64>,
    #[arg(long)]
    max_literals: Option<usize>,
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match run(cli) {
        Ok(text) => {
            if out.write_all(text.as_bytes()).is_err() {
                return 2;
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn pick(flag: Option<PathBuf>, cfg: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    flag.or_else(|| cfg.clone()).ok_or_else(|| invalid(format!("missing {what} path (flag or config)")))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read(path)?).map_err(|_| invalid(format!("{}: not UTF-8", path.display())))
}

fn load_document(path: &Path) -> Result<Drawing, CliError> {
    Drawing::from_json(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Every `*.json` drawing in `dir`, by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<Drawing>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| invalid(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(invalid(format!("{}: no .json drawings", dir.display())));
    }
    paths.iter().map(|p| load_document(p)).collect()
}

fn load_bias(path: &Path) -> Result<Bias, CliError> {
    Bias::parse(&read_text(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_programs(path: Option<&Path>) -> Result<Program, CliError> {
    match path {
        Some(p) => parse_program(&read_text(p)?).map_err(|e| invalid(format!("{}: {e}", p.display()))),
        None => Ok(Program::default()),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(internal)?;
    s.push('\n');
    Ok(s)
}

pub fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = Config::resolve(cli.config.as_deref())?;
    let pretty = cli.pretty;
    match cli.command {
        Command::Segment { image, eps, threshold, min_pts } => {
            let mut params = cfg.segment;
            params.eps = eps.unwrap_or(params.eps);
            params.threshold = threshold.unwrap_or(params.threshold);
            params.min_pts = min_pts.or(params.min_pts);
            let bmp = Bitmap::open(&image).map_err(|e| invalid(format!("{}: {e}", image.display())))?;
            let seg = segment(&bmp, &params).map_err(invalid)?;
            if pretty {
                let mut s = String::from("x\ty\twidth\theight\tpixels\n");
                for c in &seg.clusters {
                    let b = &c.bbox;
                    let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", b.x, b.y, b.width, b.height, c.pixels);
                }
                return Ok(s);
            }
            to_json(&seg)
        }
        Command::Learn { dir, bias, bootstrap, graph, test } => {
            let dir = pick(dir, &cfg.paths.corpus, "corpus")?;
            let bias = load_bias(&pick(bias, &cfg.paths.bias, "bias")?)?;
            let graph = graph.map(|g| read_text(&g)).transpose()?;
            let report = learn(&load_dir(&dir)?, &bias, &cfg, bootstrap, graph.as_deref(), test.as_deref(), cli.seed)?;
            if pretty {
                let mut s = report.program.clone();
                s.push_str("\nlabel\ttrain_f1\ttest_f1\tliterals\n");
                for t in &report.targets {
                    let test = t.test.as_ref().map_or("-".to_string(), |m| format!("{:.3}", m.f1));
                    let _ = writeln!(s, "{}\t{:.3}\t{}\t{}", t.label, t.training.f1, test, t.literals);
                }
                return Ok(s);
            }
            to_json(&report)
        }
        Command::Parse { document, programs } => {
            let d = load_document(&document)?;
            let programs = load_programs(programs.or(cfg.paths.programs.clone()).as_deref())?;
            let out = parse(&d, &programs, &cfg);
            if pretty {
                let mut s = String::new();
                for (label, atoms) in &out.labels {
                    let _ = writeln!(s, "{label}: {}", atoms.join(" "));
                }
                return Ok(s);
            }
            to_json(&out)
        }
        Command::Mine { dir, bias, programs, min_support, max_literals } => {
            cfg.mining.min_support = min_support.unwrap_or(cfg.mining.min_support);
            cfg.mining.max_literals = max_literals.unwrap_or(cfg.mining.max_literals);
            cfg.validate()?;
            let dir = pick(dir, &cfg.paths.corpus, "corpus")?;
            let bias = load_bias(&pick(bias, &cfg.paths.bias, "bias")?)?;
            let programs = load_programs(programs.or(cfg.paths.programs.clone()).as_deref())?;
            let index_cfg = index_config(&cfg);
            let facts: Vec<_> = load_dir(&dir)?
                .iter()
                .map(|d| tdassist_core::logic::FactIndex::new(&extract_facts(d, &programs, &index_cfg)))
                .collect();
            let kbs: Vec<_> = facts
                .iter()
                .map(|f| {
                    let mut kb = tdassist_core::logic::KnowledgeBase::new();
                    kb.add_facts(f);
                    kb
                })
                .collect();
            let patterns = mine(&kbs, &bias, &cfg.mining).map_err(invalid)?;
            if pretty {
                return Ok(patterns.to_text());
            }
            to_json(&patterns.patterns.iter().map(|m| json!({"pattern": m.pattern.to_string(), "support": m.support})).collect::<Vec<_>>())
        }
        Command::Index { action: IndexCommand::Build { dir, opts } } => {
            cfg.mining.min_support = opts.min_support.unwrap_or(cfg.mining.min_support);
            cfg.mining.max_literals = opts.max_literals.unwrap_or(cfg.mining.max_literals);
            cfg.validate()?;
            let dir = pick(dir, &cfg.paths.corpus, "corpus")?;
            let bias = load_bias(&pick(opts.bias, &cfg.paths.bias, "bias")?)?;
            let programs = load_programs(opts.programs.or(cfg.paths.programs.clone()).as_deref())?;
            let out = pick(opts.out, &cfg.paths.index, "index")?;
            let index = DesignIndex::build(&load_dir(&dir)?, programs, bias, index_config(&cfg))?;
            persist(&index, &out)?;
            let summary = json!({"index": out.display().to_string(), "designs": index.len(), "patterns": index.patterns.len()});
            if pretty {
                return Ok(format!("{} designs, {} patterns -> {}\n", index.len(), index.patterns.len(), out.display()));
            }
            to_json(&summary)
        }
        Command::Index { action: IndexCommand::Add { document, index } } => {
            let path = pick(index, &cfg.paths.index, "index")?;
            let mut idx = load_index(&path)?;
            let d = load_document(&document)?;
            let added = idx.add_design(&d)?;
            if added {
                persist(&idx, &path)?;
            }
            to_json(&json!({"id": d.id, "added": added}))
        }
        Command::Rank { document, index, alpha, k, partial } => {
            cfg.alpha = alpha.unwrap_or(cfg.alpha);
            cfg.k = k.unwrap_or(cfg.k);
            cfg.validate()?;
            let idx = load_index(&pick(index, &cfg.paths.index, "index")?)?;
            let d = load_document(&document)?;
            let ranking = if partial {
                idx.rank_partial(&d, cfg.alpha, cfg.k)?.0
            } else {
                idx.rank(&d, cfg.alpha, cfg.k)?
            };
            if pretty {
                return Ok(ranking_table(&ranking));
            }
            to_json(&ranking)
        }
        Command::Correct { document, dictionary } => {
            let d = load_document(&document)?;
            let dict_path = pick(dictionary, &cfg.paths.dictionary, "dictionary")?;
            let words: Vec<String> =
                read_text(&dict_path)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
            let rows = correct(&d, &words, &cfg)?;
            if pretty {
                let mut s = String::from("cell\tobserved\tcorrected\tscore\n");
                for r in &rows {
                    let _ = writeln!(s, "{}\t{}\t{}\t{:.6}", r.cell, r.observed, r.corrected, r.score);
                }
                return Ok(s);
            }
            to_json(&rows)
        }
        Command::Synth { out, rows } => {
            if rows.contains(&0) {
                return Err(invalid("row counts must be positive"));
            }
            std::fs::create_dir_all(&out).map_err(internal)?;
            let drawings = tdassist_core::synth::corpus(&rows, cli.seed.unwrap_or(0));
            for d in &drawings {
                let path = out.join(format!("{}.json", d.id));
                std::fs::write(&path, d.to_json_pretty()).map_err(internal)?;
            }
            to_json(&json!({"dir": out.display().to_string(), "drawings": drawings.len()}))
        }
        Command::Serve { index, bind } => {
            let path = pick(index, &cfg.paths.index, "index")?;
            let addr: SocketAddr = bind
                .unwrap_or(cfg.bind.clone())
                .parse()
                .map_err(|e| invalid(format!("bind address: {e}")))?;
            let idx = load_index(&path)?;
            let state = tdassist_server::AppState::new(idx, Some(path));
            let rt = tokio::runtime::Runtime::new().map_err(internal)?;
            rt.block_on(tdassist_server::serve(state, addr)).map_err(internal)?;
            Ok(String::new())
        }
    }
}

fn index_config(cfg: &Config) -> IndexConfig {
    IndexConfig { adjacency: cfg.adjacency, depth: cfg.search.proof_depth, mining: cfg.mining }
}

fn ranking_table(r: &[RankedDesign]) -> String {
    let mut s = String::from("rank\tid\tcombined\ttabular\tvisual\n");
    for d in r {
        let v = d.sim_visual.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "{}\t{}\t{:.4}\t{:.4}\t{}", d.rank, d.id, d.combined, d.sim_tabular, v);
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetReport {
    pub label: String,
    pub clauses: Vec<String>,
    pub literals: usize,
    pub training: Metrics,
    pub test: Option<Metrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LearnReport {
    pub mode: &'static str,
    pub order: Vec<String>,
    pub graph: Option<String>,
    pub program: String,
    pub targets: Vec<TargetReport>,
}

/// Learns every head mode in `bias`, standard or bootstrapped.
pub fn learn(
    drawings: &[Drawing],
    bias: &Bias,
    cfg: &Config,
    bootstrap: bool,
    graph: Option<&str>,
    test_dir: Option<&Path>,
    seed: Option<u64>,
) -> Result<LearnReport, CliError> {
    let train = corpus(drawings.to_vec(), &cfg.adjacency);
    let mut tasks = tasks_for_bias(&train, bias, cfg.search).map_err(invalid)?;
    if let Some(seed) = seed {
        for task in tasks.values_mut() {
            task.shuffle_examples(&mut ChaCha8Rng::seed_from_u64(seed));
        }
    }
    let test: Option<Vec<CorpusDrawing>> =
        test_dir.map(|d| load_dir(d).map(|ds| corpus(ds, &cfg.adjacency))).transpose()?;
    let depth = cfg.search.proof_depth;
    let (order, graph_text, learned, full) = if bootstrap {
        let labels: Vec<String> = tasks.keys().cloned().collect();
        let graph = graph.map(|g| DependencyGraph::parse(g, &labels)).transpose().map_err(invalid)?;
        let out = learn_bootstrapped(&tasks, graph).map_err(invalid)?;
        (out.order, Some(out.graph.to_string()), out.learned, Some(out.program))
    } else {
        let (learned, _) = standard_results(&tasks).map_err(invalid)?;
        (tasks.keys().cloned().collect(), None, learned, None)
    };
    let mut targets = Vec::new();
    let mut program = Program::default();
    for label in &order {
        let ind = &learned[label];
        program.extend(&ind.program);
        let test = test.as_ref().map(|t| {
            // Bootstrapped programs may call the programs of other labels.
            let background = Program::new(
                full.iter().flat_map(|p| &p.clauses).filter(|c| c.head.key() != ind.target).cloned().collect(),
            );
            evaluate(&ind.program, &background, t, &ind.target, depth).metrics
        });
        targets.push(TargetReport {
            label: label.clone(),
            clauses: ind.program.clauses.iter().map(|c| c.to_string()).collect(),
            literals: ind.program.literal_count(),
            training: ind.training,
            test,
        });
    }
    Ok(LearnReport {
        mode: if bootstrap { "bootstrap" } else { "standard" },
        order,
        graph: graph_text,
        program: program.to_string(),
        targets,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ParseOutput {
    pub id: String,
    pub facts: Vec<String>,
    pub labels: BTreeMap<String, Vec<String>>,
}

/// Background facts of `d` and every target atom `programs` derive.
pub fn parse(d: &Drawing, programs: &Program, cfg: &Config) -> ParseOutput {
    let facts = d.background(&cfg.adjacency);
    let cd = CorpusDrawing::with_facts(d.clone(), &facts);
    let mut labels = BTreeMap::new();
    let targets: BTreeSet<PredKey> = programs.clauses.iter().map(|c| c.head.key()).collect();
    for t in targets {
        let atoms = predict(programs, &Program::default(), &cd, &t, cfg.search.proof_depth);
        labels.entry(t.name.to_string()).or_insert_with(Vec::new).extend(atoms.iter().map(|a| a.to_string()));
    }
    ParseOutput { id: d.id.clone(), facts: facts.iter().map(|a| a.to_string()).collect(), labels }
}

#[derive(Debug, Clone, Serialize)]
pub struct Correction {
    pub cell: String,
    pub observed: String,
    pub corrected: String,
    pub score: f64,
}

/// Best dictionary word for every cell carrying an OCR distribution.
pub fn correct(d: &Drawing, words: &[String], cfg: &Config) -> Result<Vec<Correction>, CliError> {
    let mut out = Vec::new();
    for c in &d.cells {
        let Some(ocr) = &c.ocr else { continue };
        let scored = best_match(words, ocr, &cfg.penalties).map_err(invalid)?;
        let (corrected, score) = scored[0].clone();
        out.push(Correction { cell: c.id.clone(), observed: ocr.best_reading(), corrected, score });
    }
    Ok(out)
}
