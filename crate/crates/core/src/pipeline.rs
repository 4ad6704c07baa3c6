//! Subcommand implementations and run metadata.
//!
//! Every command is driven by a [`RunConfig`]. Commands that write a file
//! also write `<file>.meta`, a `key=value` record of the resolved config,
//! shuffle counters and wall times from which the run can be repeated.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::anchors::{build_anchor_corpus, DEFAULT_MAX_ANCHOR_TOKENS};
use crate::baseline::{build_index, load_index, save_index, IndexSearcher};
use crate::bench::{emit_csv, mean_per_size, run_bench, BenchConfig, System};
use crate::corpus::{
    generate_queries, generate_with, read_corpus, read_queries, write_corpus, write_queries, Document, SyntheticConfig,
};
use crate::engine::{EngineOptions, ShuffleStats};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Qrels, RunFile};
use crate::scoring::ScoringParams;
use crate::search::{sequential_search, RankedList, SearchConfig, DEFAULT_TOPK};
use crate::stats::{compute_stats, load_stats, save_stats, term_counts, tokenize, CollectionStats, TextOptions};

pub const COMMANDS: &[&str] = &["generate", "stats", "anchors", "search", "index", "isearch", "eval", "bench"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub inputs: BTreeMap<String, PathBuf>,
    pub output: Option<PathBuf>,
    pub worker_count: usize,
    pub shard_count: usize,
    pub lambda: f64,
    pub length_prior: bool,
    pub topk: usize,
    pub strip_html: bool,
    pub combiner: bool,
    pub seed: u64,
    pub run_tag: String,
    /// Command-specific settings (sizes, doc counts, cutoffs, ...).
    pub extra: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        RunConfig {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            output: None,
            worker_count: 1,
            shard_count: 4,
            lambda: ScoringParams::default().lambda,
            length_prior: true,
            topk: DEFAULT_TOPK,
            strip_html: false,
            combiner: true,
            seed: 0,
            run_tag: "mirex".to_string(),
            extra: BTreeMap::new(),
        }
    }

    pub fn input(mut self, name: &str, path: impl Into<PathBuf>) -> Self {
        self.inputs.insert(name.to_string(), path.into());
        self
    }

    pub fn with_output(mut self, path: impl Into<PathBuf>) -> Self {
        self.output = Some(path.into());
        self
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    fn required_input(&self, name: &str) -> Result<&Path> {
        self.inputs
            .get(name)
            .map(PathBuf::as_path)
            .ok_or_else(|| Error::Config(format!("{} needs --{name}", self.command)))
    }

    fn required_output(&self) -> Result<&Path> {
        self.output.as_deref().ok_or_else(|| Error::Config(format!("{} needs --out", self.command)))
    }

    fn extra_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.extra.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("invalid value {v:?} for {key}"))),
        }
    }

    pub fn engine(&self) -> EngineOptions {
        EngineOptions { combine: self.combiner, ..EngineOptions::new(self.worker_count) }
    }

    pub fn search_config(&self) -> Result<SearchConfig> {
        if self.topk == 0 {
            return Err(Error::Config("--topk must be at least 1".into()));
        }
        Ok(SearchConfig {
            scoring: ScoringParams::new(self.lambda, self.length_prior)?,
            topk: self.topk,
            text: self.text(),
        })
    }

    pub fn text(&self) -> TextOptions {
        TextOptions { strip_html: self.strip_html }
    }

    fn validate(&self) -> Result<()> {
        if !COMMANDS.contains(&self.command.as_str()) {
            return Err(Error::Config(format!("unknown command {:?}", self.command)));
        }
        if self.worker_count == 0 || self.shard_count == 0 {
            return Err(Error::Config("worker and shard counts must be positive".into()));
        }
        Ok(())
    }
}

/// Resolved config plus what the run measured.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub config: RunConfig,
    pub shuffle: BTreeMap<String, String>,
    pub timings: BTreeMap<String, f64>,
    pub results: BTreeMap<String, String>,
}

impl RunMetadata {
    fn new(config: &RunConfig) -> Self {
        RunMetadata {
            config: config.clone(),
            shuffle: BTreeMap::new(),
            timings: BTreeMap::new(),
            results: BTreeMap::new(),
        }
    }

    fn record_shuffle<K: Ord>(&mut self, stats: &ShuffleStats<K>) {
        self.shuffle.insert("records_emitted_by_maps".into(), stats.records_emitted_by_maps.to_string());
        self.shuffle.insert("records_after_combine".into(), stats.records_after_combine.to_string());
        self.shuffle.insert("keys".into(), stats.per_key_after_combine.len().to_string());
        self.shuffle.insert("max_per_key_after_combine".into(), stats.max_per_key().to_string());
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| writeln!(out, "{k}={v}").expect("string write");
        kv("config.command", &c.command);
        for (name, path) in &c.inputs {
            kv(&format!("config.input.{name}"), &path.display());
        }
        if let Some(o) = &c.output {
            kv("config.output", &o.display());
        }
        kv("config.worker_count", &c.worker_count);
        kv("config.shard_count", &c.shard_count);
        kv("config.lambda", &c.lambda);
        kv("config.length_prior", &c.length_prior);
        kv("config.topk", &c.topk);
        kv("config.strip_html", &c.strip_html);
        kv("config.seed", &c.seed);
        kv("config.run_tag", &c.run_tag);
        for (k, v) in &c.extra {
            kv(&format!("config.extra.{k}"), v);
        }
        // the combiner switch lives with the counters it affects
        kv("shuffle.combiner", &c.combiner);
        for (k, v) in &self.shuffle {
            kv(&format!("shuffle.{k}"), v);
        }
        for (k, v) in &self.results {
            kv(&format!("result.{k}"), v);
        }
        for (k, v) in &self.timings {
            kv(&format!("timing.{k}"), &format_args!("{v:.6}"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<RunMetadata> {
        let mut config = RunConfig::new("");
        let mut meta = RunMetadata::new(&config);
        let bad = |line: &str| Error::Format(format!("malformed metadata line {line:?}"));
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line.split_once('=').ok_or_else(|| bad(line))?;
            let num = |v: &str| v.parse::<u64>().map_err(|_| bad(line));
            let flag = |v: &str| v.parse::<bool>().map_err(|_| bad(line));
            if let Some(name) = key.strip_prefix("config.input.") {
                config.inputs.insert(name.to_string(), PathBuf::from(value));
            } else if let Some(name) = key.strip_prefix("config.extra.") {
                config.extra.insert(name.to_string(), value.to_string());
            } else if let Some(name) = key.strip_prefix("shuffle.") {
                if name == "combiner" {
                    config.combiner = flag(value)?;
                } else {
                    meta.shuffle.insert(name.to_string(), value.to_string());
                }
            } else if let Some(name) = key.strip_prefix("result.") {
                meta.results.insert(name.to_string(), value.to_string());
            } else if let Some(name) = key.strip_prefix("timing.") {
                meta.timings.insert(name.to_string(), value.parse().map_err(|_| bad(line))?);
            } else {
                match key {
                    "config.command" => config.command = value.to_string(),
                    "config.output" => config.output = Some(PathBuf::from(value)),
                    "config.worker_count" => config.worker_count = num(value)? as usize,
                    "config.shard_count" => config.shard_count = num(value)? as usize,
                    "config.lambda" => config.lambda = value.parse().map_err(|_| bad(line))?,
                    "config.length_prior" => config.length_prior = flag(value)?,
                    "config.topk" => config.topk = num(value)? as usize,
                    "config.strip_html" => config.strip_html = flag(value)?,
                    "config.seed" => config.seed = num(value)?,
                    "config.run_tag" => config.run_tag = value.to_string(),
                    _ => return Err(Error::Format(format!("unknown metadata key {key:?}"))),
                }
            }
        }
        meta.config = config;
        Ok(meta)
    }
}

pub fn metadata_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn write_run_metadata(meta: &RunMetadata, output: &Path) -> Result<PathBuf> {
    let path = metadata_path(output);
    std::fs::write(&path, meta.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_run_metadata(path: impl AsRef<Path>) -> Result<RunMetadata> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunMetadata::parse(&text)
}

/// Output of a command: data for stdout and diagnostics for stderr.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub notes: Vec<String>,
    pub metadata: Option<RunMetadata>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn finish(meta: RunMetadata, mut outcome: Outcome) -> Result<Outcome> {
    if let Some(out) = &meta.config.output {
        let p = write_run_metadata(&meta, out)?;
        outcome.notes.push(format!("metadata written to {}", p.display()));
    }
    outcome.metadata = Some(meta);
    Ok(outcome)
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.command.as_str() {
        "generate" => run_generate(cfg),
        "stats" => run_stats(cfg),
        "anchors" => run_anchors(cfg),
        "search" => run_search(cfg),
        "index" => run_index(cfg),
        "isearch" => run_isearch(cfg),
        "eval" => run_eval(cfg),
        "bench" => run_bench_command(cfg),
        other => Err(Error::Config(format!("unknown command {other:?}"))),
    }
}

/// Judges as relevant every document containing all terms of the query.
pub fn synthetic_qrels(docs: &[Document], queries: &[crate::corpus::Query]) -> Qrels {
    let tables: Vec<_> = docs.iter().map(|d| term_counts(&d.text).0).collect();
    let mut qrels = Qrels::default();
    for q in queries {
        let terms: HashSet<String> = tokenize(&q.text).into_iter().collect();
        let judged: BTreeMap<String, u32> = docs
            .iter()
            .zip(&tables)
            .filter(|(_, t)| terms.iter().all(|term| t.contains_key(term)))
            .map(|(d, _)| (d.doc_id.clone(), 1))
            .collect();
        qrels.judgments.insert(q.query_id.clone(), judged);
    }
    qrels
}

fn run_generate(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.required_output()?;
    let mut syn = SyntheticConfig::new(cfg.extra_or("doc_count", 1000)?, cfg.extra_or("vocab_size", 5000)?, cfg.seed);
    syn.link_fraction = cfg.extra_or("link_fraction", syn.link_fraction)?;
    let mut meta = RunMetadata::new(cfg);
    let start = Instant::now();
    let docs = generate_with(&syn)?;
    write_corpus(&docs, out)?;
    let mut outcome = Outcome::default();
    outcome.notes.push(format!("wrote {} documents to {}", docs.len(), out.display()));
    if let Some(qpath) = cfg.extra.get("queries_out") {
        let queries = generate_queries(cfg.extra_or("query_count", 50)?, syn.vocab_size, cfg.seed)?;
        write_queries(&queries, qpath)?;
        outcome.notes.push(format!("wrote {} queries to {qpath}", queries.len()));
        if let Some(rpath) = cfg.extra.get("qrels_out") {
            write_text(Path::new(rpath), &synthetic_qrels(&docs, &queries).to_text())?;
            outcome.notes.push(format!("wrote qrels to {rpath}"));
        }
    } else if cfg.extra.contains_key("qrels_out") {
        return Err(Error::Config("--qrels-out requires --queries-out".into()));
    }
    meta.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    finish(meta, outcome)
}

fn run_stats(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.required_output()?;
    let mut meta = RunMetadata::new(cfg);
    let start = Instant::now();
    let shards = read_corpus(cfg.required_input("corpus")?, cfg.shard_count)?;
    let stats = compute_stats(&shards, cfg.text(), &cfg.engine())?;
    save_stats(&stats, out)?;
    meta.results.insert("total_tokens".into(), stats.total_tokens.to_string());
    meta.results.insert("doc_count".into(), stats.doc_count.to_string());
    meta.results.insert("terms".into(), stats.cf.len().to_string());
    meta.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    let outcome = Outcome {
        notes: vec![format!("{} documents, {} tokens, {} terms", stats.doc_count, stats.total_tokens, stats.cf.len())],
        ..Default::default()
    };
    finish(meta, outcome)
}

fn run_anchors(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.required_output()?;
    let mut meta = RunMetadata::new(cfg);
    let start = Instant::now();
    let shards = read_corpus(cfg.required_input("corpus")?, cfg.shard_count)?;
    let max_tokens = cfg.extra_or("max_anchor_tokens", DEFAULT_MAX_ANCHOR_TOKENS)?;
    let corpus = build_anchor_corpus(&shards, max_tokens, &cfg.engine())?;
    let docs: Vec<Document> = corpus.documents.iter().cloned().map(Document::from).collect();
    write_corpus(&docs, out)?;
    meta.results.insert("coverage".into(), format!("{:.6}", corpus.coverage));
    meta.results.insert("anchor_docs".into(), docs.len().to_string());
    meta.results.insert("corpus_docs".into(), corpus.corpus_docs.to_string());
    meta.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    let outcome = Outcome {
        stdout: format!("coverage\t{:.6}\t{}/{}\n", corpus.coverage, docs.len(), corpus.corpus_docs),
        ..Default::default()
    };
    finish(meta, outcome)
}

fn load_or_compute_stats(
    cfg: &RunConfig,
    shards: &[crate::corpus::CorpusShard],
    notes: &mut Vec<String>,
) -> Result<CollectionStats> {
    match cfg.inputs.get("stats") {
        Some(p) => load_stats(p),
        None => {
            notes.push("no --stats given; computing statistics over the searched corpus".into());
            compute_stats(shards, cfg.text(), &cfg.engine())
        }
    }
}

fn emit_run(cfg: &RunConfig, results: &BTreeMap<String, RankedList>, outcome: &mut Outcome) -> Result<()> {
    let text = RunFile::from_results(results, &cfg.run_tag)?.to_text();
    match &cfg.output {
        Some(p) => write_text(p, &text),
        None => {
            outcome.stdout = text;
            Ok(())
        }
    }
}

pub fn run_search(cfg: &RunConfig) -> Result<Outcome> {
    let search = cfg.search_config()?;
    let queries = read_queries(cfg.required_input("queries")?)?;
    let mut meta = RunMetadata::new(cfg);
    let mut outcome = Outcome::default();
    let start = Instant::now();
    let shards = read_corpus(cfg.required_input("corpus")?, cfg.shard_count)?;
    meta.timings.insert("read_seconds".into(), start.elapsed().as_secs_f64());
    let stats = load_or_compute_stats(cfg, &shards, &mut outcome.notes)?;
    let t = Instant::now();
    let result = sequential_search(&shards, &queries, &stats, &search, &cfg.engine())?;
    meta.timings.insert("search_seconds".into(), t.elapsed().as_secs_f64());
    meta.record_shuffle(&result.shuffle);
    emit_run(cfg, &result.results, &mut outcome)?;
    meta.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    outcome.notes.push(format!(
        "{} queries; shuffle {} -> {} records (max {} per query)",
        queries.len(),
        result.shuffle.records_emitted_by_maps,
        result.shuffle.records_after_combine,
        result.shuffle.max_per_key()
    ));
    finish(meta, outcome)
}

fn run_index(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.required_output()?;
    let mut meta = RunMetadata::new(cfg);
    let start = Instant::now();
    let shards = read_corpus(cfg.required_input("corpus")?, 1)?;
    let index = build_index(&shards, cfg.text())?;
    save_index(&index, out)?;
    meta.results.insert("terms".into(), index.term_count().to_string());
    meta.results.insert("docs".into(), index.docs().len().to_string());
    meta.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    finish(meta, Outcome::default())
}

fn run_isearch(cfg: &RunConfig) -> Result<Outcome> {
    let search = cfg.search_config()?;
    let queries = read_queries(cfg.required_input("queries")?)?;
    if queries.is_empty() {
        return Err(Error::Config("query set is empty".into()));
    }
    let mut meta = RunMetadata::new(cfg);
    let start = Instant::now();
    let index = match (cfg.inputs.get("index"), cfg.inputs.get("corpus")) {
        (Some(p), _) => load_index(p)?,
        (None, Some(c)) => build_index(&read_corpus(c, 1)?, cfg.text())?,
        (None, None) => return Err(Error::Config("isearch needs --index or --corpus".into())),
    };
    meta.timings.insert("load_seconds".into(), start.elapsed().as_secs_f64());
    let t = Instant::now();
    let mut searcher = IndexSearcher::new(&index);
    let mut results = BTreeMap::new();
    for q in &queries {
        if results.insert(q.query_id.clone(), searcher.search(q, search.scoring, search.topk)?).is_some() {
            return Err(Error::Integrity(format!("duplicate query_id {}", q.query_id)));
        }
    }
    meta.timings.insert("search_seconds".into(), t.elapsed().as_secs_f64());
    let mut outcome = Outcome::default();
    emit_run(cfg, &results, &mut outcome)?;
    finish(meta, outcome)
}

fn run_eval(cfg: &RunConfig) -> Result<Outcome> {
    let run = RunFile::read(cfg.required_input("run")?)?;
    let qrels = Qrels::read(cfg.required_input("qrels")?)?;
    let report = evaluate(&run, &qrels, cfg.extra_or("cutoff", DEFAULT_TOPK)?)?;
    let meta = RunMetadata::new(cfg);
    let outcome = Outcome {
        stdout: report.to_table(),
        notes: report.warnings().into_iter().map(|w| format!("warning: {w}")).collect(),
        ..Default::default()
    };
    finish(meta, outcome)
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("invalid size {p:?} in --sizes"))))
        .collect()
}

fn run_bench_command(cfg: &RunConfig) -> Result<Outcome> {
    let corpus_path = cfg.required_input("corpus")?;
    let pool = read_queries(cfg.required_input("queries")?)?;
    let mut outcome = Outcome::default();
    let stats = {
        let shards = read_corpus(corpus_path, cfg.shard_count)?;
        load_or_compute_stats(cfg, &shards, &mut outcome.notes)?
    };
    let bench = BenchConfig {
        sizes: parse_sizes(cfg.extra.get("sizes").map_or("10,100,1000", String::as_str))?,
        trials: cfg.extra_or("trials", 3)?,
        seed: cfg.seed,
        nested: cfg.extra_or("nested", false)?,
        search: cfg.search_config()?,
        engine: cfg.engine(),
        shard_count: cfg.shard_count,
    };
    let mut meta = RunMetadata::new(cfg);
    let start = Instant::now();
    let points = run_bench(corpus_path, &pool, &stats, &bench)?;
    meta.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    let csv = emit_csv(&points);
    match &cfg.output {
        Some(p) => write_text(p, &csv)?,
        None => outcome.stdout = csv,
    }
    let means = mean_per_size(&points);
    for &size in &bench.sizes {
        let scan = means[&(System::Scan, size)];
        let base = means[&(System::Baseline, size)];
        outcome.notes.push(format!(
            "{size} queries: scan {:.4}s/query, baseline {:.6}s/query, scan/baseline {:.1}x",
            scan.1,
            base.1,
            scan.0 / base.0
        ));
    }
    finish(meta, outcome)
}
