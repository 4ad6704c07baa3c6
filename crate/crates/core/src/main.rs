use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mirex::pipeline::{execute, RunConfig};
use mirex::Error;

#[derive(Parser, Debug)]
#[command(name = "mirex", version, about = "Sequential-scan retrieval experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct EngineArgs {
    /// Worker threads (default: $MIREX_WORKERS, else available parallelism)
    #[arg(long)]
    workers: Option<usize>,
    /// Corpus shards (default: 4 x workers)
    #[arg(long)]
    shards: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct TextArgs {
    /// Remove HTML markup before tokenizing
    #[arg(long)]
    strip_html: bool,
}

#[derive(Args, Debug, Clone)]
struct ScoringArgs {
    /// Document-model weight of the smoothed language model
    #[arg(long, default_value_t = 0.85)]
    lambda: f64,
    #[arg(long)]
    no_length_prior: bool,
    #[arg(long, default_value_t = 1000)]
    topk: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic corpus (and optionally queries and qrels)
    Generate {
        #[arg(long, default_value_t = 1000)]
        docs: usize,
        #[arg(long, default_value_t = 5000)]
        vocab: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        link_fraction: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        queries_out: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        query_count: usize,
        /// Judge documents containing every query term as relevant
        #[arg(long)]
        qrels_out: Option<PathBuf>,
    },
    /// Compute collection statistics
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        text: TextArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Build the anchor-text corpus
    Anchors {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Words kept per anchor
        #[arg(long, default_value_t = 512)]
        max_anchor_tokens: usize,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Run a query set with one scan over the corpus
    Search {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Precomputed statistics (computed on the fly when absent)
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long, default_value = "mirex")]
        run_tag: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ship raw map output instead of combining per worker
        #[arg(long)]
        no_combiner: bool,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[command(flatten)]
        text: TextArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Build and save an inverted index
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        text: TextArgs,
    },
    /// Run a query set against an inverted index
    Isearch {
        #[arg(long, required_unless_present = "corpus")]
        index: Option<PathBuf>,
        /// Build the index in memory from this corpus instead
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value = "mirex")]
        run_tag: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[command(flatten)]
        text: TextArgs,
    },
    /// Score a run file against qrels
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value_t = 1000)]
        cutoff: usize,
    },
    /// Time scan and index systems over growing query sets
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long, default_value = "10,100,1000")]
        sizes: String,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Smaller query sets are prefixes of larger ones
        #[arg(long)]
        nested: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[command(flatten)]
        text: TextArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

fn default_workers() -> usize {
    std::env::var("MIREX_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

impl EngineArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.worker_count = self.workers.unwrap_or_else(default_workers);
        cfg.shard_count = self.shards.unwrap_or(4 * cfg.worker_count);
    }
}

impl ScoringArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.lambda = self.lambda;
        cfg.length_prior = !self.no_length_prior;
        cfg.topk = self.topk;
    }
}

fn to_config(command: Command) -> RunConfig {
    match command {
        Command::Generate { docs, vocab, seed, link_fraction, out, queries_out, query_count, qrels_out } => {
            let mut cfg = RunConfig::new("generate")
                .with_output(out)
                .set("doc_count", docs)
                .set("vocab_size", vocab)
                .set("link_fraction", link_fraction);
            cfg.seed = seed;
            if let Some(q) = queries_out {
                cfg = cfg.set("queries_out", q.display()).set("query_count", query_count);
            }
            if let Some(r) = qrels_out {
                cfg = cfg.set("qrels_out", r.display());
            }
            cfg
        }
        Command::Stats { corpus, out, text, engine } => {
            let mut cfg = RunConfig::new("stats").input("corpus", corpus).with_output(out);
            cfg.strip_html = text.strip_html;
            engine.apply(&mut cfg);
            cfg
        }
        Command::Anchors { corpus, out, max_anchor_tokens, engine } => {
            let mut cfg = RunConfig::new("anchors")
                .input("corpus", corpus)
                .with_output(out)
                .set("max_anchor_tokens", max_anchor_tokens);
            engine.apply(&mut cfg);
            cfg
        }
        Command::Search { corpus, queries, stats, run_tag, out, no_combiner, scoring, text, engine } => {
            let mut cfg = RunConfig::new("search").input("corpus", corpus).input("queries", queries);
            if let Some(s) = stats {
                cfg = cfg.input("stats", s);
            }
            cfg.output = out;
            cfg.run_tag = run_tag;
            cfg.combiner = !no_combiner;
            cfg.strip_html = text.strip_html;
            scoring.apply(&mut cfg);
            engine.apply(&mut cfg);
            cfg
        }
        Command::Index { corpus, out, text } => {
            let mut cfg = RunConfig::new("index").input("corpus", corpus).with_output(out);
            cfg.strip_html = text.strip_html;
            cfg
        }
        Command::Isearch { index, corpus, queries, run_tag, out, scoring, text } => {
            let mut cfg = RunConfig::new("isearch").input("queries", queries);
            if let Some(i) = index {
                cfg = cfg.input("index", i);
            }
            if let Some(c) = corpus {
                cfg = cfg.input("corpus", c);
            }
            cfg.output = out;
            cfg.run_tag = run_tag;
            cfg.strip_html = text.strip_html;
            scoring.apply(&mut cfg);
            cfg
        }
        Command::Eval { run, qrels, cutoff } => {
            RunConfig::new("eval").input("run", run).input("qrels", qrels).set("cutoff", cutoff)
        }
        Command::Bench { corpus, queries, stats, sizes, trials, seed, nested, out, scoring, text, engine } => {
            let mut cfg = RunConfig::new("bench")
                .input("corpus", corpus)
                .input("queries", queries)
                .set("sizes", sizes)
                .set("trials", trials)
                .set("nested", nested);
            if let Some(s) = stats {
                cfg = cfg.input("stats", s);
            }
            cfg.output = out;
            cfg.seed = seed;
            cfg.strip_html = text.strip_html;
            scoring.apply(&mut cfg);
            engine.apply(&mut cfg);
            cfg
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = to_config(cli.command);
    match execute(&cfg) {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("{note}");
            }
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(outcome.stdout.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mirex {}: {e}", cfg.command);
            match e {
                Error::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
