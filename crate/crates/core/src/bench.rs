//! Query-set-size scaling benchmark for the scan and the inverted index.
//!
//! For every size and trial a seeded query subset is drawn from the pool.
//! The scan cell times reading the corpus file plus a full sequential
//! search, since re-reading the corpus is the per-run cost being amortized.
//! The baseline cell times only the query loop over a prebuilt index.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baseline::{build_index, IndexSearcher};
use crate::corpus::{read_corpus, read_documents, shard_documents, Query};
use crate::engine::EngineOptions;
use crate::error::{Error, Result};
use crate::search::{sequential_search, SearchConfig};
use crate::stats::CollectionStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum System {
    Scan,
    Baseline,
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            System::Scan => "scan",
            System::Baseline => "baseline",
        })
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scan" => Ok(System::Scan),
            "baseline" => Ok(System::Baseline),
            other => Err(Error::Format(format!("unknown system {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPoint {
    pub system: System,
    pub query_count: usize,
    pub trial: usize,
    pub wall_seconds: f64,
    pub per_query_seconds: f64,
}

impl BenchPoint {
    pub fn new(system: System, query_count: usize, trial: usize, wall_seconds: f64) -> Self {
        // timer resolution can report zero for trivial cells
        let wall_seconds = wall_seconds.max(1e-9);
        BenchPoint { system, query_count, trial, wall_seconds, per_query_seconds: wall_seconds / query_count as f64 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Ascending query-set sizes.
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Smaller subsets are prefixes of larger ones within a trial.
    pub nested: bool,
    pub search: SearchConfig,
    pub engine: EngineOptions,
    pub shard_count: usize,
}

impl BenchConfig {
    pub fn new(sizes: Vec<usize>) -> Self {
        BenchConfig {
            sizes,
            trials: 3,
            seed: 0,
            nested: false,
            search: SearchConfig::default(),
            engine: EngineOptions::new(1),
            shard_count: 4,
        }
    }

    fn validate(&self, pool: usize) -> Result<()> {
        if self.sizes.is_empty() || self.trials == 0 {
            return Err(Error::Config("benchmark needs at least one size and one trial".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("benchmark sizes must be strictly ascending".into()));
        }
        if let Some(&bad) = self.sizes.iter().find(|&&s| s == 0 || s > pool) {
            return Err(Error::Config(format!("size {bad} outside 1..={pool} (query pool size)")));
        }
        Ok(())
    }
}

fn trial_rng(seed: u64, size: usize, trial: usize) -> ChaCha8Rng {
    let mut state = seed ^ 0x5851_f42d_4c95_7f2d;
    for v in [size as u64, trial as u64] {
        state = state.rotate_left(29).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ v;
    }
    ChaCha8Rng::seed_from_u64(state)
}

/// The query subset used for one (size, trial) cell; a pure function of its
/// arguments.
pub fn select_queries(pool: &[Query], size: usize, trial: usize, seed: u64, nested: bool) -> Vec<Query> {
    let size = size.min(pool.len());
    if nested {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut trial_rng(seed, 0, trial));
        order[..size].iter().map(|&i| pool[i].clone()).collect()
    } else {
        index::sample(&mut trial_rng(seed, size, trial), pool.len(), size)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect()
    }
}

pub fn run_bench(
    corpus_path: &Path,
    pool: &[Query],
    stats: &CollectionStats,
    cfg: &BenchConfig,
) -> Result<Vec<BenchPoint>> {
    cfg.validate(pool.len())?;
    let index_shards = shard_documents(read_documents(corpus_path)?, 1)?;
    let index = build_index(&index_shards, cfg.search.text)?;
    drop(index_shards);
    let mut searcher = IndexSearcher::new(&index);

    let mut points = Vec::new();
    for trial in 0..cfg.trials {
        for &size in &cfg.sizes {
            let queries = select_queries(pool, size, trial, cfg.seed, cfg.nested);

            let start = Instant::now();
            let shards = read_corpus(corpus_path, cfg.shard_count)?;
            let out = sequential_search(&shards, &queries, stats, &cfg.search, &cfg.engine)?;
            let scan_seconds = start.elapsed().as_secs_f64();
            drop((out, shards));
            points.push(BenchPoint::new(System::Scan, size, trial, scan_seconds));

            let start = Instant::now();
            for q in &queries {
                std::hint::black_box(searcher.search(q, cfg.search.scoring, cfg.search.topk)?);
            }
            points.push(BenchPoint::new(System::Baseline, size, trial, start.elapsed().as_secs_f64()));
        }
    }
    points.sort_by_key(|p| (p.system, p.query_count, p.trial));
    Ok(points)
}

/// Mean wall and per-query seconds per (system, query_count).
pub fn mean_per_size(points: &[BenchPoint]) -> BTreeMap<(System, usize), (f64, f64)> {
    let mut acc: BTreeMap<(System, usize), (f64, f64, usize)> = BTreeMap::new();
    for p in points {
        let e = acc.entry((p.system, p.query_count)).or_insert((0.0, 0.0, 0));
        e.0 += p.wall_seconds;
        e.1 += p.per_query_seconds;
        e.2 += 1;
    }
    acc.into_iter().map(|(k, (w, q, n))| (k, (w / n as f64, q / n as f64))).collect()
}

pub const CSV_HEADER: &str = "system,query_count,trial,wall_seconds,per_query_seconds";

pub fn emit_csv(points: &[BenchPoint]) -> String {
    let mut sorted: Vec<&BenchPoint> = points.iter().collect();
    sorted.sort_by_key(|p| (p.system, p.query_count, p.trial));
    let mut out = format!("{CSV_HEADER}\n");
    for p in sorted {
        out +=
            &format!("{},{},{},{:.6},{:.6}\n", p.system, p.query_count, p.trial, p.wall_seconds, p.per_query_seconds);
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchPoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Format(format!("benchmark CSV must start with {CSV_HEADER:?}")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || Error::parse("bench csv", i + 2, format!("malformed row {line:?}"));
            if cols.len() != 5 {
                return Err(bad());
            }
            Ok(BenchPoint {
                system: cols[0].parse()?,
                query_count: cols[1].parse().map_err(|_| bad())?,
                trial: cols[2].parse().map_err(|_| bad())?,
                wall_seconds: cols[3].parse().map_err(|_| bad())?,
                per_query_seconds: cols[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
