//! Batch retrieval experiments by sequential scanning.
//!
//! A whole benchmark query set is evaluated in one pass over a sharded
//! corpus. Each document is tokenized once and scored against every query
//! by a query-likelihood language model; a bounded ranked list per query
//! acts as both combiner and reducer. Around that core sit the corpus
//! statistics and anchor-text jobs, an inverted-index baseline with the same
//! scoring, TREC-style evaluation and a query-set-size benchmark.

pub mod anchors;
pub mod baseline;
pub mod bench;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod scoring;
pub mod search;
pub mod stats;

pub use anchors::{build_anchor_corpus, extract_anchors, normalize_url, AnchorCorpus, AnchorDocument, AnchorPair};
pub use baseline::{build_index, index_search, InvertedIndex};
pub use bench::{emit_csv, run_bench, BenchConfig, BenchPoint, System};
pub use corpus::{generate_synthetic, read_corpus, read_queries, write_corpus, CorpusShard, Document, Query};
pub use engine::{run_job, verify_combiner, EngineOptions, Job, ShuffleStats};
pub use error::{Error, Result};
pub use eval::{mean_average_precision, precision_at_k, write_run, Qrels, RunFile};
pub use pipeline::{execute, RunConfig, RunMetadata};
pub use scoring::{score_document, PreparedQuery, ScoringParams};
pub use search::{sequential_search, RankedList, ScoredDoc, SearchConfig, SearchOutput};
pub use stats::{compute_stats, tokenize, CollectionStats, TextOptions};
