//! Sequential search: a single scan over the corpus scores every query,
//! and the same bounded ranked-list logic serves as combiner and reducer.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Arc;

use crate::corpus::{CorpusShard, Document, Query};
use crate::engine::{run_job, Emitter, EngineOptions, Job, JobFailure, ShuffleStats};
use crate::error::{Error, Result};
use crate::scoring::{rank_cmp, PreparedQuery, ScoringParams};
use crate::stats::{for_each_token, term_counts, CollectionStats, TextOptions};

pub const DEFAULT_TOPK: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: Arc<str>,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<Arc<str>>, score: f64) -> Self {
        ScoredDoc { doc_id: doc_id.into(), score }
    }

    pub fn rank_cmp(&self, other: &ScoredDoc) -> Ordering {
        rank_cmp(self.score, &self.doc_id, other.score, &other.doc_id)
    }
}

/// Capacity-bounded list kept in ranking order (score descending, doc_id
/// ascending).
#[derive(Debug, Clone)]
pub struct RankedList {
    capacity: usize,
    entries: Vec<ScoredDoc>,
    ids: HashSet<Arc<str>>,
}

impl PartialEq for RankedList {
    fn eq(&self, other: &Self) -> bool {
        self.capacity == other.capacity && self.entries == other.entries
    }
}

impl RankedList {
    pub fn new(capacity: usize) -> Self {
        RankedList { capacity, entries: Vec::new(), ids: HashSet::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[ScoredDoc] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<ScoredDoc> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    /// Inserts `candidate` if the list has room or it outranks the current
    /// minimum, evicting the minimum in the latter case. Returns whether the
    /// list changed.
    pub fn ranked_insert(&mut self, candidate: ScoredDoc) -> Result<bool> {
        if candidate.score.is_nan() || candidate.score <= 0.0 {
            return Err(Error::Integrity(format!(
                "score for {} must be positive, got {}",
                candidate.doc_id, candidate.score
            )));
        }
        if self.ids.contains(&candidate.doc_id) {
            return Err(Error::Integrity(format!("doc_id {} inserted twice", candidate.doc_id)));
        }
        if self.capacity == 0 {
            return Ok(false);
        }
        if self.is_full() {
            let last = self.entries.last().expect("full list is non-empty");
            if candidate.rank_cmp(last) != Ordering::Less {
                return Ok(false);
            }
            let evicted = self.entries.pop().expect("full list is non-empty");
            self.ids.remove(&evicted.doc_id);
        }
        let at = self.entries.partition_point(|e| e.rank_cmp(&candidate) == Ordering::Less);
        self.ids.insert(candidate.doc_id.clone());
        self.entries.insert(at, candidate);
        Ok(true)
    }
}

/// Query set, ranked-list size and text handling for one search run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub scoring: ScoringParams,
    pub topk: usize,
    pub text: TextOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { scoring: ScoringParams::default(), topk: DEFAULT_TOPK, text: TextOptions::default() }
    }
}

pub(crate) fn prepare_queries(
    queries: &[Query],
    stats: &CollectionStats,
    params: ScoringParams,
) -> Result<Vec<PreparedQuery>> {
    let mut seen = HashSet::new();
    queries
        .iter()
        .map(|q| {
            if !seen.insert(q.query_id.as_str()) {
                return Err(Error::Integrity(format!("duplicate query_id {}", q.query_id)));
            }
            PreparedQuery::new(q, stats, params)
        })
        .collect()
}

/// Every distinct term of the query set, numbered, with the queries that
/// use it.
#[derive(Debug, Default)]
struct TermTable {
    ids: HashMap<Box<str>, u32>,
    queries_of: Vec<Vec<u32>>,
    /// Per query, the id of each of its terms in the query's own order.
    term_ids: Vec<Vec<u32>>,
}

impl TermTable {
    fn new(queries: &[PreparedQuery]) -> Self {
        let mut table = TermTable::default();
        for (qi, q) in queries.iter().enumerate() {
            let ids = q
                .terms()
                .map(|t| {
                    let next = table.ids.len() as u32;
                    let id = *table.ids.entry(t.into()).or_insert(next);
                    if id == next {
                        table.queries_of.push(Vec::new());
                    }
                    table.queries_of[id as usize].push(qi as u32);
                    id
                })
                .collect();
            table.term_ids.push(ids);
        }
        table
    }
}

/// Per-thread buffers reused across documents; left zeroed after each use.
#[derive(Default)]
struct Scratch {
    tf: Vec<u32>,
    touched: Vec<u32>,
    is_candidate: Vec<bool>,
    candidates: Vec<u32>,
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

pub struct SearchJob {
    queries: Vec<PreparedQuery>,
    table: TermTable,
    topk: usize,
    text: TextOptions,
    tokenize_calls: AtomicUsize,
}

impl SearchJob {
    pub fn new(queries: &[Query], stats: &CollectionStats, config: &SearchConfig) -> Result<Self> {
        if queries.is_empty() {
            return Err(Error::Config("query set is empty".into()));
        }
        if config.topk == 0 {
            return Err(Error::Config("topk must be at least 1".into()));
        }
        let queries = prepare_queries(queries, stats, config.scoring)?;
        Ok(SearchJob {
            table: TermTable::new(&queries),
            queries,
            topk: config.topk,
            text: config.text,
            tokenize_calls: AtomicUsize::new(0),
        })
    }

    /// Number of documents tokenized so far.
    pub fn tokenize_calls(&self) -> usize {
        self.tokenize_calls.load(AtomicOrdering::Relaxed)
    }

    fn top_k(&self, values: Vec<ScoredDoc>) -> std::result::Result<RankedList, JobFailure> {
        let mut list = RankedList::new(self.topk);
        for v in values {
            list.ranked_insert(v).map_err(|e| JobFailure(e.to_string()))?;
        }
        Ok(list)
    }
}

impl Job for SearchJob {
    type Key = Arc<str>;
    type Value = ScoredDoc;
    type Output = (Arc<str>, RankedList);

    fn map(&self, doc: &Document, out: &mut Emitter<'_, Self>) -> Result<(), JobFailure> {
        let text = self.text.prepare(&doc.text);
        self.tokenize_calls.fetch_add(1, AtomicOrdering::Relaxed);
        SCRATCH.with_borrow_mut(|s| {
            let table = &self.table;
            if s.tf.len() < table.queries_of.len() {
                s.tf.resize(table.queries_of.len(), 0);
            }
            if s.is_candidate.len() < self.queries.len() {
                s.is_candidate.resize(self.queries.len(), false);
            }
            // the document's term counts, restricted to query-set terms
            let mut len = 0u64;
            for_each_token(&text, |t| {
                len += 1;
                if let Some(&id) = table.ids.get(t) {
                    if s.tf[id as usize] == 0 {
                        s.touched.push(id);
                    }
                    s.tf[id as usize] += 1;
                }
            });
            // queries sharing no term with the document cannot score
            for &id in &s.touched {
                for &q in &table.queries_of[id as usize] {
                    if !s.is_candidate[q as usize] {
                        s.is_candidate[q as usize] = true;
                        s.candidates.push(q);
                    }
                }
            }
            s.candidates.sort_unstable();
            let doc_id: Arc<str> = doc.doc_id.as_str().into();
            for &q in &s.candidates {
                let query = &self.queries[q as usize];
                let ids = &table.term_ids[q as usize];
                if let Some(score) = query.score_indexed(len, |i| s.tf[ids[i] as usize]) {
                    out.emit(query.query_id.clone(), ScoredDoc { doc_id: doc_id.clone(), score });
                }
            }
            for &id in &s.touched {
                s.tf[id as usize] = 0;
            }
            for &q in &s.candidates {
                s.is_candidate[q as usize] = false;
            }
            s.touched.clear();
            s.candidates.clear();
        });
        Ok(())
    }

    fn has_combiner(&self) -> bool {
        true
    }

    fn combine(&self, _key: &Arc<str>, values: Vec<ScoredDoc>) -> Vec<ScoredDoc> {
        let mut list = RankedList::new(self.topk);
        let mut rejected = Vec::new();
        for v in values {
            if list.ids.contains(&v.doc_id) {
                // left for the reducer to report
                rejected.push(v);
            } else {
                let _ = list.ranked_insert(v);
            }
        }
        let mut kept = list.into_entries();
        kept.extend(rejected);
        kept
    }

    fn value_order(&self, a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
        a.rank_cmp(b)
    }

    fn reduce(&self, key: &Arc<str>, values: Vec<ScoredDoc>, out: &mut Vec<Self::Output>) -> Result<(), JobFailure> {
        out.push((key.clone(), self.top_k(values)?));
        Ok(())
    }
}

#[derive(Debug)]
pub struct SearchOutput {
    /// Every query of the run, including those without results.
    pub results: BTreeMap<String, RankedList>,
    pub shuffle: ShuffleStats<Arc<str>>,
    pub tokenize_calls: usize,
}

pub fn sequential_search(
    shards: &[CorpusShard],
    queries: &[Query],
    stats: &CollectionStats,
    config: &SearchConfig,
    opts: &EngineOptions,
) -> Result<SearchOutput> {
    let job = SearchJob::new(queries, stats, config)?;
    let output = run_job(&job, shards, opts).map_err(|e| match e {
        Error::ReduceFailed { key, message } => Error::Integrity(format!("query {key}: {message}")),
        other => other,
    })?;
    let mut results: BTreeMap<String, RankedList> =
        queries.iter().map(|q| (q.query_id.clone(), RankedList::new(config.topk))).collect();
    for (qid, list) in output.records {
        results.insert(qid.to_string(), list);
    }
    Ok(SearchOutput { results, shuffle: output.shuffle, tokenize_calls: job.tokenize_calls() })
}

/// All-pairs scoring followed by a full sort; the reference the scan and
/// index paths are checked against.
pub fn brute_force_search(
    docs: &[Document],
    queries: &[Query],
    stats: &CollectionStats,
    config: &SearchConfig,
) -> Result<BTreeMap<String, Vec<ScoredDoc>>> {
    let prepared = prepare_queries(queries, stats, config.scoring)?;
    let tables: Vec<(HashMap<String, u32>, u64)> =
        docs.iter().map(|d| term_counts(&config.text.prepare(&d.text))).collect();
    let mut out = BTreeMap::new();
    for q in &prepared {
        let mut all: Vec<ScoredDoc> = docs
            .iter()
            .zip(&tables)
            .filter_map(|(d, (counts, len))| {
                q.score(*len, |t| counts.get(t).copied().unwrap_or(0)).map(|s| ScoredDoc::new(d.doc_id.as_str(), s))
            })
            .collect();
        all.sort_by(ScoredDoc::rank_cmp);
        all.truncate(config.topk);
        out.insert(q.query_id.to_string(), all);
    }
    Ok(out)
}
