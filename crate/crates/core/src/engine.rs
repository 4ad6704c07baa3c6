//! In-process map–combine–reduce executor over corpus shards.
//!
//! Workers claim whole shards and map their documents in shard order. Each
//! worker buffers intermediate values per key and, when the job has a
//! combiner, combines a key's buffer whenever it grows past a threshold and
//! once more when the worker finishes. The shuffle is an in-memory group-by;
//! [`ShuffleStats`] records how many values would have crossed the network.
//! Values for a key are sorted by the job's total order before reduce and
//! keys are reduced in ascending order, so output does not depend on the
//! worker count or on which worker processed which shard.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hash;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering as AtomicOrdering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusShard, Document};
use crate::error::{Error, Result};

/// Failure reported by a job function; the engine attaches the location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobFailure(pub String);

impl fmt::Display for JobFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<String> for JobFailure {
    fn from(s: String) -> Self {
        JobFailure(s)
    }
}

impl From<&str> for JobFailure {
    fn from(s: &str) -> Self {
        JobFailure(s.to_string())
    }
}

/// A batch job: mapper, optional combiner and reducer.
///
/// Job functions are called concurrently from several workers and must not
/// depend on call order. `value_order` must be a total order; values that
/// compare equal are treated as interchangeable.
pub trait Job: Sync {
    type Key: Ord + Hash + Clone + fmt::Debug + Send + Sync;
    type Value: Send;
    type Output: Send;

    fn map(&self, doc: &Document, out: &mut Emitter<'_, Self>) -> Result<(), JobFailure>
    where
        Self: Sized;

    fn has_combiner(&self) -> bool {
        false
    }

    /// Must satisfy `reduce(k, combine(k, vs)) == reduce(k, vs)`.
    fn combine(&self, _key: &Self::Key, values: Vec<Self::Value>) -> Vec<Self::Value> {
        values
    }

    fn value_order(&self, a: &Self::Value, b: &Self::Value) -> Ordering;

    fn reduce(&self, key: &Self::Key, values: Vec<Self::Value>, out: &mut Vec<Self::Output>) -> Result<(), JobFailure>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineOptions {
    pub worker_count: usize,
    /// Run the job's combiner (if it has one). Disabling it is only useful
    /// for checking combiner soundness.
    pub combine: bool,
    /// Buffered values per key that trigger an intermediate combine.
    pub combine_threshold: usize,
    /// Shuffles the order in which shards are claimed by workers.
    pub claim_order_seed: Option<u64>,
}

impl EngineOptions {
    pub fn new(worker_count: usize) -> Self {
        EngineOptions { worker_count, combine: true, combine_threshold: 4096, claim_order_seed: None }
    }
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions::new(1)
    }
}

/// Counters for the values that cross from map workers to reducers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleStats<K: Ord> {
    pub records_emitted_by_maps: u64,
    pub records_after_combine: u64,
    pub per_key_after_combine: BTreeMap<K, u64>,
}

impl<K: Ord> Default for ShuffleStats<K> {
    fn default() -> Self {
        ShuffleStats { records_emitted_by_maps: 0, records_after_combine: 0, per_key_after_combine: BTreeMap::new() }
    }
}

impl<K: Ord> ShuffleStats<K> {
    pub fn max_per_key(&self) -> u64 {
        self.per_key_after_combine.values().copied().max().unwrap_or(0)
    }
}

pub struct JobOutput<J: Job> {
    pub records: Vec<J::Output>,
    pub shuffle: ShuffleStats<J::Key>,
}

impl<J: Job> std::fmt::Debug for JobOutput<J>
where
    J::Output: std::fmt::Debug,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JobOutput").field("records", &self.records).field("shuffle", &self.shuffle).finish()
    }
}

struct Slot<V> {
    values: Vec<V>,
    flush_at: usize,
}

/// Per-worker sink handed to [`Job::map`].
pub struct Emitter<'a, J: Job> {
    job: &'a J,
    combine: bool,
    threshold: usize,
    buffer: HashMap<J::Key, Slot<J::Value>>,
    emitted: u64,
}

impl<'a, J: Job> Emitter<'a, J> {
    fn new(job: &'a J, opts: &EngineOptions) -> Self {
        Emitter {
            job,
            combine: opts.combine && job.has_combiner(),
            threshold: opts.combine_threshold.max(1),
            buffer: HashMap::new(),
            emitted: 0,
        }
    }

    pub fn emit(&mut self, key: J::Key, value: J::Value) {
        self.emitted += 1;
        let (job, threshold) = (self.job, self.threshold);
        match self.buffer.get_mut(&key) {
            Some(slot) => {
                slot.values.push(value);
                if self.combine && slot.values.len() >= slot.flush_at {
                    // combined output stays buffered and is combined again later
                    let values = std::mem::take(&mut slot.values);
                    slot.values = job.combine(&key, values);
                    slot.flush_at = threshold.max(2 * slot.values.len());
                }
            }
            None => {
                self.buffer.insert(key, Slot { values: vec![value], flush_at: threshold });
            }
        }
    }

    /// Final combine at worker completion.
    fn finish(self) -> (u64, HashMap<J::Key, Vec<J::Value>>) {
        let job = self.job;
        let combine = self.combine;
        let buffer = self
            .buffer
            .into_iter()
            .map(|(k, slot)| {
                let values = if combine { job.combine(&k, slot.values) } else { slot.values };
                (k, values)
            })
            .collect();
        (self.emitted, buffer)
    }
}

struct MapFailure {
    shard: usize,
    position: usize,
    doc_id: String,
    message: String,
}

type WorkerResult<J> = std::result::Result<(u64, HashMap<<J as Job>::Key, Vec<<J as Job>::Value>>), MapFailure>;

fn run_worker<J: Job>(
    job: &J,
    shards: &[CorpusShard],
    order: &[usize],
    next: &AtomicUsize,
    abort: &AtomicBool,
    opts: &EngineOptions,
) -> WorkerResult<J> {
    let mut emitter = Emitter::new(job, opts);
    loop {
        if abort.load(AtomicOrdering::Relaxed) {
            break;
        }
        let claim = next.fetch_add(1, AtomicOrdering::Relaxed);
        let Some(&shard_pos) = order.get(claim) else {
            break;
        };
        let shard = &shards[shard_pos];
        for (position, doc) in shard.records.iter().enumerate() {
            if let Err(failure) = job.map(doc, &mut emitter) {
                abort.store(true, AtomicOrdering::Relaxed);
                return Err(MapFailure {
                    shard: shard.shard_index,
                    position,
                    doc_id: doc.doc_id.clone(),
                    message: failure.0,
                });
            }
        }
    }
    Ok(emitter.finish())
}

pub fn run_job<J: Job>(job: &J, shards: &[CorpusShard], opts: &EngineOptions) -> Result<JobOutput<J>> {
    if opts.worker_count == 0 {
        return Err(Error::Config("worker_count must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..shards.len()).collect();
    if let Some(seed) = opts.claim_order_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = opts.worker_count.min(shards.len().max(1));

    let results: Vec<WorkerResult<J>> = if workers == 1 {
        vec![run_worker(job, shards, &order, &next, &abort, opts)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> =
                (0..workers).map(|_| scope.spawn(|| run_worker(job, shards, &order, &next, &abort, opts))).collect();
            handles.into_iter().map(|h| h.join().expect("map worker panicked")).collect()
        })
    };

    let mut shuffle = ShuffleStats::default();
    let mut grouped: BTreeMap<J::Key, Vec<J::Value>> = BTreeMap::new();
    let mut failure: Option<MapFailure> = None;
    for result in results {
        match result {
            Ok((emitted, buffer)) => {
                shuffle.records_emitted_by_maps += emitted;
                for (key, values) in buffer {
                    let n = values.len() as u64;
                    shuffle.records_after_combine += n;
                    *shuffle.per_key_after_combine.entry(key.clone()).or_insert(0) += n;
                    grouped.entry(key).or_default().extend(values);
                }
            }
            Err(f) => {
                if failure.as_ref().is_none_or(|g| (f.shard, f.position) < (g.shard, g.position)) {
                    failure = Some(f);
                }
            }
        }
    }
    if let Some(f) = failure {
        return Err(Error::MapFailed { doc_id: f.doc_id, shard: f.shard, message: f.message });
    }

    let groups: Vec<(J::Key, Vec<J::Value>)> = grouped.into_iter().collect();
    let records = reduce_groups(job, groups, workers)?;
    Ok(JobOutput { records, shuffle })
}

fn reduce_chunk<J: Job>(job: &J, chunk: Vec<(J::Key, Vec<J::Value>)>) -> Result<Vec<J::Output>> {
    let mut out = Vec::new();
    for (key, mut values) in chunk {
        values.sort_by(|a, b| job.value_order(a, b));
        job.reduce(&key, values, &mut out)
            .map_err(|f| Error::ReduceFailed { key: format!("{key:?}"), message: f.0 })?;
    }
    Ok(out)
}

fn reduce_groups<J: Job>(job: &J, groups: Vec<(J::Key, Vec<J::Value>)>, workers: usize) -> Result<Vec<J::Output>> {
    if workers == 1 || groups.len() < 2 {
        return reduce_chunk(job, groups);
    }
    // contiguous key ranges keep the concatenated output in key order
    let chunk_len = groups.len().div_ceil(workers);
    let mut chunks = Vec::with_capacity(workers);
    let mut rest = groups;
    while !rest.is_empty() {
        let tail = rest.split_off(chunk_len.min(rest.len()));
        chunks.push(std::mem::replace(&mut rest, tail));
    }
    let parts: Vec<Result<Vec<J::Output>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = chunks.into_iter().map(|chunk| scope.spawn(move || reduce_chunk(job, chunk))).collect();
        handles.into_iter().map(|h| h.join().expect("reduce worker panicked")).collect()
    });
    let mut out = Vec::new();
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Runs the job with its combiner enabled and disabled and reports whether
/// the final outputs agree.
pub fn verify_combiner<J>(job: &J, shards: &[CorpusShard], opts: &EngineOptions) -> Result<bool>
where
    J: Job,
    J::Output: PartialEq,
{
    if !job.has_combiner() {
        return Err(Error::Config("job has no combiner to verify".into()));
    }
    let on = run_job(job, shards, &EngineOptions { combine: true, ..opts.clone() })?;
    let off = run_job(job, shards, &EngineOptions { combine: false, ..opts.clone() })?;
    Ok(on.records == off.records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::shard_documents;

    struct WordCount {
        broken_combiner: bool,
    }

    impl Job for WordCount {
        type Key = String;
        type Value = u64;
        type Output = (String, u64);

        fn map(&self, doc: &Document, out: &mut Emitter<'_, Self>) -> Result<(), JobFailure> {
            if doc.text.contains("FAIL") {
                return Err("poisoned record".into());
            }
            for w in doc.text.split_whitespace() {
                out.emit(w.to_string(), 1);
            }
            Ok(())
        }

        fn has_combiner(&self) -> bool {
            true
        }

        fn combine(&self, _key: &String, mut values: Vec<u64>) -> Vec<u64> {
            if self.broken_combiner && values.len() > 1 {
                values.pop();
            }
            vec![values.iter().sum()]
        }

        fn value_order(&self, a: &u64, b: &u64) -> Ordering {
            a.cmp(b)
        }

        fn reduce(&self, key: &String, values: Vec<u64>, out: &mut Vec<(String, u64)>) -> Result<(), JobFailure> {
            out.push((key.clone(), values.iter().sum()));
            Ok(())
        }
    }

    fn docs(texts: &[&str]) -> Vec<Document> {
        texts.iter().enumerate().map(|(i, t)| Document::new(format!("d{i}"), "", *t)).collect()
    }

    #[test]
    fn word_count() {
        let shards = shard_documents(docs(&["a b", "b"]), 2).unwrap();
        let job = WordCount { broken_combiner: false };
        let out = run_job(&job, &shards, &EngineOptions::new(1)).unwrap();
        assert_eq!(out.records, [("a".to_string(), 1), ("b".to_string(), 2)]);
        assert_eq!(out.shuffle.records_emitted_by_maps, 3);
        assert_eq!(out.shuffle.records_after_combine, 2);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let texts: Vec<String> = (0..200).map(|i| format!("w{} w{} w{}", i % 7, i % 13, i % 3)).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let shards = shard_documents(docs(&refs), 16).unwrap();
        let job = WordCount { broken_combiner: false };
        let base = run_job(&job, &shards, &EngineOptions::new(1)).unwrap().records;
        for workers in [2, 4, 8] {
            for seed in [None, Some(1), Some(2)] {
                let opts =
                    EngineOptions { claim_order_seed: seed, combine_threshold: 3, ..EngineOptions::new(workers) };
                assert_eq!(run_job(&job, &shards, &opts).unwrap().records, base);
            }
        }
    }

    #[test]
    fn combine_off_ships_every_record() {
        let shards = shard_documents(docs(&["a a a", "a"]), 2).unwrap();
        let job = WordCount { broken_combiner: false };
        let opts = EngineOptions { combine: false, ..EngineOptions::new(2) };
        let out = run_job(&job, &shards, &opts).unwrap();
        assert_eq!(out.shuffle.records_after_combine, 4);
        assert_eq!(out.records, [("a".to_string(), 4)]);
    }

    #[test]
    fn verify_combiner_detects_dropping_combiner() {
        let shards = shard_documents(docs(&["a a b", "b a", "c"]), 2).unwrap();
        let opts = EngineOptions::new(2);
        assert!(verify_combiner(&WordCount { broken_combiner: false }, &shards, &opts).unwrap());
        assert!(!verify_combiner(&WordCount { broken_combiner: true }, &shards, &opts).unwrap());
    }

    #[test]
    fn map_failure_names_document_and_shard() {
        let shards = shard_documents(docs(&["a", "b", "c FAIL", "d"]), 2).unwrap();
        let err = run_job(&WordCount { broken_combiner: false }, &shards, &EngineOptions::new(2)).unwrap_err();
        match err {
            Error::MapFailed { doc_id, shard, .. } => {
                assert_eq!(doc_id, "d2");
                assert_eq!(shard, 0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_workers_rejected() {
        let shards = shard_documents(docs(&["a"]), 1).unwrap();
        assert!(matches!(
            run_job(&WordCount { broken_combiner: false }, &shards, &EngineOptions::new(0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let out = run_job(&WordCount { broken_combiner: false }, &[], &EngineOptions::new(4)).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.shuffle, ShuffleStats::default());
    }
}
