//! Python bindings for the sequential-scan engine.
//!
//! Documents cross the boundary as `(doc_id, url, text)` tuples, queries as
//! `(query_id, text)` tuples and ranked lists as lists of `(doc_id, score)`.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;

use mirex::anchors;
use mirex::baseline::{self, IndexSearcher};
use mirex::corpus::{self, shard_documents};
use mirex::eval::{self, Qrels, RunFile};
use mirex::{Document, EngineOptions, Query, RankedList, ScoringParams, SearchConfig, TextOptions};

create_exception!(mirex, MirexError, PyException);

fn to_py(e: mirex::Error) -> PyErr {
    match e {
        mirex::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        mirex::Error::Config(_) => PyValueError::new_err(e.to_string()),
        other => MirexError::new_err(other.to_string()),
    }
}

type DocTuple = (String, String, String);
type Ranked = Vec<(String, f64)>;

fn docs_from(tuples: Vec<DocTuple>) -> Vec<Document> {
    tuples.into_iter().map(|(id, url, text)| Document::new(id, url, text)).collect()
}

fn queries_from(tuples: Vec<(String, String)>) -> Vec<Query> {
    tuples.into_iter().map(|(id, text)| Query::new(id, text)).collect()
}

fn ranked(list: &RankedList) -> Ranked {
    list.entries().iter().map(|e| (e.doc_id.to_string(), e.score)).collect()
}

fn engine(workers: usize) -> EngineOptions {
    EngineOptions::new(workers)
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    mirex::tokenize(text)
}

#[pyfunction]
fn generate_synthetic(doc_count: usize, vocab_size: usize, seed: u64) -> PyResult<Vec<DocTuple>> {
    let docs = corpus::generate_synthetic(doc_count, vocab_size, seed).map_err(to_py)?;
    Ok(docs.into_iter().map(|d| (d.doc_id, d.url, d.text)).collect())
}

#[pyfunction]
fn generate_queries(count: usize, vocab_size: usize, seed: u64) -> PyResult<Vec<(String, String)>> {
    let queries = corpus::generate_queries(count, vocab_size, seed).map_err(to_py)?;
    Ok(queries.into_iter().map(|q| (q.query_id, q.text)).collect())
}

#[pyfunction]
fn read_corpus(path: &str) -> PyResult<Vec<DocTuple>> {
    let docs = corpus::read_documents(path).map_err(to_py)?;
    Ok(docs.into_iter().map(|d| (d.doc_id, d.url, d.text)).collect())
}

#[pyfunction]
fn write_corpus(docs: Vec<DocTuple>, path: &str) -> PyResult<()> {
    corpus::write_corpus(&docs_from(docs), path).map_err(to_py)
}

/// Corpus-wide term and length counts.
#[pyclass(name = "CollectionStats", frozen)]
struct PyCollectionStats {
    inner: mirex::CollectionStats,
}

#[pymethods]
impl PyCollectionStats {
    #[staticmethod]
    #[pyo3(signature = (docs, workers = 1, shards = 4, strip_html = false))]
    fn compute(docs: Vec<DocTuple>, workers: usize, shards: usize, strip_html: bool) -> PyResult<Self> {
        let shards = shard_documents(docs_from(docs), shards).map_err(to_py)?;
        let inner = mirex::compute_stats(&shards, TextOptions { strip_html }, &engine(workers)).map_err(to_py)?;
        Ok(PyCollectionStats { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyCollectionStats { inner: mirex::stats::load_stats(path).map_err(to_py)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        mirex::stats::save_stats(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn total_tokens(&self) -> u64 {
        self.inner.total_tokens
    }

    #[getter]
    fn doc_count(&self) -> u64 {
        self.inner.doc_count
    }

    fn cf(&self, term: &str) -> u64 {
        self.inner.cf(term)
    }

    fn doc_len(&self, doc_id: &str) -> Option<u64> {
        self.inner.doc_len.get(doc_id).copied()
    }

    fn __repr__(&self) -> String {
        format!(
            "CollectionStats(total_tokens={}, doc_count={}, terms={})",
            self.inner.total_tokens,
            self.inner.doc_count,
            self.inner.cf.len()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (query, doc_text, stats, lambda_ = 0.85, length_prior = true))]
fn score_document(
    query: &str,
    doc_text: &str,
    stats: &PyCollectionStats,
    lambda_: f64,
    length_prior: bool,
) -> PyResult<Option<f64>> {
    let params = ScoringParams::new(lambda_, length_prior).map_err(to_py)?;
    mirex::score_document(&Query::new("q", query), &mirex::tokenize(doc_text), &stats.inner, params).map_err(to_py)
}

/// One scan over `docs` for the whole query set. Returns the ranked lists
/// and the shuffle counters.
#[pyfunction]
#[pyo3(signature = (docs, queries, stats, topk = 1000, lambda_ = 0.85, length_prior = true, workers = 1, shards = 4, combiner = true))]
#[allow(clippy::too_many_arguments)]
fn sequential_search(
    docs: Vec<DocTuple>,
    queries: Vec<(String, String)>,
    stats: &PyCollectionStats,
    topk: usize,
    lambda_: f64,
    length_prior: bool,
    workers: usize,
    shards: usize,
    combiner: bool,
) -> PyResult<(BTreeMap<String, Ranked>, BTreeMap<String, u64>)> {
    let config = SearchConfig {
        scoring: ScoringParams::new(lambda_, length_prior).map_err(to_py)?,
        topk,
        text: TextOptions::default(),
    };
    let shards = shard_documents(docs_from(docs), shards).map_err(to_py)?;
    let opts = EngineOptions { combine: combiner, ..engine(workers) };
    let out = mirex::sequential_search(&shards, &queries_from(queries), &stats.inner, &config, &opts).map_err(to_py)?;
    let results = out.results.iter().map(|(q, l)| (q.clone(), ranked(l))).collect();
    let shuffle = BTreeMap::from([
        ("records_emitted_by_maps".to_string(), out.shuffle.records_emitted_by_maps),
        ("records_after_combine".to_string(), out.shuffle.records_after_combine),
        ("max_per_key_after_combine".to_string(), out.shuffle.max_per_key()),
        ("tokenize_calls".to_string(), out.tokenize_calls as u64),
    ]);
    Ok((results, shuffle))
}

/// In-memory inverted index with the same scoring as the scan.
#[pyclass(name = "InvertedIndex", frozen)]
struct PyInvertedIndex {
    inner: mirex::InvertedIndex,
}

#[pymethods]
impl PyInvertedIndex {
    #[staticmethod]
    fn build(docs: Vec<DocTuple>) -> PyResult<Self> {
        let shards = shard_documents(docs_from(docs), 1).map_err(to_py)?;
        Ok(PyInvertedIndex { inner: baseline::build_index(&shards, TextOptions::default()).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyInvertedIndex { inner: baseline::load_index(path).map_err(to_py)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        baseline::save_index(&self.inner, path).map_err(to_py)
    }

    fn postings(&self, term: &str) -> Vec<(String, u32)> {
        self.inner.postings_by_id(term).into_iter().map(|(d, tf)| (d.to_string(), tf)).collect()
    }

    #[pyo3(signature = (query, topk = 1000, lambda_ = 0.85, length_prior = true))]
    fn search(&self, query: &str, topk: usize, lambda_: f64, length_prior: bool) -> PyResult<Ranked> {
        let params = ScoringParams::new(lambda_, length_prior).map_err(to_py)?;
        let list = IndexSearcher::new(&self.inner).search(&Query::new("q", query), params, topk).map_err(to_py)?;
        Ok(ranked(&list))
    }

    fn __len__(&self) -> usize {
        self.inner.docs().len()
    }
}

#[pyfunction]
#[pyo3(signature = (raw, base = None))]
fn normalize_url(raw: &str, base: Option<&str>) -> Option<String> {
    match base {
        Some(b) => {
            let base = url_base(b)?;
            anchors::normalize_url(raw, Some(&base))
        }
        None => anchors::normalize_url(raw, None),
    }
}

fn url_base(b: &str) -> Option<url::Url> {
    url::Url::parse(&anchors::normalize_url(b, None)?).ok()
}

#[pyfunction]
fn extract_anchors(doc_id: &str, url: &str, text: &str) -> Vec<(String, String, usize)> {
    anchors::extract_anchors(&Document::new(doc_id, url, text))
        .into_iter()
        .map(|p| (p.target_url, p.anchor_text, p.ordinal))
        .collect()
}

#[pyfunction]
#[pyo3(signature = (docs, workers = 1, shards = 4, max_anchor_tokens = 512))]
fn build_anchor_corpus(
    docs: Vec<DocTuple>,
    workers: usize,
    shards: usize,
    max_anchor_tokens: usize,
) -> PyResult<(Vec<DocTuple>, f64)> {
    let shards = shard_documents(docs_from(docs), shards).map_err(to_py)?;
    let ac = anchors::build_anchor_corpus(&shards, max_anchor_tokens, &engine(workers)).map_err(to_py)?;
    Ok((ac.documents.into_iter().map(|d| (d.doc_id, d.url, d.text)).collect(), ac.coverage))
}

/// Renders ranked lists as TREC run text.
#[pyfunction]
fn write_run(results: BTreeMap<String, Ranked>, run_tag: &str) -> PyResult<String> {
    let mut lists = BTreeMap::new();
    for (q, entries) in results {
        let mut list = RankedList::new(entries.len());
        for (d, s) in entries {
            list.ranked_insert(mirex::ScoredDoc::new(d, s)).map_err(to_py)?;
        }
        lists.insert(q, list);
    }
    eval::write_run(&lists, run_tag).map_err(to_py)
}

/// Mean P@5, P@10, P@20 and MAP of a run against qrels, both given as text.
#[pyfunction]
#[pyo3(signature = (run_text, qrels_text, cutoff = 1000))]
fn evaluate(run_text: &str, qrels_text: &str, cutoff: usize) -> PyResult<BTreeMap<String, f64>> {
    let run = RunFile::parse(run_text, "run").map_err(to_py)?;
    let qrels = Qrels::parse(qrels_text, "qrels").map_err(to_py)?;
    let report = eval::evaluate(&run, &qrels, cutoff).map_err(to_py)?;
    Ok(BTreeMap::from([
        ("P@5".to_string(), report.p5.mean),
        ("P@10".to_string(), report.p10.mean),
        ("P@20".to_string(), report.p20.mean),
        ("MAP".to_string(), report.map.mean),
    ]))
}

#[pymodule(name = "mirex")]
fn mirex_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MirexError", m.py().get_type::<MirexError>())?;
    m.add_class::<PyCollectionStats>()?;
    m.add_class::<PyInvertedIndex>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(generate_queries, m)?)?;
    m.add_function(wrap_pyfunction!(read_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(write_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(score_document, m)?)?;
    m.add_function(wrap_pyfunction!(sequential_search, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_url, m)?)?;
    m.add_function(wrap_pyfunction!(extract_anchors, m)?)?;
    m.add_function(wrap_pyfunction!(build_anchor_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(write_run, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
