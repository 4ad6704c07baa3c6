//! Query-likelihood scoring with linear smoothing and a document length prior.
//!
//! With `λ` the document-model weight, a document `d` matching at least one
//! query term scores
//!
//! ```text
//! log|d| + Σ_t m(t) · log(1 + λ·tf(t,d)·|C| / ((1−λ)·cf(t)·|d|))
//! ```
//!
//! summed over distinct query terms in ascending order. This is the smoothed
//! query likelihood with the rank-invariant `|q|·log(1−λ)` term dropped, so
//! every matching document scores strictly above zero. Documents without a
//! matching term get no score at all.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::corpus::{Document, Query};
use crate::error::{Error, Result};
use crate::stats::{term_counts, tokenize, CollectionStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringParams {
    pub lambda: f64,
    pub length_prior: bool,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams { lambda: 0.85, length_prior: true }
    }
}

impl ScoringParams {
    pub fn new(lambda: f64, length_prior: bool) -> Result<Self> {
        let params = ScoringParams { lambda, length_prior };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda > 0.0 && self.lambda < 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("lambda must lie strictly between 0 and 1, got {}", self.lambda)))
        }
    }
}

/// Contribution of one matching term before its query multiplicity.
#[inline]
pub fn term_weight(tf: u64, cf: u64, doc_len: u64, total_tokens: u64, lambda: f64) -> f64 {
    let num = lambda * tf as f64 * total_tokens as f64;
    let den = (1.0 - lambda) * cf as f64 * doc_len as f64;
    (num / den).ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
struct QueryTerm {
    term: String,
    multiplicity: u32,
    cf: u64,
}

/// A query tokenized once and bound to collection statistics.
///
/// Terms are held in ascending order, which fixes the summation order of
/// every score computed from it.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedQuery {
    pub query_id: Arc<str>,
    terms: Vec<QueryTerm>,
    total_tokens: u64,
    params: ScoringParams,
}

impl PreparedQuery {
    pub fn new(query: &Query, stats: &CollectionStats, params: ScoringParams) -> Result<Self> {
        params.validate()?;
        if stats.total_tokens == 0 {
            return Err(Error::Config("collection statistics are empty (total_tokens = 0)".into()));
        }
        let tokens = tokenize(&query.text);
        if tokens.is_empty() {
            return Err(Error::Config(format!("query {} has no terms", query.query_id)));
        }
        let mut multiplicity: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens {
            *multiplicity.entry(t).or_insert(0) += 1;
        }
        let terms = multiplicity
            .into_iter()
            .filter_map(|(term, m)| {
                let cf = stats.cf(&term);
                (cf > 0).then_some(QueryTerm { term, multiplicity: m, cf })
            })
            .collect();
        Ok(PreparedQuery { query_id: query.query_id.as_str().into(), terms, total_tokens: stats.total_tokens, params })
    }

    /// Query terms that occur in the collection, ascending.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|t| t.term.as_str())
    }

    /// Weighted contribution of the `i`-th term of [`terms`](Self::terms).
    #[inline]
    pub fn contribution(&self, i: usize, tf: u64, doc_len: u64) -> f64 {
        let t = &self.terms[i];
        t.multiplicity as f64 * term_weight(tf, t.cf, doc_len, self.total_tokens, self.params.lambda)
    }

    /// Adds the length prior to an accumulated term sum.
    #[inline]
    pub fn finish(&self, term_sum: f64, doc_len: u64) -> f64 {
        if self.params.length_prior {
            term_sum + (doc_len as f64).ln()
        } else {
            term_sum
        }
    }

    /// Scores a document given a lookup of its term frequencies.
    pub fn score(&self, doc_len: u64, mut tf: impl FnMut(&str) -> u32) -> Option<f64> {
        self.score_indexed(doc_len, |i| tf(&self.terms[i].term))
    }

    /// As [`score`](Self::score), with frequencies looked up by position in
    /// [`terms`](Self::terms).
    #[inline]
    pub fn score_indexed(&self, doc_len: u64, mut tf: impl FnMut(usize) -> u32) -> Option<f64> {
        if doc_len == 0 {
            return None;
        }
        let mut sum = 0.0;
        let mut matched = false;
        for i in 0..self.terms.len() {
            let n = tf(i);
            if n > 0 {
                matched = true;
                sum += self.contribution(i, n as u64, doc_len);
            }
        }
        matched.then(|| self.finish(sum, doc_len))
    }
}

/// Scores one document for one query; `None` when no query term occurs in it.
pub fn score_document(
    query: &Query,
    doc_tokens: &[String],
    stats: &CollectionStats,
    params: ScoringParams,
) -> Result<Option<f64>> {
    let prepared = PreparedQuery::new(query, stats, params)?;
    let mut counts: HashMap<&str, u32> = HashMap::new();
    for t in doc_tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    Ok(prepared.score(doc_tokens.len() as u64, |t| counts.get(t).copied().unwrap_or(0)))
}

/// Ranking order shared by every component: score descending, then
/// doc_id ascending.
#[inline]
pub fn rank_cmp(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

/// Every matching document with its score, in ranking order.
pub fn rank_order_check(
    query: &Query,
    docs: &[Document],
    stats: &CollectionStats,
    params: ScoringParams,
) -> Result<Vec<(String, f64)>> {
    let prepared = PreparedQuery::new(query, stats, params)?;
    let mut ranked: Vec<(String, f64)> = docs
        .iter()
        .filter_map(|d| {
            let (counts, len) = term_counts(&d.text);
            prepared.score(len, |t| counts.get(t).copied().unwrap_or(0)).map(|s| (d.doc_id.clone(), s))
        })
        .collect();
    ranked.sort_by(|a, b| rank_cmp(a.1, &a.0, b.1, &b.0));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_stats() -> CollectionStats {
        CollectionStats {
            total_tokens: 4,
            doc_count: 2,
            cf: BTreeMap::from([("a".into(), 2), ("b".into(), 2)]),
            doc_len: BTreeMap::from([("d1".into(), 3), ("d2".into(), 1)]),
        }
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn hand_computed_score() {
        // log(3) + log(1 + (0.85*2*4)/(0.15*2*3))
        let expected = 3f64.ln() + (1.0 + 6.8 / 0.9f64).ln();
        assert!((expected - 3.245193).abs() < 1e-6);
        let got = score_document(&Query::new("q", "a"), &toks("a a b"), &small_stats(), ScoringParams::default())
            .unwrap()
            .unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
    }

    #[test]
    fn unknown_term_never_scores() {
        let stats = small_stats();
        for doc in ["a a b", "b"] {
            let s = score_document(&Query::new("q", "z"), &toks(doc), &stats, ScoringParams::default()).unwrap();
            assert_eq!(s, None);
        }
    }

    #[test]
    fn larger_lambda_raises_contribution() {
        let stats = small_stats();
        let no_prior = |lambda| {
            score_document(&Query::new("q", "a"), &toks("a a b"), &stats, ScoringParams::new(lambda, false).unwrap())
                .unwrap()
                .unwrap()
        };
        assert!(no_prior(0.85) > no_prior(0.5));
    }

    #[test]
    fn query_multiplicity_scales_contribution() {
        let stats = small_stats();
        let p = ScoringParams::new(0.85, false).unwrap();
        let once = score_document(&Query::new("q", "a"), &toks("a a b"), &stats, p).unwrap().unwrap();
        let twice = score_document(&Query::new("q", "a A"), &toks("a a b"), &stats, p).unwrap().unwrap();
        assert_eq!(twice, 2.0 * once);
    }

    #[test]
    fn empty_document_never_scores() {
        let s = score_document(&Query::new("q", "a"), &[], &small_stats(), ScoringParams::default()).unwrap();
        assert_eq!(s, None);
    }

    #[test]
    fn configuration_errors() {
        let q = Query::new("q", "a");
        assert!(matches!(
            score_document(&q, &toks("a"), &CollectionStats::default(), ScoringParams::default()),
            Err(Error::Config(_))
        ));
        assert!(ScoringParams::new(1.0, true).is_err());
        assert!(ScoringParams::new(0.0, true).is_err());
        assert!(matches!(
            score_document(&Query::new("q", "!!"), &toks("a"), &small_stats(), ScoringParams::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_token_doc_is_positive() {
        // |d| = 1 makes the prior zero; the term still contributes
        let s = score_document(&Query::new("q", "b"), &toks("b"), &small_stats(), ScoringParams::default())
            .unwrap()
            .unwrap();
        assert!(s > 0.0);
    }

    #[test]
    fn ties_break_by_doc_id() {
        let docs = vec![Document::new("d2", "", "a b"), Document::new("d1", "", "b a")];
        let order = rank_order_check(&Query::new("q", "a"), &docs, &small_stats(), ScoringParams::default()).unwrap();
        assert_eq!(order.iter().map(|r| r.0.as_str()).collect::<Vec<_>>(), ["d1", "d2"]);
        let single =
            rank_order_check(&Query::new("q", "a"), &docs[..1], &small_stats(), ScoringParams::default()).unwrap();
        assert_eq!(single.len(), 1);
    }

    proptest::proptest! {
        #[test]
        fn monotone_in_tf(tf in 1u64..50, extra in 1u64..50, cf in 1u64..1000, len in 1u64..500, lambda in 0.01f64..0.99) {
            let total = 10_000;
            // tf and |d| grow together, as when a matching token is appended
            let lo = term_weight(tf, cf, len + extra, total, lambda);
            let hi = term_weight(tf + extra, cf, len + extra, total, lambda);
            proptest::prop_assert!(hi > lo);
            proptest::prop_assert!(lo > 0.0);
        }
    }
}
