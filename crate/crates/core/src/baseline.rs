//! In-memory inverted index running the same scoring model term-at-a-time.
//! Used as the equivalence oracle for the scan and as its benchmark opponent.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use crate::corpus::{write_lines, write_record, CorpusShard, Query};
use crate::error::{Error, Result};
use crate::scoring::{PreparedQuery, ScoringParams};
use crate::search::{RankedList, ScoredDoc};
use crate::stats::{read_raw_lines, term_counts, CollectionStats, SectionCursor, TextOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Index into [`InvertedIndex::docs`]; ascending doc index is ascending doc_id.
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedDoc {
    pub doc_id: Arc<str>,
    pub len: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvertedIndex {
    docs: Vec<IndexedDoc>,
    postings: HashMap<String, Vec<Posting>>,
    stats: CollectionStats,
}

impl InvertedIndex {
    pub fn docs(&self) -> &[IndexedDoc] {
        &self.docs
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn stats(&self) -> &CollectionStats {
        &self.stats
    }

    /// `(doc_id, tf)` view of a postings list.
    pub fn postings_by_id(&self, term: &str) -> Vec<(&str, u32)> {
        self.postings(term).iter().map(|p| (&*self.docs[p.doc as usize].doc_id, p.tf)).collect()
    }

    fn from_parts(docs: Vec<IndexedDoc>, postings: HashMap<String, Vec<Posting>>) -> Self {
        let mut stats = CollectionStats { doc_count: docs.len() as u64, ..Default::default() };
        for d in &docs {
            stats.total_tokens += d.len;
            stats.doc_len.insert(d.doc_id.to_string(), d.len);
        }
        for (term, list) in &postings {
            stats.cf.insert(term.clone(), list.iter().map(|p| p.tf as u64).sum());
        }
        InvertedIndex { docs, postings, stats }
    }
}

pub fn build_index(shards: &[CorpusShard], text: TextOptions) -> Result<InvertedIndex> {
    let mut docs: Vec<_> = shards.iter().flat_map(|s| &s.records).collect();
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    if let Some(w) = docs.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
        return Err(Error::Integrity(format!("duplicate doc_id {}", w[0].doc_id)));
    }
    if docs.len() > u32::MAX as usize {
        return Err(Error::Config("corpus too large for a 32-bit document index".into()));
    }
    let mut indexed = Vec::with_capacity(docs.len());
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    for (i, doc) in docs.iter().enumerate() {
        let (counts, len) = term_counts(&text.prepare(&doc.text));
        indexed.push(IndexedDoc { doc_id: doc.doc_id.as_str().into(), len });
        for (term, tf) in counts {
            postings.entry(term).or_default().push(Posting { doc: i as u32, tf });
        }
    }
    Ok(InvertedIndex::from_parts(indexed, postings))
}

/// Reusable accumulator state for running many queries against one index.
pub struct IndexSearcher<'a> {
    index: &'a InvertedIndex,
    acc: Vec<f64>,
    touched: Vec<u32>,
}

impl<'a> IndexSearcher<'a> {
    pub fn new(index: &'a InvertedIndex) -> Self {
        IndexSearcher { index, acc: vec![0.0; index.docs.len()], touched: Vec::new() }
    }

    pub fn search(&mut self, query: &Query, params: ScoringParams, topk: usize) -> Result<RankedList> {
        if topk == 0 {
            return Err(Error::Config("topk must be at least 1".into()));
        }
        let prepared = PreparedQuery::new(query, &self.index.stats, params)?;
        let docs = &self.index.docs;
        // term-at-a-time in ascending term order, matching the scan's summation order
        for (i, term) in prepared.terms().enumerate() {
            for p in self.index.postings(term) {
                let slot = &mut self.acc[p.doc as usize];
                if *slot == 0.0 {
                    self.touched.push(p.doc);
                }
                *slot += prepared.contribution(i, p.tf as u64, docs[p.doc as usize].len);
            }
        }
        let mut list = RankedList::new(topk);
        for &d in &self.touched {
            let doc = &docs[d as usize];
            let score = prepared.finish(std::mem::take(&mut self.acc[d as usize]), doc.len);
            list.ranked_insert(ScoredDoc { doc_id: doc.doc_id.clone(), score })?;
        }
        self.touched.clear();
        Ok(list)
    }
}

pub fn index_search(index: &InvertedIndex, query: &Query, params: ScoringParams, topk: usize) -> Result<RankedList> {
    IndexSearcher::new(index).search(query, params, topk)
}

const INDEX_MAGIC: &str = "mirex-index";
const INDEX_VERSION: &str = "v1";

/// Layout:
///
/// ```text
/// mirex-index  v1
/// docs  <n>
/// <doc_id>  <len>                 (ascending doc_id)
/// postings  <p>
/// <term>  <doc_id>  <tf>          (ascending term, then doc_id)
/// ```
pub fn save_index(index: &InvertedIndex, path: impl AsRef<Path>) -> Result<()> {
    let mut terms: Vec<&String> = index.postings.keys().collect();
    terms.sort();
    let total: usize = index.postings.values().map(Vec::len).sum();
    write_lines(path.as_ref(), |out| {
        write_record(out, &[INDEX_MAGIC, INDEX_VERSION])?;
        write_record(out, &["docs", &index.docs.len().to_string()])?;
        for d in &index.docs {
            write_record(out, &[&d.doc_id, &d.len.to_string()])?;
        }
        write_record(out, &["postings", &total.to_string()])?;
        for term in terms {
            for p in &index.postings[term] {
                write_record(out, &[term, &index.docs[p.doc as usize].doc_id, &p.tf.to_string()])?;
            }
        }
        Ok(())
    })
}

pub fn load_index(path: impl AsRef<Path>) -> Result<InvertedIndex> {
    let path = path.as_ref();
    let name = path.display();
    let lines = read_raw_lines(path)?;
    let mut cursor = SectionCursor::new(path, &lines);
    let header = cursor.next_fields(2)?;
    if header[0] != INDEX_MAGIC || header[1] != INDEX_VERSION {
        return Err(Error::Format(format!("{name}: expected {INDEX_MAGIC} {INDEX_VERSION} header")));
    }
    let n_docs = cursor.section("docs")?;
    let mut docs = Vec::with_capacity(n_docs);
    let mut by_id: BTreeMap<String, u32> = BTreeMap::new();
    for i in 0..n_docs {
        let f = cursor.next_fields(2)?;
        if docs.last().is_some_and(|d: &IndexedDoc| *d.doc_id >= *f[0]) {
            return Err(Error::Format(format!("{name}: documents not in ascending doc_id order at {:?}", f[0])));
        }
        by_id.insert(f[0].clone(), i as u32);
        docs.push(IndexedDoc { doc_id: f[0].as_str().into(), len: cursor.number(&f[1])? });
    }
    let n_postings = cursor.section("postings")?;
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    for _ in 0..n_postings {
        let f = cursor.next_fields(3)?;
        let doc =
            *by_id.get(&f[1]).ok_or_else(|| Error::Format(format!("{name}: posting for unknown doc_id {:?}", f[1])))?;
        let tf: u32 = cursor.number(&f[2])?;
        let list = postings.entry(f[0].clone()).or_default();
        if tf == 0 || list.last().is_some_and(|p| p.doc >= doc) {
            return Err(Error::Format(format!("{name}: invalid posting {:?} {:?} {tf}", f[0], f[1])));
        }
        list.push(Posting { doc, tf });
    }
    cursor.expect_end()?;
    let index = InvertedIndex::from_parts(docs, postings);
    index.stats.validate().map_err(|e| Error::Format(format!("{name}: {e}")))?;
    Ok(index)
}
