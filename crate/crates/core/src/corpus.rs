//! Documents, queries and their on-disk formats.
//!
//! A corpus file holds one record per line, `doc_id<TAB>url<TAB>text`, with
//! backslash escapes for tab, newline, carriage return and backslash inside
//! fields. A `.gz` suffix selects gzip compression for both reading and
//! writing. Query files use the same escaping with two fields,
//! `query_id<TAB>text`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub url: String,
    pub text: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, url: impl Into<String>, text: impl Into<String>) -> Self {
        Document { doc_id: doc_id.into(), url: url.into(), text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub text: String,
}

impl Query {
    pub fn new(query_id: impl Into<String>, text: impl Into<String>) -> Self {
        Query { query_id: query_id.into(), text: text.into() }
    }
}

/// One split of the corpus handed to a map worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusShard {
    pub shard_index: usize,
    pub records: Vec<Document>,
}

/// Round-robin partition: record `i` lands in shard `i % shard_count`.
pub fn shard_documents(docs: Vec<Document>, shard_count: usize) -> Result<Vec<CorpusShard>> {
    if shard_count == 0 {
        return Err(Error::Config("shard count must be positive".into()));
    }
    let mut shards: Vec<CorpusShard> = (0..shard_count)
        .map(|shard_index| CorpusShard { shard_index, records: Vec::with_capacity(docs.len() / shard_count + 1) })
        .collect();
    for (i, doc) in docs.into_iter().enumerate() {
        shards[i % shard_count].records.push(doc);
    }
    Ok(shards)
}

/// Inverse of [`shard_documents`]: interleaves the shards back into corpus order.
pub fn unshard(shards: &[CorpusShard]) -> Vec<Document> {
    let total: usize = shards.iter().map(|s| s.records.len()).sum();
    let mut out = Vec::with_capacity(total);
    let mut cursors = vec![0usize; shards.len()];
    'outer: loop {
        for (shard, cursor) in shards.iter().zip(cursors.iter_mut()) {
            match shard.records.get(*cursor) {
                Some(doc) => {
                    out.push(doc.clone());
                    *cursor += 1;
                }
                None => break 'outer,
            }
        }
    }
    out
}

pub fn read_corpus(path: impl AsRef<Path>, shard_count: usize) -> Result<Vec<CorpusShard>> {
    if shard_count == 0 {
        return Err(Error::Config("shard count must be positive".into()));
    }
    shard_documents(read_documents(path)?, shard_count)
}

/// Reads every record of a corpus file in file order.
pub fn read_documents(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |line_no, line| {
        let fields = split_fields(line, 3).map_err(|msg| Error::parse(&name, line_no, msg))?;
        let mut it = fields.into_iter();
        let (doc_id, url, text) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        check_token(&doc_id).map_err(|msg| Error::parse(&name, line_no, format!("doc_id {msg}")))?;
        if !seen.insert(doc_id.clone()) {
            return Err(Error::Integrity(format!("{name}:{line_no}: duplicate doc_id {doc_id:?}")));
        }
        docs.push(Document { doc_id, url, text });
        Ok(())
    })?;
    Ok(docs)
}

pub fn write_corpus(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for doc in docs {
        check_token(&doc.doc_id).map_err(|msg| Error::Integrity(format!("doc_id {:?} {msg}", doc.doc_id)))?;
    }
    write_lines(path, |out| {
        for doc in docs {
            write_record(out, &[&doc.doc_id, &doc.url, &doc.text])?;
        }
        Ok(())
    })
}

pub fn read_queries(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut queries = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |line_no, line| {
        let fields = split_fields(line, 2).map_err(|msg| Error::parse(&name, line_no, msg))?;
        let mut it = fields.into_iter();
        let (query_id, text) = (it.next().unwrap(), it.next().unwrap());
        check_token(&query_id).map_err(|msg| Error::parse(&name, line_no, format!("query_id {msg}")))?;
        if !seen.insert(query_id.clone()) {
            return Err(Error::Integrity(format!("{name}:{line_no}: duplicate query_id {query_id:?}")));
        }
        queries.push(Query { query_id, text });
        Ok(())
    })?;
    Ok(queries)
}

pub fn write_queries(queries: &[Query], path: impl AsRef<Path>) -> Result<()> {
    write_lines(path.as_ref(), |out| {
        for q in queries {
            write_record(out, &[&q.query_id, &q.text])?;
        }
        Ok(())
    })
}

fn check_token(id: &str) -> std::result::Result<(), &'static str> {
    if id.is_empty() {
        Err("is empty")
    } else if id.chars().any(char::is_whitespace) {
        Err("contains whitespace")
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Escaped TSV plumbing, shared by the stats and index file formats.
// ---------------------------------------------------------------------------

pub(crate) fn escape_field(field: &str, out: &mut String) {
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

pub(crate) fn unescape_field(field: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("invalid escape sequence \\{other}")),
            None => return Err("dangling backslash at end of field".into()),
        }
    }
    Ok(out)
}

/// Splits a raw line into exactly `expected` unescaped fields.
pub(crate) fn split_fields(line: &str, expected: usize) -> std::result::Result<Vec<String>, String> {
    let raw: Vec<&str> = line.split('\t').collect();
    if raw.len() != expected {
        return Err(format!("expected {expected} tab-separated fields, found {}", raw.len()));
    }
    raw.into_iter().map(unescape_field).collect()
}

pub(crate) fn write_record(out: &mut dyn Write, fields: &[&str]) -> std::io::Result<()> {
    let mut line = String::new();
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            line.push('\t');
        }
        escape_field(f, &mut line);
    }
    line.push('\n');
    out.write_all(line.as_bytes())
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|ext| ext == "gz")
}

pub(crate) fn open_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let inner: Box<dyn Read> = if is_gzip(path) { Box::new(MultiGzDecoder::new(file)) } else { Box::new(file) };
    Ok(Box::new(BufReader::with_capacity(1 << 16, inner)))
}

/// Calls `f` with the 1-based line number and content of each non-blank line.
/// Invalid UTF-8 is replaced rather than rejected.
pub(crate) fn for_each_line(path: &Path, mut f: impl FnMut(usize, &str) -> Result<()>) -> Result<()> {
    let mut reader = open_reader(path)?;
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Ok(());
        }
        line_no += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
            if buf.last() == Some(&b'\r') {
                buf.pop();
            }
        }
        if buf.is_empty() {
            continue;
        }
        let line = String::from_utf8_lossy(&buf);
        f(line_no, &line)?;
    }
}

pub(crate) fn write_lines(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let result = if is_gzip(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        body(&mut enc).and_then(|_| enc.finish()).and_then(|mut w| w.flush())
    } else {
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush())
    };
    result.map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Synthetic corpora
// ---------------------------------------------------------------------------

/// Knobs for [`generate_with`]. [`generate_synthetic`] uses the defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub doc_count: usize,
    pub vocab_size: usize,
    pub seed: u64,
    /// Fraction of documents that carry outgoing anchors.
    pub link_fraction: f64,
    pub zipf_exponent: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub max_links_per_doc: usize,
}

impl SyntheticConfig {
    pub fn new(doc_count: usize, vocab_size: usize, seed: u64) -> Self {
        SyntheticConfig {
            doc_count,
            vocab_size,
            seed,
            link_fraction: 0.3,
            zipf_exponent: 1.0,
            min_len: 8,
            max_len: 800,
            max_links_per_doc: 3,
        }
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// The `rank`-th vocabulary word. Distinct ranks give distinct words, and
/// every word is a single token.
pub fn synthetic_word(rank: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    // bijective base-`base` numeral of rank + 1
    let mut n = rank + 1;
    let mut syllables = Vec::new();
    while n > 0 {
        let d = (n - 1) % base;
        syllables.push(d);
        n = (n - 1) / base;
    }
    let mut word = String::with_capacity(syllables.len() * 2);
    for d in syllables.into_iter().rev() {
        word.push(CONSONANTS[d / VOWELS.len()] as char);
        word.push(VOWELS[d % VOWELS.len()] as char);
    }
    word
}

pub fn synthetic_doc_id(i: usize) -> String {
    format!("doc{i:07}")
}

/// URL of the `i`-th synthetic document; every 50th document has none.
pub fn synthetic_url(i: usize) -> String {
    if i % 50 == 49 {
        String::new()
    } else {
        format!("http://site{:02}.example.org/page/{i}", i % 37)
    }
}

pub fn generate_synthetic(doc_count: usize, vocab_size: usize, seed: u64) -> Result<Vec<Document>> {
    generate_with(&SyntheticConfig::new(doc_count, vocab_size, seed))
}

pub fn generate_with(cfg: &SyntheticConfig) -> Result<Vec<Document>> {
    if cfg.doc_count == 0 {
        return Err(Error::Config("doc_count must be at least 1".into()));
    }
    if cfg.vocab_size < 2 {
        return Err(Error::Config("vocab_size must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&cfg.link_fraction) {
        return Err(Error::Config("link_fraction must lie in [0, 1]".into()));
    }
    if cfg.min_len == 0 || cfg.max_len < cfg.min_len {
        return Err(Error::Config("document length bounds must satisfy 1 <= min <= max".into()));
    }
    let zipf = Zipf::new(cfg.vocab_size as f64, cfg.zipf_exponent)
        .map_err(|e| Error::Config(format!("zipf distribution: {e}")))?;
    let words: Vec<String> = (0..cfg.vocab_size).map(synthetic_word).collect();
    let linkable: Vec<usize> = (0..cfg.doc_count).filter(|&i| !synthetic_url(i).is_empty()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (ln_min, ln_max) = ((cfg.min_len as f64).ln(), (cfg.max_len as f64).ln());

    let mut docs = Vec::with_capacity(cfg.doc_count);
    for i in 0..cfg.doc_count {
        let len = match i {
            0 => cfg.min_len,
            1 => cfg.max_len,
            _ => (rng.random_range(ln_min..=ln_max)).exp().round() as usize,
        }
        .clamp(cfg.min_len, cfg.max_len);
        let mut body: Vec<String> = (0..len).map(|_| words[zipf.sample(&mut rng) as usize - 1].clone()).collect();

        if !linkable.is_empty() && rng.random_bool(cfg.link_fraction) {
            let links = rng.random_range(1..=cfg.max_links_per_doc.max(1));
            for _ in 0..links {
                let target = linkable[rng.random_range(0..linkable.len())];
                let href = link_href(i, target, &mut rng);
                let anchor_len = rng.random_range(1..=4);
                let anchor: Vec<&str> =
                    (0..anchor_len).map(|_| words[zipf.sample(&mut rng) as usize - 1].as_str()).collect();
                let at = rng.random_range(0..=body.len());
                body.insert(at, format!("<a href=\"{href}\">{}</a>", anchor.join(" ")));
            }
        }
        docs.push(Document { doc_id: synthetic_doc_id(i), url: synthetic_url(i), text: body.join(" ") });
    }
    Ok(docs)
}

/// Mixes absolute, relative and fragment-carrying forms of a link so
/// extraction has normalization work to do.
fn link_href(source: usize, target: usize, rng: &mut ChaCha8Rng) -> String {
    let url = synthetic_url(target);
    let same_site = !synthetic_url(source).is_empty() && source % 37 == target % 37;
    match rng.random_range(0..4) {
        0 if same_site => format!("/page/{target}"),
        1 => format!("{url}#section"),
        2 => url.replacen("http://site", "HTTP://Site", 1),
        _ => url,
    }
}

/// Seeded query pool over the synthetic vocabulary: 1 to 4 terms each,
/// drawn uniformly from the vocabulary ranks.
pub fn generate_queries(count: usize, vocab_size: usize, seed: u64) -> Result<Vec<Query>> {
    if vocab_size == 0 {
        return Err(Error::Config("vocab_size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    Ok((0..count)
        .map(|i| {
            let n = rng.random_range(1..=4);
            let terms: Vec<String> = (0..n).map(|_| synthetic_word(rng.random_range(0..vocab_size))).collect();
            Query::new(format!("q{i:05}"), terms.join(" "))
        })
        .collect())
}
