//! Tokenization and collection statistics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use crate::corpus::{for_each_line, split_fields, write_lines, write_record, CorpusShard, Document};
use crate::engine::{run_job, Emitter, EngineOptions, Job, JobFailure};
use crate::error::{Error, Result};

/// Maximal runs of Unicode alphanumerics, lowercased. No stemming and no
/// stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for_each_token(text, |t| tokens.push(t.to_string()));
    tokens
}

/// Streaming form of [`tokenize`]; the slice passed to `f` is only valid
/// for the duration of the call.
pub fn for_each_token(text: &str, mut f: impl FnMut(&str)) {
    let mut buf = String::new();
    let mut start: Option<usize> = None;
    let mut needs_fold = false;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
                needs_fold = false;
            }
            needs_fold |= !(c.is_ascii_lowercase() || c.is_ascii_digit());
        } else if let Some(s) = start.take() {
            emit_token(&text[s..i], needs_fold, &mut buf, &mut f);
        }
    }
    if let Some(s) = start {
        emit_token(&text[s..], needs_fold, &mut buf, &mut f);
    }
}

fn emit_token(raw: &str, needs_fold: bool, buf: &mut String, f: &mut impl FnMut(&str)) {
    if needs_fold {
        buf.clear();
        buf.extend(raw.chars().flat_map(char::to_lowercase));
        f(buf);
    } else {
        f(raw);
    }
}

/// Term counts of one text, plus its token length.
pub fn term_counts(text: &str) -> (HashMap<String, u32>, u64) {
    let mut counts: HashMap<String, u32> = HashMap::new();
    let mut len = 0u64;
    for_each_token(text, |t| {
        len += 1;
        match counts.get_mut(t) {
            Some(c) => *c += 1,
            None => {
                counts.insert(t.to_string(), 1);
            }
        }
    });
    (counts, len)
}

/// Corpus-wide counts consumed by the language model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CollectionStats {
    pub total_tokens: u64,
    pub doc_count: u64,
    pub cf: BTreeMap<String, u64>,
    pub doc_len: BTreeMap<String, u64>,
}

impl CollectionStats {
    pub fn cf(&self, term: &str) -> u64 {
        self.cf.get(term).copied().unwrap_or(0)
    }

    /// Checks the conservation invariants.
    pub fn validate(&self) -> Result<()> {
        let cf_sum: u64 = self.cf.values().sum();
        let len_sum: u64 = self.doc_len.values().sum();
        if cf_sum != self.total_tokens || len_sum != self.total_tokens {
            return Err(Error::Integrity(format!(
                "stats do not conserve tokens: total {} cf-sum {cf_sum} doc_len-sum {len_sum}",
                self.total_tokens
            )));
        }
        if self.doc_len.len() as u64 != self.doc_count {
            return Err(Error::Integrity(format!(
                "stats doc_count {} but {} document lengths",
                self.doc_count,
                self.doc_len.len()
            )));
        }
        if let Some((t, _)) = self.cf.iter().find(|(_, &c)| c == 0) {
            return Err(Error::Integrity(format!("term {t:?} has zero collection frequency")));
        }
        Ok(())
    }
}

/// Text preparation applied before tokenizing documents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TextOptions {
    pub strip_html: bool,
}

impl TextOptions {
    pub fn prepare<'a>(&self, text: &'a str) -> std::borrow::Cow<'a, str> {
        if self.strip_html {
            std::borrow::Cow::Owned(crate::anchors::strip_tags(text))
        } else {
            std::borrow::Cow::Borrowed(text)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StatsKey {
    Term(Arc<str>),
    DocLen(Arc<str>),
}

struct StatsJob {
    text: TextOptions,
}

impl Job for StatsJob {
    type Key = StatsKey;
    type Value = u64;
    type Output = (StatsKey, u64);

    fn map(&self, doc: &Document, out: &mut Emitter<'_, Self>) -> Result<(), JobFailure> {
        let text = self.text.prepare(&doc.text);
        let (counts, len) = term_counts(&text);
        for (term, n) in counts {
            out.emit(StatsKey::Term(term.into()), n as u64);
        }
        out.emit(StatsKey::DocLen(doc.doc_id.as_str().into()), len);
        Ok(())
    }

    fn has_combiner(&self) -> bool {
        true
    }

    fn combine(&self, key: &StatsKey, values: Vec<u64>) -> Vec<u64> {
        match key {
            // kept apart so the reducer can see duplicate ids
            StatsKey::DocLen(_) => values,
            StatsKey::Term(_) => vec![values.iter().sum()],
        }
    }

    fn value_order(&self, a: &u64, b: &u64) -> Ordering {
        a.cmp(b)
    }

    fn reduce(&self, key: &StatsKey, values: Vec<u64>, out: &mut Vec<(StatsKey, u64)>) -> Result<(), JobFailure> {
        if let StatsKey::DocLen(id) = key {
            if values.len() != 1 {
                return Err(format!("doc_id {id} occurs {} times", values.len()).into());
            }
        }
        out.push((key.clone(), values.iter().sum()));
        Ok(())
    }
}

/// Collection statistics over the documents as they will be searched.
pub fn compute_stats(shards: &[CorpusShard], text: TextOptions, opts: &EngineOptions) -> Result<CollectionStats> {
    let output = run_job(&StatsJob { text }, shards, opts).map_err(|e| match e {
        Error::ReduceFailed { message, .. } => Error::Integrity(message),
        other => other,
    })?;
    let mut stats = CollectionStats::default();
    for (key, n) in output.records {
        match key {
            StatsKey::Term(t) => {
                stats.total_tokens += n;
                stats.cf.insert(t.to_string(), n);
            }
            StatsKey::DocLen(d) => {
                stats.doc_count += 1;
                stats.doc_len.insert(d.to_string(), n);
            }
        }
    }
    Ok(stats)
}

const STATS_MAGIC: &str = "mirex-stats";
const STATS_VERSION: &str = "v1";

/// Layout:
///
/// ```text
/// mirex-stats  v1  <total_tokens>  <doc_count>
/// cf  <n>
/// <term>  <cf>            (n lines, ascending term)
/// doc_len  <m>
/// <doc_id>  <len>         (m lines, ascending doc_id)
/// ```
pub fn save_stats(stats: &CollectionStats, path: impl AsRef<Path>) -> Result<()> {
    write_lines(path.as_ref(), |out| {
        write_record(
            out,
            &[STATS_MAGIC, STATS_VERSION, &stats.total_tokens.to_string(), &stats.doc_count.to_string()],
        )?;
        write_record(out, &["cf", &stats.cf.len().to_string()])?;
        for (t, n) in &stats.cf {
            write_record(out, &[t, &n.to_string()])?;
        }
        write_record(out, &["doc_len", &stats.doc_len.len().to_string()])?;
        for (d, n) in &stats.doc_len {
            write_record(out, &[d, &n.to_string()])?;
        }
        Ok(())
    })
}

/// Reads a file produced by [`save_stats`], checking the header, section
/// sizes and token conservation.
pub fn load_stats(path: impl AsRef<Path>) -> Result<CollectionStats> {
    let path = path.as_ref();
    let lines = read_raw_lines(path)?;
    let mut cursor = SectionCursor::new(path, &lines);
    let header = cursor.next_fields(4)?;
    if header[0] != STATS_MAGIC || header[1] != STATS_VERSION {
        return Err(Error::Format(format!("{}: expected {STATS_MAGIC} {STATS_VERSION} header", path.display())));
    }
    let mut stats = CollectionStats {
        total_tokens: cursor.number(&header[2])?,
        doc_count: cursor.number(&header[3])?,
        ..Default::default()
    };
    for (section, target) in [("cf", &mut stats.cf), ("doc_len", &mut stats.doc_len)] {
        let n = cursor.section(section)?;
        for _ in 0..n {
            let f = cursor.next_fields(2)?;
            let value = cursor.number(&f[1])?;
            if target.insert(f[0].clone(), value).is_some() {
                return Err(Error::Format(format!("{}: duplicate {section} entry {:?}", path.display(), f[0])));
            }
        }
    }
    cursor.expect_end()?;
    stats.validate().map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    Ok(stats)
}

pub(crate) fn read_raw_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut lines = Vec::new();
    for_each_line(path, |n, l| {
        lines.push((n, l.to_string()));
        Ok(())
    })?;
    Ok(lines)
}

/// Walks a sectioned TSV file, turning every shortfall into a format error.
pub(crate) struct SectionCursor<'a> {
    name: String,
    lines: &'a [(usize, String)],
    pos: usize,
}

impl<'a> SectionCursor<'a> {
    pub(crate) fn new(path: &Path, lines: &'a [(usize, String)]) -> Self {
        SectionCursor { name: path.display().to_string(), lines, pos: 0 }
    }

    fn line_no(&self) -> usize {
        self.lines.get(self.pos).map(|l| l.0).unwrap_or(self.lines.last().map_or(1, |l| l.0 + 1))
    }

    pub(crate) fn next_fields(&mut self, n: usize) -> Result<Vec<String>> {
        let Some((line_no, line)) = self.lines.get(self.pos) else {
            return Err(Error::Format(format!("{}: truncated file, expected more records", self.name)));
        };
        self.pos += 1;
        split_fields(line, n).map_err(|m| Error::Format(format!("{}:{line_no}: {m}", self.name)))
    }

    pub(crate) fn number<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| Error::Format(format!("{}:{}: invalid number {s:?}", self.name, self.line_no())))
    }

    pub(crate) fn section(&mut self, name: &str) -> Result<usize> {
        let f = self.next_fields(2)?;
        if f[0] != name {
            return Err(Error::Format(format!("{}: expected section {name:?}, found {:?}", self.name, f[0])));
        }
        self.number(&f[1])
    }

    pub(crate) fn expect_end(&self) -> Result<()> {
        if self.pos != self.lines.len() {
            return Err(Error::Format(format!("{}:{}: unexpected trailing records", self.name, self.line_no())));
        }
        Ok(())
    }
}
