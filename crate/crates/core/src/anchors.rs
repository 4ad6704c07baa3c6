//! Anchor-text extraction.
//!
//! A streaming tag scanner pulls `(href, visible text)` pairs out of each
//! document, the map step keys them by normalized target URL, and the
//! reducer concatenates the texts into one surrogate document per target.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use url::Url;

use crate::corpus::{CorpusShard, Document};
use crate::engine::{run_job, Emitter, EngineOptions, Job, JobFailure};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ANCHOR_TOKENS: usize = 512;

// ---------------------------------------------------------------------------
// Tag scanner
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event<'a> {
    Text(&'a str),
    Start { name: &'a str, attrs: &'a str },
    End { name: &'a str },
}

/// Single pass over possibly malformed HTML. Comments, doctypes and the
/// bodies of `script`/`style` elements produce no events. A `<` that does not
/// open a well-formed tag is reported as text.
struct Scanner<'a> {
    src: &'a str,
    pos: usize,
    raw_until: Option<&'static str>,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str) -> Self {
        Scanner { src, pos: 0, raw_until: None }
    }

    fn skip_past(&mut self, needle: &str) {
        self.pos = match self.src[self.pos..].find(needle) {
            Some(i) => self.pos + i + needle.len(),
            None => self.src.len(),
        };
    }
}

fn find_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    haystack.as_bytes().windows(needle.len()).position(|w| w.eq_ignore_ascii_case(needle.as_bytes()))
}

/// Index of the `>` closing a tag body, skipping quoted attribute values.
fn tag_end(body: &str) -> Option<usize> {
    let mut quote: Option<u8> = None;
    for (i, &b) in body.as_bytes().iter().enumerate() {
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => return Some(i),
            None => {}
        }
    }
    None
}

impl<'a> Iterator for Scanner<'a> {
    type Item = Event<'a>;

    fn next(&mut self) -> Option<Event<'a>> {
        loop {
            if self.pos >= self.src.len() {
                return None;
            }
            if let Some(close) = self.raw_until.take() {
                self.pos = match find_ascii_ci(&self.src[self.pos..], close) {
                    Some(i) => self.pos + i,
                    None => self.src.len(),
                };
                continue;
            }
            let rest = &self.src[self.pos..];
            if !rest.starts_with('<') {
                let n = rest.find('<').unwrap_or(rest.len());
                self.pos += n;
                return Some(Event::Text(&rest[..n]));
            }
            if rest.starts_with("<!--") {
                self.pos += 4;
                self.skip_past("-->");
                continue;
            }
            if rest.starts_with("<!") || rest.starts_with("<?") {
                self.skip_past(">");
                continue;
            }
            let closing = rest[1..].starts_with('/');
            let name_start = if closing { 2 } else { 1 };
            let name_len = rest[name_start..].bytes().take_while(u8::is_ascii_alphanumeric).count();
            if name_len == 0 || !rest.as_bytes()[name_start].is_ascii_alphabetic() {
                self.pos += 1;
                return Some(Event::Text("<"));
            }
            let name = &rest[name_start..name_start + name_len];
            let body = &rest[name_start + name_len..];
            let Some(end) = tag_end(body) else {
                // unterminated tag swallows the rest of the input
                self.pos = self.src.len();
                return None;
            };
            self.pos += name_start + name_len + end + 1;
            if closing {
                return Some(Event::End { name });
            }
            if name.eq_ignore_ascii_case("script") {
                self.raw_until = Some("</script");
            } else if name.eq_ignore_ascii_case("style") {
                self.raw_until = Some("</style");
            }
            return Some(Event::Start { name, attrs: &body[..end] });
        }
    }
}

/// Value of attribute `wanted` (ASCII case-insensitive) in a tag body.
fn attribute<'a>(attrs: &'a str, wanted: &str) -> Option<&'a str> {
    let b = attrs.as_bytes();
    let mut i = 0;
    while i < b.len() {
        while i < b.len() && (b[i].is_ascii_whitespace() || b[i] == b'/') {
            i += 1;
        }
        let name_start = i;
        while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'=' && b[i] != b'/' {
            i += 1;
        }
        let name = &attrs[name_start..i];
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        let mut value = None;
        if i < b.len() && b[i] == b'=' {
            i += 1;
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < b.len() && (b[i] == b'"' || b[i] == b'\'') {
                let q = b[i];
                let start = i + 1;
                let end = attrs[start..].bytes().position(|c| c == q).map_or(b.len(), |p| start + p);
                value = Some(&attrs[start..end]);
                i = (end + 1).min(b.len());
            } else {
                let start = i;
                while i < b.len() && !b[i].is_ascii_whitespace() {
                    i += 1;
                }
                value = Some(&attrs[start..i]);
            }
        }
        if name.eq_ignore_ascii_case(wanted) {
            return value;
        }
        if name.is_empty() && value.is_none() {
            i += 1;
        }
    }
    None
}

/// Decodes the common named entities and numeric character references.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let semi = rest[..rest.len().min(12)].find(';');
        let decoded = semi.and_then(|end| {
            let name = &rest[1..end];
            let c = match name {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some(' '),
                _ if name.starts_with("#x") || name.starts_with("#X") => {
                    u32::from_str_radix(&name[2..], 16).ok().and_then(char::from_u32)
                }
                _ if name.starts_with('#') => name[1..].parse().ok().and_then(char::from_u32),
                _ => None,
            };
            c.map(|c| (c, end + 1))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Removes markup, replacing each tag with a space and decoding entities.
pub fn strip_tags(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    for event in Scanner::new(html) {
        match event {
            Event::Text(t) => out.push_str(t),
            _ => out.push(' '),
        }
    }
    decode_entities(&out)
}

// ---------------------------------------------------------------------------
// URLs
// ---------------------------------------------------------------------------

fn is_unreserved(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~')
}

fn decode_unreserved(s: &str) -> String {
    let b = s.as_bytes();
    let mut out = Vec::with_capacity(b.len());
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'%' && i + 2 < b.len() {
            let hex = std::str::from_utf8(&b[i + 1..i + 3]).ok();
            if let Some(v) = hex.and_then(|h| u8::from_str_radix(h, 16).ok()) {
                if is_unreserved(v) {
                    out.push(v);
                    i += 3;
                    continue;
                }
            }
        }
        out.push(b[i]);
        i += 1;
    }
    String::from_utf8(out).expect("only ASCII bytes are substituted")
}

/// Canonical form of an http(s) URL, or `None` when `raw` is not one.
///
/// Scheme and host are lowercased, default ports and fragments removed,
/// percent-encoded unreserved characters decoded, and relative references
/// resolved against `base`.
pub fn normalize_url(raw: &str, base: Option<&Url>) -> Option<String> {
    let raw = raw.trim();
    let mut url = match base {
        Some(b) => b.join(raw).ok()?,
        None => Url::parse(raw).ok()?,
    };
    if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none_or(str::is_empty) {
        return None;
    }
    url.set_fragment(None);
    Some(decode_unreserved(url.as_str()))
}

fn parse_base(url: &str) -> Option<Url> {
    normalize_url(url, None).and_then(|u| Url::parse(&u).ok())
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorPair {
    pub target_url: String,
    pub anchor_text: String,
    pub source_doc_id: String,
    pub ordinal: usize,
}

fn finish_text(raw: &str, max_tokens: usize) -> String {
    let decoded = decode_entities(raw);
    let words: Vec<&str> = decoded.split_whitespace().take(max_tokens).collect();
    words.join(" ")
}

/// Anchors of one document in document order. Anchor text is whitespace
/// collapsed and truncated to `max_tokens` words.
pub fn extract_anchors_capped(doc: &Document, max_tokens: usize) -> Vec<AnchorPair> {
    let base = parse_base(&doc.url);
    let mut pairs = Vec::new();
    let mut open: Option<(Option<&str>, String)> = None;

    let close = |anchor: Option<(Option<&str>, String)>, pairs: &mut Vec<AnchorPair>| {
        let Some((Some(href), text)) = anchor else { return };
        let href = decode_entities(href);
        if let Some(target_url) = normalize_url(&href, base.as_ref()) {
            pairs.push(AnchorPair {
                target_url,
                anchor_text: finish_text(&text, max_tokens),
                source_doc_id: doc.doc_id.clone(),
                ordinal: pairs.len(),
            });
        }
    };

    for event in Scanner::new(&doc.text) {
        match event {
            Event::Start { name, attrs } if name.eq_ignore_ascii_case("a") => {
                // an unclosed anchor ends where the next one opens
                close(open.take(), &mut pairs);
                open = Some((attribute(attrs, "href"), String::new()));
            }
            Event::End { name } if name.eq_ignore_ascii_case("a") => close(open.take(), &mut pairs),
            Event::Text(t) => {
                if let Some((_, text)) = open.as_mut() {
                    text.push_str(t);
                }
            }
            Event::Start { .. } | Event::End { .. } => {
                if let Some((_, text)) = open.as_mut() {
                    text.push(' ');
                }
            }
        }
    }
    close(open.take(), &mut pairs);
    pairs
}

pub fn extract_anchors(doc: &Document) -> Vec<AnchorPair> {
    extract_anchors_capped(doc, DEFAULT_MAX_ANCHOR_TOKENS)
}

// ---------------------------------------------------------------------------
// Anchor corpus job
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorDocument {
    pub doc_id: String,
    /// URL of the target document, as it appears in the source corpus.
    pub url: String,
    pub text: String,
}

impl From<AnchorDocument> for Document {
    fn from(a: AnchorDocument) -> Document {
        Document::new(a.doc_id, a.url, a.text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorCorpus {
    /// Sorted by doc_id.
    pub documents: Vec<AnchorDocument>,
    pub corpus_docs: usize,
    pub coverage: f64,
}

struct Target {
    doc_id: String,
    url: String,
}

/// Normalized URL → document, for every document that can be a link target.
fn url_table(shards: &[CorpusShard]) -> Result<HashMap<String, Target>> {
    let mut table: HashMap<String, Target> = HashMap::new();
    for doc in shards.iter().flat_map(|s| &s.records) {
        if doc.url.is_empty() {
            continue;
        }
        let Some(key) = normalize_url(&doc.url, None) else { continue };
        if let Some(prev) = table.get(&key) {
            if prev.doc_id != doc.doc_id {
                return Err(Error::Integrity(format!("URL {key} maps to both {} and {}", prev.doc_id, doc.doc_id)));
            }
        }
        table.insert(key, Target { doc_id: doc.doc_id.clone(), url: doc.url.clone() });
    }
    Ok(table)
}

#[derive(Debug)]
struct AnchorValue {
    source: Arc<str>,
    ordinal: usize,
    text: String,
}

struct AnchorJob {
    targets: HashMap<String, Target>,
    max_tokens: usize,
}

impl Job for AnchorJob {
    type Key = String;
    type Value = AnchorValue;
    type Output = AnchorDocument;

    fn map(&self, doc: &Document, out: &mut Emitter<'_, Self>) -> Result<(), JobFailure> {
        let own_url = normalize_url(&doc.url, None);
        let source: Arc<str> = doc.doc_id.as_str().into();
        for pair in extract_anchors_capped(doc, self.max_tokens) {
            if pair.anchor_text.is_empty()
                || own_url.as_deref() == Some(pair.target_url.as_str())
                || !self.targets.contains_key(&pair.target_url)
            {
                continue;
            }
            out.emit(
                pair.target_url,
                AnchorValue { source: source.clone(), ordinal: pair.ordinal, text: pair.anchor_text },
            );
        }
        Ok(())
    }

    fn value_order(&self, a: &AnchorValue, b: &AnchorValue) -> Ordering {
        a.source.cmp(&b.source).then(a.ordinal.cmp(&b.ordinal))
    }

    fn reduce(&self, key: &String, values: Vec<AnchorValue>, out: &mut Vec<AnchorDocument>) -> Result<(), JobFailure> {
        let target = self.targets.get(key).ok_or("target vanished from URL table")?;
        let texts: Vec<&str> = values.iter().map(|v| v.text.as_str()).collect();
        out.push(AnchorDocument { doc_id: target.doc_id.clone(), url: target.url.clone(), text: texts.join(" ") });
        Ok(())
    }
}

/// Builds the anchor-text representation of the corpus.
pub fn build_anchor_corpus(shards: &[CorpusShard], max_tokens: usize, opts: &EngineOptions) -> Result<AnchorCorpus> {
    let job = AnchorJob { targets: url_table(shards)?, max_tokens };
    let mut documents = run_job(&job, shards, opts)?.records;
    documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let corpus_docs: usize = shards.iter().map(|s| s.records.len()).sum();
    let coverage = if corpus_docs == 0 { 0.0 } else { documents.len() as f64 / corpus_docs as f64 };
    Ok(AnchorCorpus { documents, corpus_docs, coverage })
}
