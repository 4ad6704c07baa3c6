//! TREC run files, qrels and binary-relevance effectiveness measures.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::search::RankedList;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub query_id: String,
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub run_tag: String,
    pub rows: Vec<RunRow>,
}

fn check_run_tag(tag: &str) -> Result<()> {
    if tag.is_empty() || tag.chars().any(char::is_whitespace) {
        return Err(Error::Config(format!("run tag must be a non-empty token, got {tag:?}")));
    }
    Ok(())
}

impl RunFile {
    /// Rows for every query in ascending query_id order, ranks from 1.
    pub fn from_results(results: &BTreeMap<String, RankedList>, run_tag: &str) -> Result<RunFile> {
        check_run_tag(run_tag)?;
        let mut rows = Vec::new();
        for (qid, list) in results {
            for (i, e) in list.entries().iter().enumerate() {
                rows.push(RunRow { query_id: qid.clone(), doc_id: e.doc_id.to_string(), rank: i + 1, score: e.score });
            }
        }
        Ok(RunFile { run_tag: run_tag.to_string(), rows })
    }

    /// `query_id Q0 doc_id rank score run_tag`, scores to six decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 48);
        for r in &self.rows {
            writeln!(out, "{} Q0 {} {} {:.6} {}", r.query_id, r.doc_id, r.rank, r.score, self.run_tag)
                .expect("writing to a String cannot fail");
        }
        out
    }

    /// Parses and validates a run: six columns per line, one run tag, ranks
    /// 1..n in order per query and scores non-increasing with rank.
    pub fn parse(text: &str, source: &str) -> Result<RunFile> {
        let mut rows = Vec::new();
        let mut tag: Option<String> = None;
        let mut last: HashMap<String, (usize, f64)> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 6 {
                return Err(Error::parse(source, line_no, format!("expected 6 columns, found {}", cols.len())));
            }
            let rank: usize =
                cols[3].parse().map_err(|_| Error::parse(source, line_no, format!("invalid rank {:?}", cols[3])))?;
            let score: f64 = cols[4]
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| Error::parse(source, line_no, format!("invalid score {:?}", cols[4])))?;
            match &tag {
                None => tag = Some(cols[5].to_string()),
                Some(t) if t != cols[5] => {
                    return Err(Error::parse(source, line_no, format!("run tag {:?} differs from {t:?}", cols[5])))
                }
                Some(_) => {}
            }
            let (prev_rank, prev_score) = last.get(cols[0]).copied().unwrap_or((0, f64::INFINITY));
            if rank != prev_rank + 1 {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("query {} rank {rank} follows rank {prev_rank}", cols[0]),
                ));
            }
            if score > prev_score {
                return Err(Error::parse(source, line_no, format!("query {} score increases at rank {rank}", cols[0])));
            }
            last.insert(cols[0].to_string(), (rank, score));
            rows.push(RunRow { query_id: cols[0].to_string(), doc_id: cols[2].to_string(), rank, score });
        }
        Ok(RunFile { run_tag: tag.unwrap_or_default(), rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<RunFile> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunFile::parse(&text, &path.display().to_string())
    }

    /// Ranked doc_ids per query.
    pub fn rankings(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(&r.query_id).or_default().push(&r.doc_id);
        }
        out
    }
}

/// Serializes search results as TREC run text.
pub fn write_run(results: &BTreeMap<String, RankedList>, run_tag: &str) -> Result<String> {
    Ok(RunFile::from_results(results, run_tag)?.to_text())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    pub judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    /// Parses `query_id 0 doc_id grade` lines.
    pub fn parse(text: &str, source: &str) -> Result<Qrels> {
        let mut judgments: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(Error::parse(source, line_no, format!("expected 4 columns, found {}", cols.len())));
            }
            let grade: u32 =
                cols[3].parse().map_err(|_| Error::parse(source, line_no, format!("invalid grade {:?}", cols[3])))?;
            let per_query = judgments.entry(cols[0].to_string()).or_default();
            if per_query.insert(cols[2].to_string(), grade).is_some() {
                return Err(Error::Integrity(format!(
                    "{source}:{line_no}: duplicate judgment for ({}, {})",
                    cols[0], cols[2]
                )));
            }
        }
        Ok(Qrels { judgments })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Qrels> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Qrels::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (q, docs) in &self.judgments {
            for (d, g) in docs {
                writeln!(out, "{q} 0 {d} {g}").expect("writing to a String cannot fail");
            }
        }
        out
    }

    fn relevant(&self, query_id: &str) -> HashSet<&str> {
        self.judgments
            .get(query_id)
            .map(|docs| docs.iter().filter(|(_, &g)| g >= 1).map(|(d, _)| d.as_str()).collect())
            .unwrap_or_default()
    }
}

/// Per-query values and their mean over judged queries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Measure {
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
    pub warnings: Vec<String>,
}

fn unjudged_warnings(run: &RunFile, qrels: &Qrels) -> Vec<String> {
    run.rankings()
        .keys()
        .filter(|q| !qrels.judgments.contains_key(**q))
        .map(|q| format!("query {q} is in the run but has no judgments; excluded from the mean"))
        .collect()
}

fn mean_over_judged(qrels: &Qrels, mut value: impl FnMut(&str) -> f64) -> (BTreeMap<String, f64>, f64) {
    let per_query: BTreeMap<String, f64> = qrels.judgments.keys().map(|q| (q.clone(), value(q))).collect();
    let mean = if per_query.is_empty() { 0.0 } else { per_query.values().sum::<f64>() / per_query.len() as f64 };
    (per_query, mean)
}

/// Fraction of the top `k` that is relevant (grade >= 1). Missing ranks and
/// unjudged documents count as non-relevant.
pub fn precision_at_k(run: &RunFile, qrels: &Qrels, k: usize) -> Result<Measure> {
    if k == 0 {
        return Err(Error::Config("precision cutoff must be at least 1".into()));
    }
    let rankings = run.rankings();
    let (per_query, mean) = mean_over_judged(qrels, |q| {
        let relevant = qrels.relevant(q);
        let hits = rankings.get(q).map_or(0, |docs| docs.iter().take(k).filter(|d| relevant.contains(**d)).count());
        hits as f64 / k as f64
    });
    Ok(Measure { per_query, mean, warnings: unjudged_warnings(run, qrels) })
}

/// Mean over judged queries of average precision within the first `cutoff`
/// ranks. Queries without relevant documents score 0 with a warning.
pub fn mean_average_precision(run: &RunFile, qrels: &Qrels, cutoff: usize) -> Measure {
    let rankings = run.rankings();
    let mut warnings = unjudged_warnings(run, qrels);
    let (per_query, mean) = mean_over_judged(qrels, |q| {
        let relevant = qrels.relevant(q);
        if relevant.is_empty() {
            warnings.push(format!("query {q} has no relevant documents; AP = 0"));
            return 0.0;
        }
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (i, d) in rankings.get(q).into_iter().flatten().take(cutoff).enumerate() {
            if relevant.contains(d) {
                hits += 1;
                sum += hits as f64 / (i + 1) as f64;
            }
        }
        sum / relevant.len() as f64
    });
    Measure { per_query, mean, warnings }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub p5: Measure,
    pub p10: Measure,
    pub p20: Measure,
    pub map: Measure,
}

impl EvalReport {
    pub fn warnings(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        [&self.p5, &self.map]
            .into_iter()
            .flat_map(|m| &m.warnings)
            .map(String::as_str)
            .filter(|w| seen.insert(*w))
            .collect()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<16} {:>8} {:>8} {:>8} {:>8}", "query", "P@5", "P@10", "P@20", "MAP").unwrap();
        for q in self.map.per_query.keys() {
            writeln!(
                out,
                "{:<16} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                q, self.p5.per_query[q], self.p10.per_query[q], self.p20.per_query[q], self.map.per_query[q]
            )
            .unwrap();
        }
        writeln!(
            out,
            "{:<16} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            "all", self.p5.mean, self.p10.mean, self.p20.mean, self.map.mean
        )
        .unwrap();
        out
    }
}

pub fn evaluate(run: &RunFile, qrels: &Qrels, cutoff: usize) -> Result<EvalReport> {
    Ok(EvalReport {
        p5: precision_at_k(run, qrels, 5)?,
        p10: precision_at_k(run, qrels, 10)?,
        p20: precision_at_k(run, qrels, 20)?,
        map: mean_average_precision(run, qrels, cutoff),
    })
}
