//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Instant;

use mirex::baseline::{build_index, load_index, save_index, IndexSearcher};
use mirex::bench::{mean_per_size, run_bench, BenchConfig, System};
use mirex::corpus::{
    generate_queries, generate_synthetic, read_corpus, read_documents, read_queries, shard_documents, unshard,
    write_corpus, write_queries,
};
use mirex::eval::{evaluate, mean_average_precision, precision_at_k, Qrels, RunFile};
use mirex::search::SearchJob;
use mirex::stats::{load_stats, save_stats};
use mirex::{
    build_anchor_corpus, compute_stats, sequential_search, verify_combiner, write_run, CollectionStats, Document,
    EngineOptions, Error, Query, RankedList, ScoredDoc, ScoringParams, SearchConfig, TextOptions,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    }};
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

fn oracle_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(|t| t.to_lowercase()).collect()
}

struct OracleStats {
    total: f64,
    cf: HashMap<String, f64>,
}

fn oracle_stats(docs: &[Document]) -> OracleStats {
    let mut cf = HashMap::new();
    let mut total = 0.0;
    for d in docs {
        for t in oracle_tokens(&d.text) {
            *cf.entry(t).or_insert(0.0) += 1.0;
            total += 1.0;
        }
    }
    OracleStats { total, cf }
}

/// All-pairs scoring straight from the formula, then a full sort.
fn oracle_rank(docs: &[Document], query: &str, st: &OracleStats, lambda: f64, k: usize) -> Vec<(String, f64)> {
    let mut qterms: BTreeMap<String, f64> = BTreeMap::new();
    for t in oracle_tokens(query) {
        *qterms.entry(t).or_insert(0.0) += 1.0;
    }
    let mut scored = Vec::new();
    for d in docs {
        let toks = oracle_tokens(&d.text);
        let len = toks.len() as f64;
        let mut sum = 0.0;
        let mut matched = false;
        for (t, m) in &qterms {
            let tf = toks.iter().filter(|x| *x == t).count() as f64;
            let cf = st.cf.get(t).copied().unwrap_or(0.0);
            if tf > 0.0 && cf > 0.0 {
                matched = true;
                sum += m * (1.0 + (lambda * tf * st.total) / ((1.0 - lambda) * cf * len)).ln();
            }
        }
        if matched {
            scored.push((d.doc_id.clone(), len.ln() + sum));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

fn same_ranking(label: &str, got: &[ScoredDoc], want: &[(String, f64)]) -> Result<(), String> {
    ensure!(got.len() == want.len(), "{label}: {} results, expected {}", got.len(), want.len());
    for (i, (g, (id, s))) in got.iter().zip(want).enumerate() {
        ensure!(&*g.doc_id == id, "{label}: rank {} is {}, expected {id}", i + 1, g.doc_id);
        ensure!((g.score - s).abs() <= 1e-9 * s.abs(), "{label}: {id} scored {} vs {s}", g.score);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn oracle_equivalence() -> Outcome {
    let mut compared = 0usize;
    for seed in 0..20u64 {
        let n = 100 + seed as usize * 100;
        let vocab = 300 + 40 * seed as usize;
        let docs = generate_synthetic(n, vocab, seed).map_err(err)?;
        let queries = generate_queries(25, vocab, 1000 + seed).map_err(err)?;
        let topk = if seed % 2 == 0 { 1000 } else { 10 };
        let config = SearchConfig { topk, ..SearchConfig::default() };
        let shards = shard_documents(docs.clone(), 1 + seed as usize % 5).map_err(err)?;
        let stats = compute_stats(&shards, TextOptions::default(), &EngineOptions::new(3)).map_err(err)?;
        let ost = oracle_stats(&docs);
        ensure!(stats.total_tokens as f64 == ost.total, "seed {seed}: |C| mismatch");

        let scan = sequential_search(&shards, &queries, &stats, &config, &EngineOptions::new(4)).map_err(err)?;
        ensure!(scan.tokenize_calls == n, "seed {seed}: {} tokenizations for {n} docs", scan.tokenize_calls);
        let index = build_index(&shards, TextOptions::default()).map_err(err)?;
        let mut searcher = IndexSearcher::new(&index);
        for q in &queries {
            let want = oracle_rank(&docs, &q.text, &ost, 0.85, topk);
            let label = format!("seed {seed} {}", q.query_id);
            same_ranking(&format!("{label} scan"), scan.results[&q.query_id].entries(), &want)?;
            let via_index = searcher.search(q, ScoringParams::default(), topk).map_err(err)?;
            same_ranking(&format!("{label} index"), via_index.entries(), &want)?;
            compared += want.len();
        }
    }
    Ok(format!("20 corpora x 25 queries, {compared} ranked entries matched"))
}

fn determinism_fixture() -> Result<(Vec<Document>, Vec<Query>, CollectionStats), String> {
    let docs = generate_synthetic(1500, 800, 42).map_err(err)?;
    let queries = generate_queries(40, 800, 42).map_err(err)?;
    let stats =
        compute_stats(&shard_documents(docs.clone(), 1).map_err(err)?, TextOptions::default(), &EngineOptions::new(1))
            .map_err(err)?;
    Ok((docs, queries, stats))
}

fn engine_determinism() -> Outcome {
    let (docs, queries, stats) = determinism_fixture()?;
    let config = SearchConfig { topk: 100, ..SearchConfig::default() };
    let mut reference: Option<String> = None;
    let mut runs = 0;
    for workers in [1, 2, 4, 8] {
        for shard_count in [1, 3, 16] {
            let shards = shard_documents(docs.clone(), shard_count).map_err(err)?;
            let opts = EngineOptions {
                claim_order_seed: Some(workers as u64 * 31 + shard_count as u64),
                ..EngineOptions::new(workers)
            };
            let out = sequential_search(&shards, &queries, &stats, &config, &opts).map_err(err)?;
            let text = write_run(&out.results, "det").map_err(err)?;
            runs += 1;
            match &reference {
                None => reference = Some(text),
                Some(r) => ensure!(*r == text, "run differs at workers={workers} shards={shard_count}"),
            }
        }
    }
    let bytes = reference.map_or(0, |r| r.len());
    Ok(format!("{runs} configurations, identical {bytes}-byte run files"))
}

fn combiner_and_shuffle_bound() -> Outcome {
    let (workers, k) = (4usize, 10usize);
    let docs = generate_synthetic(5000, 2000, 7).map_err(err)?;
    let queries = generate_queries(50, 2000, 7).map_err(err)?;
    let shards = shard_documents(docs, 16).map_err(err)?;
    let stats = compute_stats(&shards, TextOptions::default(), &EngineOptions::new(workers)).map_err(err)?;
    let config = SearchConfig { topk: k, ..SearchConfig::default() };
    let on = EngineOptions::new(workers);
    let off = EngineOptions { combine: false, ..on.clone() };
    let a = sequential_search(&shards, &queries, &stats, &config, &on).map_err(err)?;
    let b = sequential_search(&shards, &queries, &stats, &config, &off).map_err(err)?;
    ensure!(
        write_run(&a.results, "c").map_err(err)? == write_run(&b.results, "c").map_err(err)?,
        "combiner on/off run files differ"
    );
    let job = SearchJob::new(&queries, &stats, &config).map_err(err)?;
    ensure!(verify_combiner(&job, &shards, &on).map_err(err)?, "verify_combiner reported a mismatch");

    let bound = (workers * k) as u64;
    let max = a.shuffle.max_per_key();
    ensure!(max <= bound, "max per-query records after combine {max} > {bound}");
    ensure!(a.shuffle.records_after_combine <= a.shuffle.records_emitted_by_maps, "combine increased the record count");
    // without a combiner every emitted record is shipped
    ensure!(
        b.shuffle.records_after_combine == b.shuffle.records_emitted_by_maps,
        "combiner-off run shipped {} of {} records",
        b.shuffle.records_after_combine,
        b.shuffle.records_emitted_by_maps
    );
    let max_off = b.shuffle.max_per_key();
    Ok(format!(
        "outputs identical; max per-query after combine {max} <= {bound} (without combiner {max_off}); shuffle {} -> {}",
        a.shuffle.records_emitted_by_maps, a.shuffle.records_after_combine
    ))
}

struct BenchResult {
    ratio_scan: f64,
    ratio_vs_baseline: f64,
    detail: String,
}

fn run_scaling_bench() -> Result<BenchResult, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let corpus = dir.path().join("bench.tsv");
    let (docs, vocab) = (50_000usize, 20_000usize);
    write_corpus(&generate_synthetic(docs, vocab, 2009).map_err(err)?, &corpus).map_err(err)?;
    let pool = generate_queries(2000, vocab, 2009).map_err(err)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let engine = EngineOptions::new(workers);
    let stats = compute_stats(&read_corpus(&corpus, 4 * workers).map_err(err)?, TextOptions::default(), &engine)
        .map_err(err)?;
    let cfg = BenchConfig { engine, shard_count: 4 * workers, seed: 2009, ..BenchConfig::new(vec![10, 100, 1000]) };
    let points = run_bench(&corpus, &pool, &stats, &cfg).map_err(err)?;
    let means = mean_per_size(&points);
    let per_query = |sys, n| means[&(sys, n)].1;
    let wall = |sys, n| means[&(sys, n)].0;
    let ratio_scan = per_query(System::Scan, 1000) / per_query(System::Scan, 10);
    let ratio_vs_baseline = wall(System::Scan, 1000) / wall(System::Baseline, 1000);
    let detail = format!(
        "{docs} docs, {workers} worker(s); scan s/query at 10/100/1000 = {:.4}/{:.4}/{:.4}; baseline s/query at 1000 = {:.6}",
        per_query(System::Scan, 10),
        per_query(System::Scan, 100),
        per_query(System::Scan, 1000),
        per_query(System::Baseline, 1000)
    );
    Ok(BenchResult { ratio_scan, ratio_vs_baseline, detail })
}

fn amortization(bench: &Result<BenchResult, String>) -> Outcome {
    let b = bench.as_ref().map_err(Clone::clone)?;
    ensure!(b.ratio_scan <= 0.5, "per-query ratio 1000 vs 10 queries is {:.3} (> 0.5); {}", b.ratio_scan, b.detail);
    Ok(format!("per-query ratio 1000 vs 10 queries = {:.4}; {}", b.ratio_scan, b.detail))
}

fn baseline_standing(bench: &Result<BenchResult, String>) -> Outcome {
    let b = bench.as_ref().map_err(Clone::clone)?;
    ensure!(
        b.ratio_vs_baseline <= 20.0,
        "scan total is {:.1}x the baseline query loop at 1000 queries (> 20x)",
        b.ratio_vs_baseline
    );
    Ok(format!("scan total / baseline loop at 1000 queries = {:.2}x", b.ratio_vs_baseline))
}

/// Regex extraction plus hand normalization, single-threaded, for the link
/// forms the synthetic generator writes.
fn oracle_anchor_corpus(docs: &[Document]) -> (BTreeMap<String, String>, f64) {
    let anchor = regex::Regex::new(r#"(?is)<a\s[^>]*?href\s*=\s*"([^"]*)"[^>]*>(.*?)</a\s*>"#).unwrap();
    let norm = |href: &str, base: &str| -> Option<String> {
        let href = href.split('#').next().unwrap();
        let abs = if href.starts_with('/') {
            let rest = base.strip_prefix("http://")?;
            format!("http://{}{href}", &rest[..rest.find('/')?])
        } else {
            href.to_string()
        };
        let (scheme, rest) = abs.split_once("://")?;
        let (host, path) = rest.split_at(rest.find('/').unwrap_or(rest.len()));
        let path = if path.is_empty() { "/" } else { path };
        Some(format!("{}://{}{path}", scheme.to_lowercase(), host.to_lowercase()))
    };
    let by_url: HashMap<String, &Document> =
        docs.iter().filter(|d| !d.url.is_empty()).map(|d| (norm(&d.url, "").unwrap(), d)).collect();
    let mut texts: BTreeMap<String, Vec<(String, usize, String)>> = BTreeMap::new();
    for d in docs {
        for (ordinal, cap) in anchor.captures_iter(&d.text).enumerate() {
            let Some(url) = norm(&cap[1], &d.url) else { continue };
            let Some(target) = by_url.get(&url) else { continue };
            let text = cap[2].split_whitespace().collect::<Vec<_>>().join(" ");
            if target.doc_id == d.doc_id || text.is_empty() {
                continue;
            }
            texts.entry(target.doc_id.clone()).or_default().push((d.doc_id.clone(), ordinal, text));
        }
    }
    let corpus: BTreeMap<String, String> = texts
        .into_iter()
        .map(|(id, mut v)| {
            v.sort();
            (id, v.into_iter().map(|(_, _, t)| t).collect::<Vec<_>>().join(" "))
        })
        .collect();
    let coverage = corpus.len() as f64 / docs.len() as f64;
    (corpus, coverage)
}

fn anchor_pipeline() -> Outcome {
    let docs = generate_synthetic(3000, 1500, 11).map_err(err)?;
    let (want, want_cov) = oracle_anchor_corpus(&docs);
    let shards = shard_documents(docs.clone(), 7).map_err(err)?;
    let ac = build_anchor_corpus(&shards, 512, &EngineOptions::new(4)).map_err(err)?;
    let got: BTreeMap<String, String> = ac.documents.iter().map(|d| (d.doc_id.clone(), d.text.clone())).collect();
    ensure!(got.len() == ac.documents.len(), "duplicate doc_id in anchor corpus");
    for (id, text) in &want {
        match got.get(id) {
            None => return Err(format!("anchor document {id} missing")),
            Some(t) => ensure!(t == text, "anchor text of {id} differs: {t:?} vs {text:?}"),
        }
    }
    ensure!(got.len() == want.len(), "{} anchor documents, oracle has {}", got.len(), want.len());
    ensure!(ac.coverage == want_cov, "coverage {} vs oracle {want_cov}", ac.coverage);
    let urls: HashMap<&str, &str> = docs.iter().map(|d| (d.doc_id.as_str(), d.url.as_str())).collect();
    for d in &ac.documents {
        ensure!(urls.get(d.doc_id.as_str()) == Some(&d.url.as_str()), "anchor document {} has the wrong URL", d.doc_id);
    }

    let dir = tempfile::tempdir().map_err(err)?;
    let path = dir.path().join("anchors.tsv");
    let as_docs: Vec<Document> = ac.documents.iter().cloned().map(Document::from).collect();
    write_corpus(&as_docs, &path).map_err(err)?;
    ensure!(read_documents(&path).map_err(err)? == as_docs, "anchor corpus does not round-trip");
    ensure!(ac.documents.windows(2).all(|w| w[0].doc_id < w[1].doc_id), "anchor corpus not sorted by doc_id");
    Ok(format!("{} anchor documents match the oracle; coverage {:.4}", want.len(), want_cov))
}

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn evaluation() -> Outcome {
    // hand cases
    let run =
        RunFile::parse("q1 Q0 r1 1 5 t\nq1 Q0 n1 2 4 t\nq1 Q0 r2 3 3 t\nq1 Q0 n2 4 2 t\nq1 Q0 n3 5 1 t\n", "hand")
            .map_err(err)?;
    let qrels = Qrels::parse("q1 0 r1 1\nq1 0 r2 1\nq1 0 n1 0\n", "hand").map_err(err)?;
    let p5 = precision_at_k(&run, &qrels, 5).map_err(err)?.mean;
    ensure!(p5 == 0.4, "hand P@5 = {p5}");
    let ap = mean_average_precision(&run, &qrels, 1000).mean;
    ensure!(ap == (1.0 + 2.0 / 3.0) / 2.0 && (ap - 0.8333).abs() < 5e-5, "hand AP = {ap}");

    let run = RunFile::parse(&fixture("eval_run.txt"), "eval_run.txt").map_err(err)?;
    let qrels = Qrels::parse(&fixture("eval_qrels.txt"), "eval_qrels.txt").map_err(err)?;
    ensure!(run.rankings().len() == 50, "fixture has {} queries", run.rankings().len());
    let report = evaluate(&run, &qrels, 1000).map_err(err)?;
    let mut checked = 0;
    for line in fixture("eval_expected.txt").lines() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let (got, want) = match cols.as_slice() {
            ["P@5", v] => (report.p5.mean, v),
            ["P@10", v] => (report.p10.mean, v),
            ["P@20", v] => (report.p20.mean, v),
            ["MAP", v] => (report.map.mean, v),
            ["AP", q, v] => (report.map.per_query.get(*q).copied().unwrap_or(f64::NAN), v),
            _ => return Err(format!("bad expected line {line:?}")),
        };
        let want: f64 = want.parse().map_err(err)?;
        ensure!((got - want).abs() <= 1e-6, "{line}: got {got}");
        checked += 1;
    }
    ensure!(!report.warnings().is_empty(), "unjudged and all-nonrelevant queries produced no warning");
    Ok(format!("hand cases exact; {checked} fixture values within 1e-6"))
}

fn expect_err(
    label: &str,
    r: mirex::Result<impl std::fmt::Debug>,
    class: impl Fn(&Error) -> bool,
) -> Result<(), String> {
    match r {
        Err(e) if class(&e) => Ok(()),
        Err(e) => Err(format!("{label}: wrong error class: {e}")),
        Ok(v) => Err(format!("{label}: accepted malformed input: {v:?}")),
    }
}

fn format_conformance() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let p = |name: &str| dir.path().join(name);
    let parse = |e: &Error| matches!(e, Error::Parse { .. });
    let integrity = |e: &Error| matches!(e, Error::Integrity(_));
    let format = |e: &Error| matches!(e, Error::Format(_));

    // corpus, plain and gzip, with awkward characters
    let mut docs = generate_synthetic(200, 300, 5).map_err(err)?;
    docs.push(Document::new("odd\\id/é", "http://x.org/a\tb\\c", "line1\nline2\r\tend \\ caf\u{e9} \u{1F600}"));
    docs.push(Document::new("empty", "", ""));
    for name in ["c.tsv", "c.tsv.gz"] {
        write_corpus(&docs, p(name)).map_err(err)?;
        ensure!(read_documents(p(name)).map_err(err)? == docs, "{name} does not round-trip");
        let shards = read_corpus(p(name), 3).map_err(err)?;
        ensure!(unshard(&shards).len() == docs.len(), "{name}: shards lose documents");
    }
    let queries = vec![Query::new("q-1", "a\\b\tc"), Query::new("q2", "zz")];
    write_queries(&queries, p("q.tsv")).map_err(err)?;
    ensure!(read_queries(p("q.tsv")).map_err(err)? == queries, "queries do not round-trip");

    // stats and index
    let shards = shard_documents(docs.clone(), 2).map_err(err)?;
    let stats = compute_stats(&shards, TextOptions::default(), &EngineOptions::new(2)).map_err(err)?;
    save_stats(&stats, p("s.tsv")).map_err(err)?;
    ensure!(load_stats(p("s.tsv")).map_err(err)? == stats, "stats do not round-trip");
    let index = build_index(&shards, TextOptions::default()).map_err(err)?;
    save_index(&index, p("i.tsv")).map_err(err)?;
    let loaded = load_index(p("i.tsv")).map_err(err)?;
    ensure!(loaded.docs() == index.docs() && loaded.stats() == index.stats(), "index does not round-trip");

    // run files, including ties and tiny scores
    let out = sequential_search(
        &shards,
        &generate_queries(30, 300, 5).map_err(err)?,
        &stats,
        &SearchConfig::default(),
        &EngineOptions::new(2),
    )
    .map_err(err)?;
    let mut results = out.results;
    let mut tied = RankedList::new(5);
    for (d, s) in [("b", 1.0), ("a", 1.0), ("c", 1e-7), ("d", 123456.5)] {
        tied.ranked_insert(ScoredDoc::new(d, s)).map_err(err)?;
    }
    results.insert("tie".into(), tied);
    let text = write_run(&results, "fmt").map_err(err)?;
    let parsed = RunFile::parse(&text, "run").map_err(err)?;
    ensure!(parsed.to_text() == text, "run file does not re-serialize identically");
    let rows: usize = results.values().map(RankedList::len).sum();
    ensure!(parsed.rows.len() == rows, "run file has {} rows, expected {rows}", parsed.rows.len());
    for (q, list) in &results {
        let ranked = parsed.rankings().get(q.as_str()).cloned().unwrap_or_default();
        let ids: Vec<&str> = list.entries().iter().map(|e| &*e.doc_id).collect();
        ensure!(ranked == ids, "query {q} ranking changed in the run file");
    }
    expect_err("empty run tag", write_run(&results, ""), |e| matches!(e, Error::Config(_)))?;

    // malformed inputs
    let write = |name: &str, body: &str| std::fs::write(p(name), body).map_err(err);
    write("bad_fields.tsv", "d1\thttp://a\ttext\nd2\tonly-two\n")?;
    expect_err("corpus field count", read_documents(p("bad_fields.tsv")), parse)?;
    match read_documents(p("bad_fields.tsv")) {
        Err(Error::Parse { line, .. }) => ensure!(line == 2, "parse error names line {line}, expected 2"),
        _ => unreachable!(),
    }
    write("bad_escape.tsv", "d1\t\tbad \\q escape\n")?;
    expect_err("corpus escape", read_documents(p("bad_escape.tsv")), parse)?;
    write("dup.tsv", "d1\t\ta\nd1\t\tb\n")?;
    expect_err("duplicate doc_id", read_documents(p("dup.tsv")), integrity)?;
    write("stats_bad.tsv", "mirex-stats\tv9\t1\t1\n")?;
    expect_err("stats version", load_stats(p("stats_bad.tsv")), format)?;
    let stats_text = std::fs::read_to_string(p("s.tsv")).map_err(err)?;
    write("stats_cut.tsv", &stats_text[..stats_text.len() / 2])?;
    expect_err("truncated stats", load_stats(p("stats_cut.tsv")), |e| format(e) || parse(e))?;
    write("index_bad.tsv", "not an index\n")?;
    expect_err("index header", load_index(p("index_bad.tsv")), format)?;
    for (label, body) in [
        ("run columns", "q1 Q0 d1 1 2.0\n"),
        ("run rank gap", "q1 Q0 d1 1 2.0 t\nq1 Q0 d2 3 1.0 t\n"),
        ("run score order", "q1 Q0 d1 1 1.0 t\nq1 Q0 d2 2 2.0 t\n"),
        ("run tag", "q1 Q0 d1 1 2.0 t\nq1 Q0 d2 2 1.0 u\n"),
        ("run score", "q1 Q0 d1 1 nan t\n"),
    ] {
        expect_err(label, RunFile::parse(body, "run"), parse)?;
    }
    expect_err("qrels columns", Qrels::parse("q1 0 d1\n", "qrels"), parse)?;
    expect_err("qrels grade", Qrels::parse("q1 0 d1 x\n", "qrels"), parse)?;
    expect_err("qrels duplicate", Qrels::parse("q1 0 d1 1\nq1 0 d1 0\n", "qrels"), integrity)?;
    Ok("corpus (plain, gzip), queries, stats, index and run files round-trip; malformed inputs rejected with the right error class".into())
}

fn timed(name: &'static str, f: fn() -> Outcome) -> (&'static str, Outcome, f64) {
    let t = Instant::now();
    let outcome = f();
    (name, outcome, t.elapsed().as_secs_f64())
}

fn main() {
    let started = Instant::now();
    let mut results = vec![
        timed("1 oracle equivalence", oracle_equivalence),
        timed("2 engine determinism", engine_determinism),
        timed("3 combiner soundness and shuffle bound", combiner_and_shuffle_bound),
    ];
    let t = Instant::now();
    let bench = run_scaling_bench();
    let bench_seconds = t.elapsed().as_secs_f64();
    results.push(("4 amortization trend", amortization(&bench), bench_seconds));
    results.push(("5 baseline relative standing", baseline_standing(&bench), 0.0));
    results.push(timed("6 anchor pipeline", anchor_pipeline));
    results.push(timed("7 evaluation correctness", evaluation));
    results.push(timed("8 format conformance", format_conformance));

    let limits = [120.0, 60.0, f64::INFINITY, 900.0, f64::INFINITY, 60.0, f64::INFINITY, f64::INFINITY];
    let mut failed = 0;
    println!();
    for ((name, outcome, secs), limit) in results.into_iter().zip(limits) {
        let outcome = outcome.and_then(|msg| {
            if secs > limit {
                Err(format!("took {secs:.1}s, limit {limit:.0}s ({msg})"))
            } else {
                Ok(msg)
            }
        });
        match outcome {
            Ok(msg) => println!("PASS  criterion {name} [{secs:.1}s]: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  criterion {name} [{secs:.1}s]: {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", 8 - failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
