//! Retrieval evaluation: qrels and run files, NDCG@K, the per-query
//! best-of-systems selector and token-budget sweeps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::compressor::{compress_corpus, CompressionConfig};
use crate::error::{Error, Result};
use crate::matrix::QueryEmbedding;
use crate::representation::NestedPageRep;
use crate::scorer::{run_queries, ScoredPage, Selector};

/// Graded judgments: query id -> page id -> relevance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelevanceJudgments {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl RelevanceJudgments {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one judgment; duplicate `(query, page)` keys are rejected.
    pub fn insert(&mut self, query: &str, page: &str, relevance: u32) -> Result<()> {
        let prev = self
            .judgments
            .entry(query.to_owned())
            .or_default()
            .insert(page.to_owned(), relevance);
        if prev.is_some() {
            return Err(Error::MalformedQrels(format!(
                "duplicate judgment ({query}, {page})"
            )));
        }
        Ok(())
    }

    pub fn get(&self, query: &str, page: &str) -> u32 {
        self.judgments
            .get(query)
            .and_then(|m| m.get(page))
            .copied()
            .unwrap_or(0)
    }

    pub fn for_query(&self, query: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    /// Highest-graded page for `query`, ties to the smallest page id.
    pub fn top_page(&self, query: &str) -> Option<&str> {
        let m = self.judgments.get(query)?;
        let top = *m.values().max()?;
        if top == 0 {
            return None;
        }
        m.iter().find(|(_, &r)| r == top).map(|(p, _)| p.as_str())
    }

    /// Parses `query_id<TAB>page_id<TAB>relevance` lines. Blank lines and
    /// `#` comments are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut q = Self::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let rel = match f.as_slice() {
                [_, _, r] => r.trim().parse::<u32>().ok(),
                _ => None,
            }
            .ok_or_else(|| Error::MalformedQrels(format!("line {}: {line:?}", n + 1)))?;
            q.insert(f[0], f[1], rel)?;
        }
        Ok(q)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (q, pages) in &self.judgments {
            for (p, r) in pages {
                let _ = writeln!(out, "{q}\t{p}\t{r}");
            }
        }
        out
    }
}

/// Ranked results per query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RetrievalRun {
    results: BTreeMap<String, Vec<ScoredPage>>,
}

impl RetrievalRun {
    pub fn insert(&mut self, query: &str, ranked: Vec<ScoredPage>) {
        self.results.insert(query.to_owned(), ranked);
    }

    pub fn get(&self, query: &str) -> Option<&[ScoredPage]> {
        self.results.get(query).map(Vec::as_slice)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.results.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    /// `query_id<TAB>page_id<TAB>rank<TAB>score` with six decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (q, ranked) in &self.results {
            for r in ranked {
                let _ = writeln!(out, "{q}\t{}\t{}\t{:.6}", r.page_id, r.rank, r.score);
            }
        }
        out
    }

    /// Parses run lines; each query's ranks must be exactly `1..=n`.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut results: BTreeMap<String, Vec<ScoredPage>> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::MalformedRun(format!("line {}: {line:?}", n + 1));
            let f: Vec<&str> = line.split('\t').collect();
            let [q, p, rank, score] = f.as_slice() else {
                return Err(bad());
            };
            let rank: usize = rank.trim().parse().map_err(|_| bad())?;
            let score: f64 = score.trim().parse().map_err(|_| bad())?;
            results
                .entry((*q).to_owned())
                .or_default()
                .push(ScoredPage {
                    page_id: (*p).to_owned(),
                    score,
                    rank,
                });
        }
        let run = Self { results };
        run.check_ranks()?;
        Ok(run)
    }

    fn check_ranks(&self) -> Result<()> {
        for (q, ranked) in &self.results {
            let mut ranks: Vec<usize> = ranked.iter().map(|r| r.rank).collect();
            ranks.sort_unstable();
            if ranks.iter().enumerate().any(|(i, &r)| r != i + 1) {
                return Err(Error::MalformedRun(format!(
                    "ranks for query {q} are not contiguous from 1"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdcgReport {
    pub k: usize,
    /// Every evaluated query (positive ideal DCG), including those missing
    /// from the run, which score 0.
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
    /// Queries excluded because their ideal DCG is zero.
    pub skipped: usize,
}

impl NdcgReport {
    pub fn evaluated(&self) -> usize {
        self.per_query.len()
    }
}

fn gain(rel: u32) -> f64 {
    2f64.powi(rel as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

/// NDCG@K with gain `2^rel - 1` and discount `log2(rank + 1)`.
pub fn ndcg_at_k(run: &RetrievalRun, qrels: &RelevanceJudgments, k: usize) -> Result<NdcgReport> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    run.check_ranks()?;
    let mut per_query = BTreeMap::new();
    let mut skipped = 0;
    let all: BTreeSet<&str> = qrels.queries().chain(run.queries()).collect();
    for q in all {
        let mut ideal: Vec<u32> = qrels
            .for_query(q)
            .map(|m| m.values().copied().collect())
            .unwrap_or_default();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let idcg: f64 = ideal
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, &r)| gain(r) / discount(i + 1))
            .sum();
        if idcg <= 0.0 {
            skipped += 1;
            continue;
        }
        let dcg: f64 = run
            .get(q)
            .unwrap_or(&[])
            .iter()
            .filter(|r| r.rank <= k)
            .map(|r| gain(qrels.get(q, &r.page_id)) / discount(r.rank))
            .sum();
        per_query.insert(q.to_owned(), dcg / idcg);
    }
    let mean = if per_query.is_empty() {
        0.0
    } else {
        per_query.values().sum::<f64>() / per_query.len() as f64
    };
    Ok(NdcgReport {
        k,
        per_query,
        mean,
        skipped,
    })
}

/// Per-query metric values for several single-granularity systems.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleTable {
    /// system -> query -> value
    systems: BTreeMap<String, BTreeMap<String, f64>>,
}

impl OracleTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, system: &str, query: &str, value: f64) {
        self.systems
            .entry(system.to_owned())
            .or_default()
            .insert(query.to_owned(), value);
    }

    pub fn add_system(&mut self, system: &str, values: BTreeMap<String, f64>) {
        self.systems.insert(system.to_owned(), values);
    }

    pub fn systems(&self) -> impl Iterator<Item = &str> {
        self.systems.keys().map(String::as_str)
    }

    /// Parses one system's `query_id,value` CSV. A non-numeric first line
    /// is treated as a header.
    pub fn parse_system_csv(text: &str) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed = line
                .split_once(',')
                .and_then(|(q, v)| v.trim().parse::<f64>().ok().map(|v| (q.trim(), v)));
            match parsed {
                Some((q, v)) => {
                    if out.insert(q.to_owned(), v).is_some() {
                        return Err(Error::InvalidConfig(format!(
                            "duplicate query {q} in table"
                        )));
                    }
                }
                None if n == 0 => {}
                None => {
                    return Err(Error::InvalidConfig(format!(
                        "bad table line {}: {line:?}",
                        n + 1
                    )))
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedReport {
    /// Per-query best value across systems.
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
    pub system_means: BTreeMap<String, f64>,
}

impl CombinedReport {
    /// Strongest single system and its mean (ties to the smallest name).
    pub fn best_single(&self) -> Option<(&str, f64)> {
        self.system_means
            .iter()
            .fold(None, |best: Option<(&str, f64)>, (s, &m)| match best {
                Some((_, bm)) if bm >= m => best,
                _ => Some((s.as_str(), m)),
            })
    }

    /// `mean / best_single_mean - 1`.
    pub fn relative_gain(&self) -> Option<f64> {
        self.best_single()
            .filter(|(_, m)| *m > 0.0)
            .map(|(_, m)| self.mean / m - 1.0)
    }
}

/// Takes the per-query maximum across systems and averages over queries.
pub fn combined_selector(table: &OracleTable) -> Result<CombinedReport> {
    let queries: BTreeSet<&str> = table
        .systems
        .values()
        .flat_map(|m| m.keys().map(String::as_str))
        .collect();
    for (system, values) in &table.systems {
        if let Some(q) = queries.iter().find(|q| !values.contains_key(**q)) {
            return Err(Error::MissingCell {
                query: (*q).to_owned(),
                system: system.clone(),
            });
        }
    }
    let n = queries.len().max(1) as f64;
    let per_query: BTreeMap<String, f64> = queries
        .iter()
        .map(|&q| {
            let best = table
                .systems
                .values()
                .map(|m| m[q])
                .fold(f64::NEG_INFINITY, f64::max);
            (q.to_owned(), best)
        })
        .collect();
    let mean = per_query.values().sum::<f64>() / n;
    let system_means = table
        .systems
        .iter()
        .map(|(s, m)| (s.clone(), m.values().sum::<f64>() / n))
        .collect();
    Ok(CombinedReport {
        per_query,
        mean,
        system_means,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub budget: usize,
    pub mean_ndcg: f64,
    pub queries_evaluated: usize,
}

/// For each budget: compress the corpus, search every query and report
/// mean NDCG@K. Budgets must be ascending.
pub fn budget_sweep(
    corpus: &[NestedPageRep],
    queries: &[QueryEmbedding],
    qrels: &RelevanceJudgments,
    budgets: &[usize],
    k: usize,
) -> Result<Vec<SweepRow>> {
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "budgets must be strictly ascending".into(),
        ));
    }
    budgets
        .iter()
        .map(|&budget| {
            let compressed = compress_corpus(corpus, &CompressionConfig::new(budget)?)?;
            let run = run_queries(queries, &compressed, k, Selector::Full)?;
            let report = ndcg_at_k(&run, qrels, k)?;
            Ok(SweepRow {
                budget,
                mean_ndcg: report.mean,
                queries_evaluated: report.evaluated(),
            })
        })
        .collect()
}

/// `budget,mean_ndcg,queries_evaluated` with a header row.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("budget,mean_ndcg,queries_evaluated\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{}",
            r.budget, r.mean_ndcg, r.queries_evaluated
        );
    }
    out
}
