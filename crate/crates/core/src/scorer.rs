//! Late-interaction (MaxSim) scoring, exhaustive top-K search and
//! per-granularity contribution analysis.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evalkit::RetrievalRun;
use crate::matrix::{dot, QueryEmbedding, TokenView};
use crate::representation::NestedPageRep;

/// Sum over query tokens of the best dot product against any document
/// token. Accumulates in `f64`, query tokens in index order. Negative
/// similarities are not clamped.
pub fn maxsim(q: &TokenView<'_>, doc: &TokenView<'_>) -> Result<f64> {
    if q.dim() != doc.dim() {
        return Err(Error::DimMismatch {
            expected: q.dim(),
            found: doc.dim(),
        });
    }
    if doc.rows() == 0 {
        return Err(Error::EmptyDocument);
    }
    if q.rows() == 0 {
        return Err(Error::EmptyQuery);
    }
    Ok(q.iter_rows()
        .map(|qi| {
            doc.iter_rows()
                .map(|dj| dot(qi, dj))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum())
}

/// MaxSim against the level-`k` nested representation.
pub fn maxsim_at_level(q: &QueryEmbedding, rep: &NestedPageRep, k: usize) -> Result<f64> {
    maxsim(&q.view(), &rep.nested_at(k)?)
}

/// Which token set of a document to score against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selector {
    /// Every stored token (the finest nested level, or all centroids).
    #[default]
    Full,
    /// The 1-based nested level `k`.
    Level(usize),
}

/// Anything that can be scored by [`search`].
pub trait Searchable: Sync {
    fn page_id(&self) -> &str;
    fn tokens_at(&self, selector: Selector) -> Result<TokenView<'_>>;
}

impl Searchable for NestedPageRep {
    fn page_id(&self) -> &str {
        &self.page_id
    }

    fn tokens_at(&self, selector: Selector) -> Result<TokenView<'_>> {
        match selector {
            Selector::Full => self.nested_at(self.levels()),
            Selector::Level(k) => self.nested_at(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPage {
    pub page_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Score descending, then page id ascending.
fn rank_order(a: &(&str, f64), b: &(&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Exhaustive top-`k` search. Documents are scored in parallel; the merge
/// is a full deterministic sort, so output is independent of thread count
/// and corpus order.
pub fn search<D: Searchable>(
    q: &QueryEmbedding,
    corpus: &[D],
    k: usize,
    selector: Selector,
) -> Result<Vec<ScoredPage>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let qv = q.view();
    let mut scored = corpus
        .par_iter()
        .map(|d| Ok((d.page_id(), maxsim(&qv, &d.tokens_at(selector)?)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(rank_order);
    Ok(scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (id, score))| ScoredPage {
            page_id: id.to_owned(),
            score,
            rank: i + 1,
        })
        .collect())
}

/// Runs [`search`] for every query and collects the results as a run.
pub fn run_queries<D: Searchable>(
    queries: &[QueryEmbedding],
    corpus: &[D],
    k: usize,
    selector: Selector,
) -> Result<RetrievalRun> {
    let mut run = RetrievalRun::default();
    for q in queries {
        run.insert(&q.query_id, search(q, corpus, k, selector)?);
    }
    Ok(run)
}

/// Per-level share of a query's MaxSim mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionReport {
    pub query_id: String,
    /// One entry per level, coarse to fine; sums to 1.
    pub ratios: Vec<f64>,
}

/// Attributes each query token's best match in the full representation to
/// the level owning that document token, then normalizes the per-level
/// sums. Argmax ties resolve to the lowest token index.
pub fn contribution(q: &QueryEmbedding, rep: &NestedPageRep) -> Result<ContributionReport> {
    let doc = rep.nested_at(rep.levels())?;
    if doc.dim() != q.tokens().dim() {
        return Err(Error::DimMismatch {
            expected: q.tokens().dim(),
            found: doc.dim(),
        });
    }
    if doc.rows() == 0 {
        return Err(Error::EmptyDocument);
    }
    let mut sums = vec![0.0f64; rep.levels()];
    for qi in q.view().iter_rows() {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (j, dj) in doc.iter_rows().enumerate() {
            let s = dot(qi, dj);
            if s > best.1 {
                best = (j, s);
            }
        }
        sums[rep.level_of_token(best.0)? - 1] += best.1;
    }
    let total: f64 = sums.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateNormalization { total, sums });
    }
    Ok(ContributionReport {
        query_id: q.query_id.clone(),
        ratios: sums.iter().map(|s| s / total).collect(),
    })
}
