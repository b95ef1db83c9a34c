//! Token-budget compression by greedy agglomerative clustering.
//!
//! Centroid linkage on cosine similarity: at every step the two clusters
//! whose centroids have the largest dot product merge, ties going to the
//! lexicographically smallest `(i, j)` pair of cluster ids. A cluster's id
//! is its smallest member token index, and its centroid is the mean of its
//! members (summed in member order) re-normalized to unit length.
//!
//! Each live cluster caches its best partner among higher ids, so a merge
//! only rescans the rows whose cached partner was invalidated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{l2_normalize_f64, TokenMatrix, TokenView};
use crate::representation::NestedPageRep;
use crate::scorer::{Searchable, Selector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompressionScope {
    /// Cluster all levels' tokens together.
    #[default]
    WholeSequence,
    /// Split the budget across levels and cluster each level separately.
    PerLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressionConfig {
    pub budget: usize,
    #[serde(default)]
    pub scope: CompressionScope,
}

impl CompressionConfig {
    pub fn new(budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::InvalidConfig("budget must be >= 1".into()));
        }
        Ok(Self {
            budget,
            scope: CompressionScope::WholeSequence,
        })
    }

    pub fn per_level(mut self) -> Self {
        self.scope = CompressionScope::PerLevel;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedPage {
    pub page_id: String,
    pub centroids: TokenMatrix,
    /// Majority source level (1-based) of each centroid's members, ties to
    /// the coarser level. Present when compressed from a nested page.
    pub provenance: Option<Vec<usize>>,
}

impl Searchable for CompressedPage {
    fn page_id(&self) -> &str {
        &self.page_id
    }

    fn tokens_at(&self, selector: Selector) -> Result<TokenView<'_>> {
        match selector {
            Selector::Full => Ok(self.centroids.view()),
            Selector::Level(level) => Err(Error::LevelOutOfRange { level, levels: 0 }),
        }
    }
}

/// Result of clustering one token block: output rows plus member lists.
struct Clustering {
    centroids: Vec<f32>,
    members: Vec<Vec<usize>>,
}

fn sim(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

fn centroid_of(tokens: &TokenView<'_>, members: &[usize], id: usize) -> Result<Vec<f64>> {
    let mut c = vec![0.0f64; tokens.dim()];
    for &m in members {
        for (acc, &x) in c.iter_mut().zip(tokens.row(m)) {
            *acc += x as f64;
        }
    }
    let n = members.len() as f64;
    c.iter_mut().for_each(|x| *x /= n);
    if !l2_normalize_f64(&mut c) {
        return Err(Error::ZeroNormRow(id));
    }
    Ok(c)
}

const NO_PARTNER: (f64, usize) = (f64::NEG_INFINITY, usize::MAX);

fn cluster(tokens: &TokenView<'_>, budget: usize) -> Result<Clustering> {
    let n = tokens.rows();
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut centroids: Vec<Vec<f64>> = (0..n)
        .map(|i| centroid_of(tokens, &[i], i))
        .collect::<Result<_>>()?;
    let mut live = n;

    let best_partner = |i: usize, members: &[Option<Vec<usize>>], centroids: &[Vec<f64>]| {
        let mut best = NO_PARTNER;
        for j in i + 1..members.len() {
            if members[j].is_some() {
                let s = sim(&centroids[i], &centroids[j]);
                if s > best.0 {
                    best = (s, j);
                }
            }
        }
        best
    };
    let mut best: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| best_partner(i, &members, &centroids))
        .collect();

    while live > budget {
        let mut pick = NO_PARTNER;
        let mut a = usize::MAX;
        for (i, &(s, j)) in best.iter().enumerate() {
            if members[i].is_some() && j != usize::MAX && s > pick.0 {
                pick = (s, j);
                a = i;
            }
        }
        let b = pick.1;
        debug_assert!(a < b && b < n);

        let mut merged = members[a].take().unwrap();
        merged.extend(members[b].take().unwrap());
        merged.sort_unstable();
        centroids[a] = centroid_of(tokens, &merged, a)?;
        members[a] = Some(merged);
        centroids[b] = Vec::new();
        best[b] = NO_PARTNER;
        live -= 1;

        best[a] = best_partner(a, &members, &centroids);
        for i in 0..b {
            if i == a || members[i].is_none() {
                continue;
            }
            let partner = best[i].1;
            if partner == a || partner == b {
                best[i] = best_partner(i, &members, &centroids);
            } else if i < a {
                let s = sim(&centroids[i], &centroids[a]);
                if s > best[i].0 || (s == best[i].0 && a < partner) {
                    best[i] = (s, a);
                }
            }
        }
    }

    let mut out = Clustering {
        centroids: Vec::with_capacity(live * tokens.dim()),
        members: Vec::with_capacity(live),
    };
    for (i, m) in members.into_iter().enumerate() {
        if let Some(m) = m {
            out.centroids.extend(centroids[i].iter().map(|&x| x as f32));
            out.members.push(m);
        }
    }
    Ok(out)
}

/// Clusters `tokens` down to at most `cfg.budget` unit centroids, ordered by
/// their smallest member index. Inputs at or under budget come back
/// bit-identical. Tokens must already be unit-normalized.
pub fn hac_compress(
    page_id: impl Into<String>,
    tokens: &TokenView<'_>,
    cfg: &CompressionConfig,
) -> Result<CompressedPage> {
    if cfg.budget == 0 {
        return Err(Error::InvalidConfig("budget must be >= 1".into()));
    }
    let page_id = page_id.into();
    if tokens.rows() <= cfg.budget {
        return Ok(CompressedPage {
            page_id,
            centroids: tokens.to_matrix(),
            provenance: None,
        });
    }
    let c = cluster(tokens, cfg.budget)?;
    Ok(CompressedPage {
        page_id,
        centroids: TokenMatrix::new(c.members.len(), tokens.dim(), c.centroids)?,
        provenance: None,
    })
}

/// Splits `budget` across levels proportionally to their token counts
/// (largest remainder, ties to the coarser level), never exceeding a
/// level's own size.
pub fn allocate_budget(level_sizes: &[usize], budget: usize) -> Vec<usize> {
    let total: usize = level_sizes.iter().sum();
    if total <= budget {
        return level_sizes.to_vec();
    }
    let mut alloc: Vec<usize> = level_sizes.iter().map(|&m| m * budget / total).collect();
    let mut rest = budget - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..level_sizes.len()).collect();
    // Remainder numerators m*budget mod total, compared exactly.
    order.sort_by_key(|&k| std::cmp::Reverse((level_sizes[k] * budget) % total));
    for k in order.into_iter().cycle() {
        if rest == 0 {
            break;
        }
        if alloc[k] < level_sizes[k] {
            alloc[k] += 1;
            rest -= 1;
        }
    }
    alloc
}

fn majority_level(members: &[usize], rep: &NestedPageRep) -> Result<usize> {
    let mut counts = vec![0usize; rep.levels()];
    for &m in members {
        counts[rep.level_of_token(m)? - 1] += 1;
    }
    let top = *counts.iter().max().unwrap();
    Ok(counts.iter().position(|&c| c == top).unwrap() + 1)
}

/// Compresses a nested page under `cfg`, recording each centroid's
/// majority source level.
pub fn compress_page(rep: &NestedPageRep, cfg: &CompressionConfig) -> Result<CompressedPage> {
    if cfg.budget == 0 {
        return Err(Error::InvalidConfig("budget must be >= 1".into()));
    }
    let all = rep.tokens().view();
    if all.rows() <= cfg.budget {
        let provenance = (0..all.rows())
            .map(|i| rep.level_of_token(i))
            .collect::<Result<_>>()?;
        return Ok(CompressedPage {
            page_id: rep.page_id.clone(),
            centroids: rep.tokens().clone(),
            provenance: Some(provenance),
        });
    }
    let (data, provenance) = match cfg.scope {
        CompressionScope::WholeSequence => {
            let c = cluster(&all, cfg.budget)?;
            let prov = c
                .members
                .iter()
                .map(|m| majority_level(m, rep))
                .collect::<Result<Vec<_>>>()?;
            (c.centroids, prov)
        }
        CompressionScope::PerLevel => {
            let sizes: Vec<usize> = (1..=rep.levels())
                .map(|k| rep.segment(k).map(|s| s.rows()))
                .collect::<Result<_>>()?;
            let alloc = allocate_budget(&sizes, cfg.budget);
            let mut data = Vec::new();
            let mut prov = Vec::new();
            for (k, &b) in alloc.iter().enumerate() {
                if b == 0 {
                    continue;
                }
                let seg = rep.segment(k + 1)?;
                if seg.rows() <= b {
                    data.extend_from_slice(seg.data());
                    prov.extend(std::iter::repeat_n(k + 1, seg.rows()));
                } else {
                    let c = cluster(&seg, b)?;
                    data.extend(c.centroids);
                    prov.extend(std::iter::repeat_n(k + 1, c.members.len()));
                }
            }
            (data, prov)
        }
    };
    Ok(CompressedPage {
        page_id: rep.page_id.clone(),
        centroids: TokenMatrix::new(provenance.len(), rep.dim(), data)?,
        provenance: Some(provenance),
    })
}

/// Compresses every page, in parallel across pages. Output order follows
/// the input.
pub fn compress_corpus(
    corpus: &[NestedPageRep],
    cfg: &CompressionConfig,
) -> Result<Vec<CompressedPage>> {
    corpus.par_iter().map(|p| compress_page(p, cfg)).collect()
}
