//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's scoring, clustering or metric code.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use strata_core::{NestedPageRep, QueryEmbedding, SplitMix64, TokenMatrix};

/// Random unit rows, normalized in f64 and stored as f32.
pub fn unit_rows(rng: &mut SplitMix64, rows: usize, dim: usize) -> TokenMatrix {
    let mut data = Vec::with_capacity(rows * dim);
    for _ in 0..rows {
        let v: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        data.extend(v.iter().map(|x| (x / n) as f32));
    }
    TokenMatrix::new(rows, dim, data).unwrap()
}

pub fn random_query(rng: &mut SplitMix64, id: &str, rows: usize, dim: usize) -> QueryEmbedding {
    QueryEmbedding::new(id, unit_rows(rng, rows, dim)).unwrap()
}

pub fn random_page(
    rng: &mut SplitMix64,
    id: &str,
    level_sizes: &[usize],
    dim: usize,
) -> NestedPageRep {
    let segs = level_sizes
        .iter()
        .map(|&m| unit_rows(rng, m, dim))
        .collect();
    NestedPageRep::from_segments(id, segs).unwrap()
}

fn rows_of(data: &[f32], dim: usize) -> Vec<Vec<f64>> {
    data.chunks(dim)
        .map(|r| r.iter().map(|&x| x as f64).collect())
        .collect()
}

/// Plain double loop over query and document rows.
pub fn brute_maxsim(q: &[f32], doc: &[f32], dim: usize) -> f64 {
    let q = rows_of(q, dim);
    let doc = rows_of(doc, dim);
    let mut total = 0.0;
    for qi in &q {
        let mut best = f64::NEG_INFINITY;
        for dj in &doc {
            let mut s = 0.0;
            for t in 0..dim {
                s += qi[t] * dj[t];
            }
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    total
}

/// Scores every page, fully sorts (score desc, id asc) and keeps `k`.
pub fn brute_search(q: &QueryEmbedding, pages: &[NestedPageRep], k: usize) -> Vec<(String, f64)> {
    let dim = q.tokens().dim();
    let mut all: Vec<(String, f64)> = pages
        .iter()
        .map(|p| {
            (
                p.page_id.clone(),
                brute_maxsim(q.tokens().data(), p.tokens().data(), dim),
            )
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn normalize_like_library(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-6 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Greedy centroid-linkage HAC, recomputing every pairwise similarity at
/// every merge. Returns centroids (f32, ordered by smallest member) and
/// sorted member lists.
pub fn brute_hac(data: &[f32], dim: usize, budget: usize) -> (Vec<f32>, Vec<Vec<usize>>) {
    let rows = rows_of(data, dim);
    let mut clusters: Vec<Vec<usize>> = (0..rows.len()).map(|i| vec![i]).collect();
    let centroid = |members: &[usize]| {
        let mut c = vec![0.0f64; dim];
        for &m in members {
            for t in 0..dim {
                c[t] += rows[m][t];
            }
        }
        for x in c.iter_mut() {
            *x /= members.len() as f64;
        }
        normalize_like_library(&mut c);
        c
    };
    while clusters.len() > budget {
        let cents: Vec<Vec<f64>> = clusters.iter().map(|c| centroid(c)).collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let mut s = 0.0;
                for t in 0..dim {
                    s += cents[i][t] * cents[j][t];
                }
                // Clusters are kept sorted by smallest member, so the first
                // pair found at a given score is the lexicographic minimum.
                if best.is_none_or(|b| s > b.0) {
                    best = Some((s, i, j));
                }
            }
        }
        let (_, i, j) = best.unwrap();
        let absorbed = clusters.remove(j);
        clusters[i].extend(absorbed);
        clusters[i].sort();
    }
    let mut out = Vec::new();
    for c in &clusters {
        out.extend(centroid(c).iter().map(|&x| x as f32));
    }
    (out, clusters)
}

/// DCG/IDCG with graded gains `2^rel - 1` and `log2(rank + 1)` discounts.
/// Returns `None` when the query has no relevant page.
pub fn ndcg_oracle(ranked: &[&str], rels: &BTreeMap<String, u32>, k: usize) -> Option<f64> {
    let gain = |r: u32| 2f64.powi(r as i32) - 1.0;
    let mut ideal: Vec<u32> = rels.values().copied().filter(|&r| r > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let mut idcg = 0.0;
    for (i, &r) in ideal.iter().take(k).enumerate() {
        idcg += gain(r) / ((i + 2) as f64).log2();
    }
    let mut dcg = 0.0;
    for (i, id) in ranked.iter().take(k).enumerate() {
        let r = rels.get(*id).copied().unwrap_or(0);
        dcg += gain(r) / ((i + 2) as f64).log2();
    }
    Some(dcg / idcg)
}

/// Batch InfoNCE over in-batch negatives from a `b x b` score matrix,
/// computed without any shift for stability (fine at test magnitudes).
pub fn info_nce_oracle(scores: &[Vec<f64>], tau: f64) -> f64 {
    let b = scores.len();
    let mut total = 0.0;
    for i in 0..b {
        let denom: f64 = scores[i].iter().map(|s| (s / tau).exp()).sum();
        total += -((scores[i][i] / tau).exp() / denom).ln();
    }
    total / b as f64
}
