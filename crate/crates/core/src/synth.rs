//! Seeded synthetic corpora, training pairs and toy page images.
//!
//! Token corpora are built from `clusters` topic directions. Every page owns
//! `facets_per_page` facet directions leaning toward its topic; its level-`k`
//! tokens are noisy copies of the first `ceil(F * k / L)` facets, so detail
//! facets only appear at finer levels. Each query's tokens are noisy copies
//! of random facets of its relevant page.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::RelevanceJudgments;
use crate::image::PageImage;
use crate::matrix::{QueryEmbedding, TokenMatrix};
use crate::representation::NestedPageRep;
use crate::rng::SplitMix64;
use crate::trainer::TrainingSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_pages: usize,
    pub n_queries: usize,
    pub dim: usize,
    /// Tokens per level, coarse to fine.
    pub tokens_per_level: Vec<usize>,
    pub clusters: usize,
    /// Expected L2 norm of the perturbation added to each token.
    pub noise: f64,
    pub facets_per_page: usize,
    pub query_tokens: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_pages: 64,
            n_queries: 64,
            dim: 32,
            tokens_per_level: vec![16, 32, 64, 96],
            clusters: 8,
            noise: 0.1,
            facets_per_page: 8,
            query_tokens: 4,
        }
    }
}

impl SynthConfig {
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.noise.is_nan() || self.noise < 0.0 {
            return bad("noise must be >= 0");
        }
        if self.clusters < 2 {
            return bad("clusters must be >= 2");
        }
        if self.dim < 2 || self.n_pages == 0 || self.facets_per_page == 0 || self.query_tokens == 0
        {
            return bad("dim >= 2 and non-zero pages, facets and query tokens required");
        }
        if self.tokens_per_level.is_empty() || self.tokens_per_level.iter().all(|&m| m == 0) {
            return bad("tokens_per_level must contain tokens");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub pages: Vec<NestedPageRep>,
    pub queries: Vec<QueryEmbedding>,
    pub qrels: RelevanceJudgments,
}

fn random_unit(rng: &mut SplitMix64, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.unit_noise()).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// `normalize(direction + noise * e / sqrt(d))`, `e` unit-variance per entry.
fn perturb(rng: &mut SplitMix64, direction: &[f64], noise: f64) -> Vec<f32> {
    let scale = noise / (direction.len() as f64).sqrt();
    let v: Vec<f64> = direction
        .iter()
        .map(|&x| x + scale * rng.unit_noise())
        .collect();
    unit(v).into_iter().map(|x| x as f32).collect()
}

fn page_id(i: usize) -> String {
    format!("p{i:04}")
}

fn query_id(i: usize) -> String {
    format!("q{i:04}")
}

struct Facets {
    per_page: Vec<Vec<Vec<f64>>>,
}

fn make_facets(rng: &mut SplitMix64, cfg: &SynthConfig) -> Facets {
    let topics: Vec<Vec<f64>> = (0..cfg.clusters)
        .map(|_| random_unit(rng, cfg.dim))
        .collect();
    let per_page = (0..cfg.n_pages)
        .map(|p| {
            let topic = &topics[p % cfg.clusters];
            (0..cfg.facets_per_page)
                .map(|_| {
                    let r = random_unit(rng, cfg.dim);
                    unit(topic.iter().zip(&r).map(|(t, x)| t + x).collect())
                })
                .collect()
        })
        .collect();
    Facets { per_page }
}

/// Facets emitted at level `k` (0-based): a growing prefix of the pool.
fn visible_facets(cfg: &SynthConfig, k: usize) -> usize {
    (cfg.facets_per_page * (k + 1))
        .div_ceil(cfg.tokens_per_level.len())
        .max(1)
}

/// Facets that occur in at least one page token.
fn present_facets(cfg: &SynthConfig) -> usize {
    cfg.tokens_per_level
        .iter()
        .enumerate()
        .map(|(k, &m)| visible_facets(cfg, k).min(m))
        .max()
        .unwrap_or(0)
}

fn make_page(
    rng: &mut SplitMix64,
    cfg: &SynthConfig,
    id: String,
    facets: &[Vec<f64>],
) -> Result<NestedPageRep> {
    let segments = cfg
        .tokens_per_level
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let visible = visible_facets(cfg, k);
            let rows: Vec<Vec<f32>> = (0..m)
                .map(|t| perturb(rng, &facets[t % visible], cfg.noise))
                .collect();
            TokenMatrix::from_rows(cfg.dim, &rows)
        })
        .collect::<Result<Vec<_>>>()?;
    NestedPageRep::from_segments(id, segments)
}

fn make_query(
    rng: &mut SplitMix64,
    cfg: &SynthConfig,
    id: String,
    facets: &[Vec<f64>],
) -> Result<QueryEmbedding> {
    let present = present_facets(cfg);
    let rows: Vec<Vec<f32>> = (0..cfg.query_tokens)
        .map(|_| {
            let f = rng.below(present);
            perturb(rng, &facets[f], cfg.noise)
        })
        .collect();
    QueryEmbedding::new(id, TokenMatrix::from_rows(cfg.dim, &rows)?)
}

/// Pages, queries (query `i` targets page `i mod n_pages`) and binary qrels.
pub fn gen_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.check()?;
    let mut rng = SplitMix64::new(cfg.seed);
    let facets = make_facets(&mut rng, cfg);
    let pages = facets
        .per_page
        .iter()
        .enumerate()
        .map(|(p, f)| make_page(&mut rng, cfg, page_id(p), f))
        .collect::<Result<Vec<_>>>()?;
    let mut queries = Vec::with_capacity(cfg.n_queries);
    let mut qrels = RelevanceJudgments::new();
    for q in 0..cfg.n_queries {
        let target = q % cfg.n_pages;
        queries.push(make_query(
            &mut rng,
            cfg,
            query_id(q),
            &facets.per_page[target],
        )?);
        qrels.insert(&query_id(q), &page_id(target), 1)?;
    }
    Ok(SynthCorpus {
        pages,
        queries,
        qrels,
    })
}

/// One query per page, split into the first `n_train` aligned pairs and
/// the remaining held-out pairs. `cfg.n_queries` is ignored.
pub fn gen_training_sets(cfg: &SynthConfig, n_train: usize) -> Result<(TrainingSet, TrainingSet)> {
    if n_train == 0 || n_train >= cfg.n_pages {
        return Err(Error::InvalidConfig(format!(
            "n_train must be in 1..{} (n_pages)",
            cfg.n_pages
        )));
    }
    let corpus = gen_corpus(&SynthConfig {
        n_queries: cfg.n_pages,
        ..cfg.clone()
    })?;
    let (q_train, q_held) = corpus.queries.split_at(n_train);
    let (p_train, p_held) = corpus.pages.split_at(n_train);
    Ok((
        TrainingSet::new(q_train.to_vec(), p_train.to_vec())?,
        TrainingSet::new(q_held.to_vec(), p_held.to_vec())?,
    ))
}

/// Default separable training setup: 16-dim tokens, four levels of
/// `{1, 2, 4, 6}` tokens, noise 0.1.
pub fn training_config(seed: u64, n_pages: usize) -> SynthConfig {
    SynthConfig {
        seed,
        n_pages,
        n_queries: n_pages,
        dim: 16,
        tokens_per_level: vec![1, 2, 4, 6],
        clusters: 8,
        noise: 0.1,
        facets_per_page: 4,
        query_tokens: 3,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImageSynthConfig {
    pub seed: u64,
    pub count: usize,
    pub width: usize,
    pub height: usize,
}

impl Default for ImageSynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 8,
            width: 96,
            height: 64,
        }
    }
}

/// Two families of RGB pages with content at known grid levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthImages {
    /// Four flat quadrants; distinguishable from each other globally.
    pub quadrant: Vec<(String, PageImage)>,
    /// Flat two-tone pages that differ only in a 1/6-width strip inside the
    /// top-right cell of a 2x3 grid.
    pub legend: Vec<(String, PageImage)>,
}

type Rgb = [u8; 3];

fn colour(rng: &mut SplitMix64) -> Rgb {
    // Never black: toy-encoder features of a black patch are zero.
    std::array::from_fn(|_| 40 + rng.below(216) as u8)
}

/// Column span `[x0, x1)` and row span `[0, y1)` of the legend strip. The
/// strip straddles the patch boundaries of every level coarser than 2x3, so
/// only the finest level sees its colour unmixed.
pub fn legend_strip_bounds(width: usize, height: usize) -> (usize, usize, usize) {
    let x0 = width * 37 / 48;
    (x0, x0 + width / 6, height / 2)
}

pub fn gen_images(cfg: &ImageSynthConfig) -> Result<SynthImages> {
    if cfg.width < 48 || cfg.height < 2 {
        return Err(Error::InvalidConfig("images must be at least 48x2".into()));
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let (w, h) = (cfg.width, cfg.height);
    let mut quadrant = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let s: [Rgb; 4] = std::array::from_fn(|_| colour(&mut rng));
        let img = PageImage::from_fn(w, h, 3, |x, y, c| {
            s[(y >= h / 2) as usize * 2 + (x >= w / 2) as usize][c]
        })?;
        quadrant.push((format!("quad{i:03}"), img));
    }
    let (top, bottom) = (colour(&mut rng), colour(&mut rng));
    let (x0, x1, y1) = legend_strip_bounds(w, h);
    let mut legend = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let strip = colour(&mut rng);
        let img = PageImage::from_fn(w, h, 3, |x, y, c| {
            if (x0..x1).contains(&x) && y < y1 {
                strip[c]
            } else if y < h / 2 {
                top[c]
            } else {
                bottom[c]
            }
        })?;
        legend.push((format!("legend{i:03}"), img));
    }
    Ok(SynthImages { quadrant, legend })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_pages: 8,
            n_queries: 8,
            dim: 8,
            tokens_per_level: vec![2, 4],
            ..Default::default()
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(gen_corpus(&small()).unwrap(), gen_corpus(&small()).unwrap());
        let other = SynthConfig { seed: 1, ..small() };
        assert_ne!(gen_corpus(&small()).unwrap(), gen_corpus(&other).unwrap());
    }

    #[test]
    fn qrels_reference_generated_ids() {
        let c = gen_corpus(&SynthConfig {
            n_queries: 11,
            ..small()
        })
        .unwrap();
        for q in &c.queries {
            let top = c.qrels.top_page(&q.query_id).unwrap();
            assert!(c.pages.iter().any(|p| p.page_id == top));
        }
        assert_eq!(c.qrels.top_page("q0010"), Some("p0002"));
    }

    #[test]
    fn noiseless_query_tokens_are_page_tokens() {
        let c = gen_corpus(&SynthConfig {
            noise: 0.0,
            ..small()
        })
        .unwrap();
        for (i, q) in c.queries.iter().enumerate() {
            let page = &c.pages[i % c.pages.len()];
            for qt in q.view().iter_rows() {
                assert!(page.tokens().view().iter_rows().any(|pt| pt == qt));
            }
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(gen_corpus(&SynthConfig {
            clusters: 1,
            ..small()
        })
        .is_err());
        assert!(gen_corpus(&SynthConfig {
            noise: -0.1,
            ..small()
        })
        .is_err());
        assert!(gen_corpus(&SynthConfig {
            tokens_per_level: vec![],
            ..small()
        })
        .is_err());
    }

    #[test]
    fn training_split() {
        let (train, held) = gen_training_sets(&training_config(3, 48), 32).unwrap();
        assert_eq!((train.len(), held.len()), (32, 16));
        assert_eq!(train.levels(), 4);
        assert!(gen_training_sets(&training_config(3, 48), 48).is_err());
    }

    #[test]
    fn images_are_deterministic_and_never_black() {
        let cfg = ImageSynthConfig::default();
        let a = gen_images(&cfg).unwrap();
        assert_eq!(a, gen_images(&cfg).unwrap());
        for (_, img) in a.quadrant.iter().chain(&a.legend) {
            assert!(img.pixels().iter().all(|&p| p >= 40));
        }
    }

    #[test]
    fn legend_pages_differ_only_in_strip() {
        let cfg = ImageSynthConfig::default();
        let imgs = gen_images(&cfg).unwrap();
        let (x0, x1, y1) = legend_strip_bounds(cfg.width, cfg.height);
        assert!(x0 >= cfg.width * 2 / 3 && x1 <= cfg.width && y1 <= cfg.height / 2);
        assert_eq!(x1 - x0, cfg.width / 6);
        let (a, b) = (&imgs.legend[0].1, &imgs.legend[1].1);
        for y in 0..cfg.height {
            for x in 0..cfg.width {
                if !((x0..x1).contains(&x) && y < y1) {
                    for c in 0..3 {
                        assert_eq!(a.get(x, y, c), b.get(x, y, c));
                    }
                }
            }
        }
    }
}
