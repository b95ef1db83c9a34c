//! Granularity-weighted contrastive training of a linear projection head.
//!
//! For level `k`, each query is scored against every page of the batch at
//! that level (`S_ij = maxsim(q_i, D_j^(k))`), and the loss is InfoNCE over
//! the row with temperature `tau`, the other pages acting as negatives:
//!
//! `L_k = (1/B) sum_i [ logsumexp_j(S_ij / tau) - S_ii / tau ]`
//!
//! The total objective is `sum_k w_k L_k` with the weights used as given.
//!
//! With a projection head, queries and page tokens are mapped through the
//! same `d_in x d_out` matrix and re-normalized before scoring; gradients
//! flow through the normalization and along each query token's selected
//! (argmax, lowest index on ties) document token.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::{ndcg_at_k, RelevanceJudgments};
use crate::matrix::{QueryEmbedding, TokenMatrix};
use crate::representation::NestedPageRep;
use crate::rng::SplitMix64;
use crate::scorer::{maxsim, run_queries, Selector};

pub const DEFAULT_TEMPERATURE: f64 = 0.02;
pub const DEFAULT_LEVEL_WEIGHTS: [f64; 4] = [1.0, 1.5, 2.0, 2.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub temperature: f64,
    pub level_weights: Vec<f64>,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Output width of the projection head.
    pub out_dim: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            level_weights: DEFAULT_LEVEL_WEIGHTS.to_vec(),
            learning_rate: 0.05,
            steps: 200,
            batch_size: 8,
            seed: 0,
            out_dim: 8,
        }
    }
}

impl TrainingConfig {
    fn check(&self, levels: usize) -> Result<()> {
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(Error::InvalidConfig("temperature must be > 0".into()));
        }
        if self.level_weights.len() != levels {
            return Err(Error::LevelCountMismatch {
                expected: levels,
                found: self.level_weights.len(),
            });
        }
        if self
            .level_weights
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(Error::InvalidConfig(
                "level weights must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// `B` queries paired index-wise with their positive pages.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub queries: Vec<QueryEmbedding>,
    pub pages: Vec<NestedPageRep>,
}

impl TrainingBatch {
    pub fn new(queries: Vec<QueryEmbedding>, pages: Vec<NestedPageRep>) -> Result<Self> {
        if queries.len() != pages.len() || queries.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "batch needs aligned, non-empty queries and pages ({} vs {})",
                queries.len(),
                pages.len()
            )));
        }
        let dim = queries[0].tokens().dim();
        let levels = pages[0].levels();
        for q in &queries {
            if q.tokens().dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: q.tokens().dim(),
                });
            }
        }
        for p in &pages {
            if p.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if p.levels() != levels {
                return Err(Error::LevelCountMismatch {
                    expected: levels,
                    found: p.levels(),
                });
            }
        }
        Ok(Self { queries, pages })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn levels(&self) -> usize {
        self.pages[0].levels()
    }

    pub fn dim(&self) -> usize {
        self.pages[0].dim()
    }

    /// Sub-batch of the given pair indices.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            idx.iter().map(|&i| self.queries[i].clone()).collect(),
            idx.iter().map(|&i| self.pages[i].clone()).collect(),
        )
    }

    /// Qrels marking page `i` relevant to query `i`.
    pub fn qrels(&self) -> Result<RelevanceJudgments> {
        let mut q = RelevanceJudgments::new();
        for (qe, p) in self.queries.iter().zip(&self.pages) {
            q.insert(&qe.query_id, &p.page_id, 1)?;
        }
        Ok(q)
    }
}

/// Row-wise InfoNCE over a `B x B` score matrix, positives on the diagonal.
pub fn info_nce(scores: &[f64], b: usize, tau: f64) -> Result<f64> {
    if scores.len() != b * b || b == 0 {
        return Err(Error::InvalidConfig("score matrix must be B x B".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("score matrix"));
    }
    let mut total = 0.0;
    for (i, row) in scores.chunks_exact(b).enumerate() {
        let z_max = row.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s / tau));
        let lse = z_max
            + row
                .iter()
                .map(|&s| (s / tau - z_max).exp())
                .sum::<f64>()
                .ln();
        total += lse - row[i] / tau;
    }
    let loss = total / b as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok(loss)
}

/// `S_ij = maxsim(q_i, D_j^(k))`, row-major.
pub fn score_matrix(batch: &TrainingBatch, k: usize) -> Result<Vec<f64>> {
    let mut s = Vec::with_capacity(batch.len() * batch.len());
    for q in &batch.queries {
        for p in &batch.pages {
            s.push(maxsim(&q.view(), &p.nested_at(k)?)?);
        }
    }
    Ok(s)
}

pub fn level_loss(batch: &TrainingBatch, k: usize, tau: f64) -> Result<f64> {
    info_nce(&score_matrix(batch, k)?, batch.len(), tau)
}

pub fn total_loss(batch: &TrainingBatch, cfg: &TrainingConfig) -> Result<f64> {
    cfg.check(batch.levels())?;
    let mut total = 0.0;
    for (k, w) in cfg.level_weights.iter().enumerate() {
        total += w * level_loss(batch, k + 1, cfg.temperature)?;
    }
    Ok(total)
}

/// Linear map `x -> x W` with `W` of shape `d_in x d_out`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    d_in: usize,
    d_out: usize,
    weights: Vec<f64>,
}

impl ProjectionHead {
    pub fn new(d_in: usize, d_out: usize, weights: Vec<f64>) -> Result<Self> {
        if d_in == 0 || d_out == 0 || weights.len() != d_in * d_out {
            return Err(Error::ShapeMismatch {
                rows: d_in,
                dim: d_out,
                len: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("projection weights"));
        }
        Ok(Self {
            d_in,
            d_out,
            weights,
        })
    }

    /// Square identity (or its leading block when the shapes differ).
    pub fn identity(d_in: usize, d_out: usize) -> Self {
        let mut w = vec![0.0; d_in * d_out];
        for i in 0..d_in.min(d_out) {
            w[i * d_out + i] = 1.0;
        }
        Self {
            d_in,
            d_out,
            weights: w,
        }
    }

    /// Entries uniform in `[-1, 1) / sqrt(d_in)`.
    pub fn random(d_in: usize, d_out: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let scale = 1.0 / (d_in as f64).sqrt();
        let weights = (0..d_in * d_out)
            .map(|_| rng.uniform(-1.0, 1.0) * scale)
            .collect();
        Self {
            d_in,
            d_out,
            weights,
        }
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Projects one row and returns `(y, |y|)`.
    fn project_row(&self, x: &[f32]) -> (Vec<f64>, f64) {
        let mut y = vec![0.0; self.d_out];
        for (p, &xp) in x.iter().enumerate() {
            let xp = xp as f64;
            let w = &self.weights[p * self.d_out..(p + 1) * self.d_out];
            for (yo, wo) in y.iter_mut().zip(w) {
                *yo += xp * wo;
            }
        }
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        (y, n)
    }

    /// Projects and unit-normalizes every row, as used at inference.
    pub fn project(&self, m: &TokenMatrix) -> Result<TokenMatrix> {
        if m.dim() != self.d_in {
            return Err(Error::DimMismatch {
                expected: self.d_in,
                found: m.dim(),
            });
        }
        let mut data = Vec::with_capacity(m.rows() * self.d_out);
        for (r, x) in m.view().iter_rows().enumerate() {
            let (y, n) = self.project_row(x);
            if n == 0.0 {
                return Err(Error::ZeroNormRow(r));
            }
            data.extend(y.iter().map(|v| (v / n) as f32));
        }
        TokenMatrix::new(m.rows(), self.d_out, data)
    }

    pub fn project_query(&self, q: &QueryEmbedding) -> Result<QueryEmbedding> {
        QueryEmbedding::new(q.query_id.clone(), self.project(q.tokens())?)
    }

    pub fn project_page(&self, p: &NestedPageRep) -> Result<NestedPageRep> {
        NestedPageRep::from_parts(
            p.page_id.clone(),
            self.project(p.tokens())?,
            p.boundaries().to_vec(),
        )
    }

    pub fn project_batch(&self, batch: &TrainingBatch) -> Result<TrainingBatch> {
        TrainingBatch::new(
            batch
                .queries
                .iter()
                .map(|q| self.project_query(q))
                .collect::<Result<_>>()?,
            batch
                .pages
                .iter()
                .map(|p| self.project_page(p))
                .collect::<Result<_>>()?,
        )
    }

    /// `d_in x d_out` `f32` matrix, for MVTX storage.
    pub fn to_matrix(&self) -> TokenMatrix {
        TokenMatrix::new(
            self.d_in,
            self.d_out,
            self.weights.iter().map(|&w| w as f32).collect(),
        )
        .expect("finite weights")
    }

    pub fn from_matrix(m: &TokenMatrix) -> Result<Self> {
        Self::new(
            m.rows(),
            m.dim(),
            m.data().iter().map(|&w| w as f64).collect(),
        )
    }
}

/// Projected, normalized tokens of one sequence with what backprop needs.
struct Projected {
    /// Normalized rows, `rows x d_out`.
    unit: Vec<f64>,
    norms: Vec<f64>,
    rows: usize,
}

impl Projected {
    fn new(head: &ProjectionHead, m: &TokenMatrix) -> Result<Self> {
        if m.dim() != head.d_in {
            return Err(Error::DimMismatch {
                expected: head.d_in,
                found: m.dim(),
            });
        }
        let mut unit = Vec::with_capacity(m.rows() * head.d_out);
        let mut norms = Vec::with_capacity(m.rows());
        for (r, x) in m.view().iter_rows().enumerate() {
            let (y, n) = head.project_row(x);
            if n == 0.0 || !n.is_finite() {
                return Err(Error::ZeroNormRow(r));
            }
            unit.extend(y.iter().map(|v| v / n));
            norms.push(n);
        }
        Ok(Self {
            unit,
            norms,
            rows: m.rows(),
        })
    }

    fn row(&self, i: usize, d: usize) -> &[f64] {
        &self.unit[i * d..(i + 1) * d]
    }
}

/// Best match of one query token at each level: `(similarity, doc row)`.
fn prefix_maxima(q: &[f64], doc: &Projected, bounds: &[usize], d: usize) -> Vec<(f64, usize)> {
    let mut out = Vec::with_capacity(bounds.len());
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    let mut b = 0;
    for &end in bounds {
        while b < end {
            let s = q
                .iter()
                .zip(doc.row(b, d))
                .fold(0.0, |acc, (x, y)| acc + x * y);
            if s > best.0 {
                best = (s, b);
            }
            b += 1;
        }
        out.push(best);
    }
    out
}

/// The weighted multi-level objective as a function of the head weights.
pub struct HeadObjective<'a> {
    batch: &'a TrainingBatch,
    cfg: &'a TrainingConfig,
}

impl<'a> HeadObjective<'a> {
    pub fn new(batch: &'a TrainingBatch, cfg: &'a TrainingConfig) -> Result<Self> {
        cfg.check(batch.levels())?;
        Ok(Self { batch, cfg })
    }

    pub fn loss(&self, head: &ProjectionHead) -> Result<f64> {
        self.evaluate(head, false).map(|(l, _)| l)
    }

    /// Loss and its gradient with respect to the head weights (`d_in x d_out`).
    pub fn loss_and_grad(&self, head: &ProjectionHead) -> Result<(f64, Vec<f64>)> {
        self.evaluate(head, true)
    }

    /// MaxSim argmax rows for every (query, page, query token, level), flattened.
    pub fn selections(&self, head: &ProjectionHead) -> Result<Vec<usize>> {
        let d = head.d_out;
        let ds = self
            .batch
            .pages
            .iter()
            .map(|p| Projected::new(head, p.tokens()))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        for q in &self.batch.queries {
            let q = Projected::new(head, q.tokens())?;
            for (doc, page) in ds.iter().zip(&self.batch.pages) {
                for a in 0..q.rows {
                    out.extend(
                        prefix_maxima(q.row(a, d), doc, page.boundaries(), d)
                            .iter()
                            .map(|m| m.1),
                    );
                }
            }
        }
        Ok(out)
    }

    fn evaluate(&self, head: &ProjectionHead, want_grad: bool) -> Result<(f64, Vec<f64>)> {
        let b = self.batch.len();
        let levels = self.batch.levels();
        let d = head.d_out;
        let tau = self.cfg.temperature;
        let qs = self
            .batch
            .queries
            .iter()
            .map(|q| Projected::new(head, q.tokens()))
            .collect::<Result<Vec<_>>>()?;
        let ds = self
            .batch
            .pages
            .iter()
            .map(|p| Projected::new(head, p.tokens()))
            .collect::<Result<Vec<_>>>()?;

        // matches[i][j][a][k] = best (sim, row) of query i token a in page j at level k.
        let mut scores = vec![vec![0.0f64; b * b]; levels];
        let mut matches = Vec::with_capacity(b * b);
        for (i, q) in qs.iter().enumerate() {
            for (j, doc) in ds.iter().enumerate() {
                let bounds = self.batch.pages[j].boundaries();
                let per_token: Vec<Vec<(f64, usize)>> = (0..q.rows)
                    .map(|a| prefix_maxima(q.row(a, d), doc, bounds, d))
                    .collect();
                for (k, level_scores) in scores.iter_mut().enumerate() {
                    if bounds[k] == 0 {
                        return Err(Error::EmptyDocument);
                    }
                    level_scores[i * b + j] = per_token.iter().map(|m| m[k].0).sum();
                }
                matches.push(per_token);
            }
        }

        let mut loss = 0.0;
        let mut dscores = vec![vec![0.0f64; b * b]; levels];
        for k in 0..levels {
            let w = self.cfg.level_weights[k];
            loss += w * info_nce(&scores[k], b, tau)?;
            if want_grad {
                for i in 0..b {
                    let row = &scores[k][i * b..(i + 1) * b];
                    let z_max = row.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s / tau));
                    let exps: Vec<f64> = row.iter().map(|&s| (s / tau - z_max).exp()).collect();
                    let z: f64 = exps.iter().sum();
                    for j in 0..b {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        dscores[k][i * b + j] = w / (b as f64 * tau) * (exps[j] / z - delta);
                    }
                }
            }
        }
        if !want_grad {
            return Ok((loss, Vec::new()));
        }

        // Gradients with respect to the normalized projected rows.
        let mut gq: Vec<Vec<f64>> = qs.iter().map(|q| vec![0.0; q.rows * d]).collect();
        let mut gd: Vec<Vec<f64>> = ds.iter().map(|p| vec![0.0; p.rows * d]).collect();
        for i in 0..b {
            for j in 0..b {
                let per_token = &matches[i * b + j];
                for (a, m) in per_token.iter().enumerate() {
                    for (k, &(_, row)) in m.iter().enumerate() {
                        let c = dscores[k][i * b + j];
                        if c == 0.0 {
                            continue;
                        }
                        let qa = qs[i].row(a, d);
                        let db = ds[j].row(row, d);
                        for t in 0..d {
                            gq[i][a * d + t] += c * db[t];
                            gd[j][row * d + t] += c * qa[t];
                        }
                    }
                }
            }
        }

        let mut grad = vec![0.0f64; head.d_in * d];
        let inputs = self
            .batch
            .queries
            .iter()
            .map(QueryEmbedding::tokens)
            .zip(qs.iter().zip(&gq))
            .chain(
                self.batch
                    .pages
                    .iter()
                    .map(NestedPageRep::tokens)
                    .zip(ds.iter().zip(&gd)),
            );
        let mut gy = vec![0.0f64; d];
        for (x, (proj, g)) in inputs {
            for r in 0..proj.rows {
                let u = proj.row(r, d);
                let gr = &g[r * d..(r + 1) * d];
                let along: f64 = gr.iter().zip(u).map(|(a, b)| a * b).sum();
                let n = proj.norms[r];
                for t in 0..d {
                    gy[t] = (gr[t] - along * u[t]) / n;
                }
                for (p, &xp) in x.row(r).iter().enumerate() {
                    let xp = xp as f64;
                    if xp == 0.0 {
                        continue;
                    }
                    for (gw, &gyt) in grad[p * d..(p + 1) * d].iter_mut().zip(&gy) {
                        *gw += xp * gyt;
                    }
                }
            }
        }
        Ok((loss, grad))
    }
}

/// Central finite-difference gradient of the objective at `head`.
pub fn finite_difference_gradient(
    obj: &HeadObjective<'_>,
    head: &ProjectionHead,
    h: f64,
) -> Result<Vec<f64>> {
    let mut probe = head.clone();
    let mut out = Vec::with_capacity(head.weights.len());
    for idx in 0..head.weights.len() {
        let w0 = head.weights[idx];
        probe.weights[idx] = w0 + h;
        let up = obj.loss(&probe)?;
        probe.weights[idx] = w0 - h;
        let down = obj.loss(&probe)?;
        probe.weights[idx] = w0;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// True when no MaxSim argmax changes anywhere inside the central-difference
/// stencil, so the objective is smooth along every probed coordinate.
pub fn stencil_is_smooth(obj: &HeadObjective<'_>, head: &ProjectionHead, h: f64) -> Result<bool> {
    let base = obj.selections(head)?;
    let mut probe = head.clone();
    for idx in 0..head.weights.len() {
        let w0 = head.weights[idx];
        for w in [w0 + h, w0 - h] {
            probe.weights[idx] = w;
            if obj.selections(&probe)? != base {
                return Ok(false);
            }
        }
        probe.weights[idx] = w0;
    }
    Ok(true)
}

/// Largest entrywise `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Aligned query/page pairs used for training or held-out evaluation.
pub type TrainingSet = TrainingBatch;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub head: ProjectionHead,
    /// Mean objective over the fixed mini-batches, before each step and
    /// once more after the last (`steps + 1` entries).
    pub trace: Vec<f64>,
    /// Held-out NDCG@5 of the trained head, when a held-out set was given.
    pub heldout_ndcg: Option<f64>,
}

impl TrainOutcome {
    /// `step,loss` CSV with a header row.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (s, l) in self.trace.iter().enumerate() {
            out.push_str(&format!("{s},{l:.9}\n"));
        }
        out
    }
}

/// Plain SGD on a seeded random head. The training set is shuffled once
/// with `cfg.seed` and cut into fixed mini-batches visited round-robin.
pub fn train_toy(
    train: &TrainingSet,
    heldout: Option<&TrainingSet>,
    cfg: &TrainingConfig,
) -> Result<TrainOutcome> {
    cfg.check(train.levels())?;
    if cfg.batch_size < 2 {
        return Err(Error::InvalidConfig("batch_size must be >= 2".into()));
    }
    if train.len() < 2 * cfg.batch_size {
        return Err(Error::InvalidConfig(format!(
            "need at least {} pairs for batch size {}, got {}",
            2 * cfg.batch_size,
            cfg.batch_size,
            train.len()
        )));
    }
    if cfg.out_dim == 0 {
        return Err(Error::InvalidConfig("out_dim must be >= 1".into()));
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    rng.shuffle(&mut order);
    let batches = order
        .chunks_exact(cfg.batch_size)
        .map(|idx| train.select(idx))
        .collect::<Result<Vec<_>>>()?;
    let mut head = ProjectionHead::random(train.dim(), cfg.out_dim, rng.next_u64());

    let objective = |head: &ProjectionHead| -> Result<f64> {
        let mut sum = 0.0;
        for b in &batches {
            sum += HeadObjective::new(b, cfg)?.loss(head)?;
        }
        Ok(sum / batches.len() as f64)
    };

    let mut trace = Vec::with_capacity(cfg.steps + 1);
    for step in 0..cfg.steps {
        trace.push(objective(&head)?);
        let batch = &batches[step % batches.len()];
        let (_, grad) = HeadObjective::new(batch, cfg)?.loss_and_grad(&head)?;
        for (w, g) in head.weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * g;
        }
    }
    trace.push(objective(&head)?);

    let heldout_ndcg = heldout.map(|h| evaluate_head(&head, h, 5)).transpose()?;
    Ok(TrainOutcome {
        head,
        trace,
        heldout_ndcg,
    })
}

/// Mean NDCG@k of searching each query of `set` over all of its pages
/// through `head`, page `i` being the only relevant page for query `i`.
pub fn evaluate_head(head: &ProjectionHead, set: &TrainingSet, k: usize) -> Result<f64> {
    let projected = head.project_batch(set)?;
    let run = run_queries(&projected.queries, &projected.pages, k, Selector::Full)?;
    Ok(ndcg_at_k(&run, &set.qrels()?, k)?.mean)
}

/// Random gradient-check instance: `b` pairs of `d_in`-dim unit tokens,
/// queries of 3 tokens, pages with `level_sizes` tokens per level, and a
/// random `d_in x d_out` head.
pub fn random_gradcheck_instance(
    seed: u64,
    b: usize,
    d_in: usize,
    d_out: usize,
    level_sizes: &[usize],
) -> Result<(TrainingBatch, ProjectionHead)> {
    let mut rng = SplitMix64::new(seed);
    let mut rand_matrix = |rows: usize| {
        let data = (0..rows * d_in)
            .map(|_| rng.uniform(-1.0, 1.0) as f32)
            .collect();
        TokenMatrix::new(rows, d_in, data)
    };
    let mut queries = Vec::with_capacity(b);
    let mut pages = Vec::with_capacity(b);
    for i in 0..b {
        queries.push(QueryEmbedding::new(format!("q{i}"), rand_matrix(3)?)?);
        let segs = level_sizes
            .iter()
            .map(|&m| rand_matrix(m))
            .collect::<Result<Vec<_>>>()?;
        pages.push(NestedPageRep::from_segments(format!("p{i}"), segs)?);
    }
    let head = ProjectionHead::random(d_in, d_out, rng.next_u64());
    Ok((TrainingBatch::new(queries, pages)?, head))
}
