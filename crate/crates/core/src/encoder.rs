//! The encoder boundary: sub-image batches in, per-level token matrices out.
//!
//! Real vision-language encoders live outside this crate. Their embeddings
//! come in through [`ingest_external`]; [`ToyEncoder`] is a deterministic
//! stand-in that keeps the whole pipeline runnable and testable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::granularity::GranularitySpec;
use crate::image::PageImage;
use crate::matrix::{l2_normalize_f64, validate_token_matrix, TokenMatrix};
use crate::mvtx;
use crate::representation::NestedPageRep;
use crate::rng::SplitMix64;
use crate::tiler::{cut_points, sample_multires, SubImageBatch, TilerConfig};

pub const DEFAULT_DIM: usize = 128;

/// Turns one level's sub-images into `regions * tokens_per_region()` unit
/// rows, region-major. Implementations must be shareable across threads.
pub trait EncoderBackend: Send + Sync {
    fn encode(&self, batch: &SubImageBatch) -> Result<TokenMatrix>;

    /// Atomic tokens emitted per sub-image (`p`).
    fn tokens_per_region(&self) -> usize;

    fn dim(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyEncoderConfig {
    /// Patches per side; `p = patch_grid^2`.
    pub patch_grid: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for ToyEncoderConfig {
    fn default() -> Self {
        Self {
            patch_grid: 4,
            dim: DEFAULT_DIM,
            seed: 0,
        }
    }
}

/// Patch-mean colour features pushed through a fixed random projection.
#[derive(Debug, Clone)]
pub struct ToyEncoder {
    cfg: ToyEncoderConfig,
    /// `3 x dim`, row-major; grayscale inputs use the first row only.
    projection: Vec<f64>,
    input_size: Option<(usize, usize)>,
}

impl ToyEncoder {
    pub fn new(cfg: ToyEncoderConfig) -> Result<Self> {
        if cfg.patch_grid == 0 {
            return Err(Error::InvalidConfig("patch_grid must be >= 1".into()));
        }
        if cfg.dim < 2 {
            return Err(Error::InvalidConfig("toy encoder dim must be >= 2".into()));
        }
        let mut rng = SplitMix64::new(cfg.seed);
        let projection = (0..3 * cfg.dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Ok(Self {
            cfg,
            projection,
            input_size: None,
        })
    }

    /// Restricts accepted sub-images to `height x width`.
    pub fn with_input_size(mut self, height: usize, width: usize) -> Self {
        self.input_size = Some((height, width));
        self
    }

    pub fn config(&self) -> &ToyEncoderConfig {
        &self.cfg
    }

    /// Encodes one sub-image into `patch_grid^2` unit rows (row-major patches).
    pub fn encode_image(&self, sub: &PageImage) -> Result<TokenMatrix> {
        if let Some((h, w)) = self.input_size {
            if (sub.height(), sub.width()) != (h, w) {
                return Err(Error::InvalidImage(format!(
                    "DimensionMismatch: expected {h}x{w} sub-image, got {}x{}",
                    sub.height(),
                    sub.width()
                )));
            }
        }
        let g = self.cfg.patch_grid;
        if g > sub.height() || g > sub.width() {
            return Err(Error::GridTooFine {
                rows: g,
                cols: g,
                height: sub.height(),
                width: sub.width(),
            });
        }
        let d = self.cfg.dim;
        let ch = sub.channels();
        let ys = cut_points(sub.height(), g);
        let xs = cut_points(sub.width(), g);
        let mut data = Vec::with_capacity(g * g * d);
        let mut row = vec![0.0f64; d];
        for pr in 0..g {
            for pc in 0..g {
                let mut feature = [0.0f64; 3];
                for y in ys[pr]..ys[pr + 1] {
                    for x in xs[pc]..xs[pc + 1] {
                        for (c, f) in feature.iter_mut().enumerate().take(ch) {
                            *f += sub.get(x, y, c) as f64;
                        }
                    }
                }
                let count = ((ys[pr + 1] - ys[pr]) * (xs[pc + 1] - xs[pc])) as f64;
                row.iter_mut().for_each(|v| *v = 0.0);
                for (c, f) in feature.iter().enumerate().take(ch) {
                    let f = f / count / 255.0;
                    for (j, v) in row.iter_mut().enumerate() {
                        *v += f * self.projection[c * d + j];
                    }
                }
                if !l2_normalize_f64(&mut row) {
                    return Err(Error::ZeroNormRow(pr * g + pc));
                }
                data.extend(row.iter().map(|&v| v as f32));
            }
        }
        TokenMatrix::new(g * g, d, data)
    }
}

impl EncoderBackend for ToyEncoder {
    fn encode(&self, batch: &SubImageBatch) -> Result<TokenMatrix> {
        let p = self.tokens_per_region();
        let mut parts = Vec::with_capacity(batch.regions.len());
        for (i, region) in batch.regions.iter().enumerate() {
            parts.push(self.encode_image(region).map_err(|e| match e {
                Error::ZeroNormRow(r) => Error::ZeroNormRow(i * p + r),
                other => other,
            })?);
        }
        TokenMatrix::concat(self.cfg.dim, &parts)
    }

    fn tokens_per_region(&self) -> usize {
        self.cfg.patch_grid * self.cfg.patch_grid
    }

    fn dim(&self) -> usize {
        self.cfg.dim
    }
}

/// Encodes a single sub-image with a fresh toy encoder.
pub fn toy_encode(sub: &PageImage, cfg: ToyEncoderConfig) -> Result<TokenMatrix> {
    ToyEncoder::new(cfg)?.encode_image(sub)
}

/// Checks a backend's output contract on one batch: row count, dim and
/// unit-norm rows.
pub fn check_backend_output(
    backend: &dyn EncoderBackend,
    batch: &SubImageBatch,
) -> Result<TokenMatrix> {
    let m = backend.encode(batch)?;
    let expected_rows = batch.regions.len() * backend.tokens_per_region();
    if m.rows() != expected_rows {
        return Err(Error::InvalidConfig(format!(
            "backend emitted {} rows for {} regions x {} tokens",
            m.rows(),
            batch.regions.len(),
            backend.tokens_per_region()
        )));
    }
    if m.dim() != backend.dim() {
        return Err(Error::DimMismatch {
            expected: backend.dim(),
            found: m.dim(),
        });
    }
    if !m.is_normalized(1e-4) {
        return Err(Error::InvalidConfig("backend emitted non-unit rows".into()));
    }
    Ok(m)
}

/// Tiles the page at every level and encodes each level's batch, producing
/// the coarse-to-fine nested representation.
pub fn encode_page(
    page_id: impl Into<String>,
    image: &PageImage,
    tiler: &TilerConfig,
    backend: &dyn EncoderBackend,
) -> Result<NestedPageRep> {
    let segments = sample_multires(image, tiler)?
        .iter()
        .map(|b| check_backend_output(backend, b))
        .collect::<Result<Vec<_>>>()?;
    NestedPageRep::from_segments(page_id, segments)
}

/// Builds a nested representation from externally computed per-level token
/// matrices (one MVTX file per level, coarse to fine).
pub fn ingest_external<P: AsRef<Path>>(
    page_id: impl Into<String>,
    per_level_files: &[P],
    spec: &GranularitySpec,
) -> Result<NestedPageRep> {
    if per_level_files.len() != spec.len() {
        return Err(Error::LevelCountMismatch {
            expected: spec.len(),
            found: per_level_files.len(),
        });
    }
    let mut segments = Vec::with_capacity(per_level_files.len());
    for f in per_level_files {
        let m = mvtx::read(f.as_ref())?;
        if let Some(first) = segments.first().map(TokenMatrix::dim) {
            if m.dim() != first {
                return Err(Error::DimMismatch {
                    expected: first,
                    found: m.dim(),
                });
            }
        }
        segments.push(validate_token_matrix(m)?);
    }
    NestedPageRep::from_segments(page_id, segments)
}
