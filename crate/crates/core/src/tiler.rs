//! Multi-resolution sampling: grid partition of a page plus a fixed-size
//! bilinear resize of every region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::granularity::{GranularitySpec, Grid};
use crate::image::PageImage;

/// Smallest accepted encoder input side, in pixels.
pub const MIN_TARGET_SIDE: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilerConfig {
    pub target_h: usize,
    pub target_w: usize,
    pub grids: GranularitySpec,
}

impl TilerConfig {
    pub fn new(target_h: usize, target_w: usize, grids: GranularitySpec) -> Result<Self> {
        if target_h < MIN_TARGET_SIDE || target_w < MIN_TARGET_SIDE {
            return Err(Error::InvalidConfig(format!(
                "target {target_h}x{target_w} below minimum side {MIN_TARGET_SIDE}"
            )));
        }
        Ok(Self {
            target_h,
            target_w,
            grids,
        })
    }
}

/// The resized regions of one grid level, row-major over the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubImageBatch {
    /// Zero-based level index.
    pub level_index: usize,
    pub grid: Grid,
    pub regions: Vec<PageImage>,
}

/// Cut points `floor(i * len / parts)` for `i = 0..=parts`.
pub(crate) fn cut_points(len: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|i| i * len / parts).collect()
}

/// Splits `image` into a `rows x cols` grid, row-major. Remainder pixels go
/// to later regions; regions tile the image with no gaps or overlap.
pub fn partition(image: &PageImage, rows: usize, cols: usize) -> Result<Vec<PageImage>> {
    let too_fine = || Error::GridTooFine {
        rows,
        cols,
        height: image.height(),
        width: image.width(),
    };
    if rows == 0 || cols == 0 || rows > image.height() || cols > image.width() {
        return Err(too_fine());
    }
    let ys = cut_points(image.height(), rows);
    let xs = cut_points(image.width(), cols);
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(image.crop(xs[c], ys[r], xs[c + 1], ys[r + 1])?);
        }
    }
    Ok(out)
}

/// Source coordinate and blend weight for output index `i` under half-pixel
/// centre alignment, clamped to the source edges.
#[inline]
fn source_coord(i: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let s = (i as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5;
    let s = s.clamp(0.0, (src_len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, s - i0 as f64)
}

/// Bilinear resize with half-pixel centres. Samples round to nearest with
/// ties away from zero.
pub fn resize(image: &PageImage, target_h: usize, target_w: usize) -> Result<PageImage> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::InvalidImage(format!(
            "resize target {target_h}x{target_w} is empty"
        )));
    }
    let xs: Vec<_> = (0..target_w)
        .map(|x| source_coord(x, image.width(), target_w))
        .collect();
    let ys: Vec<_> = (0..target_h)
        .map(|y| source_coord(y, image.height(), target_h))
        .collect();
    PageImage::from_fn(target_w, target_h, image.channels(), |x, y, c| {
        let (x0, x1, fx) = xs[x];
        let (y0, y1, fy) = ys[y];
        let p = |xx, yy| image.get(xx, yy, c) as f64;
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        let v = top * (1.0 - fy) + bottom * fy;
        v.round().clamp(0.0, 255.0) as u8
    })
}

/// Tiles and resizes the page for every level of `cfg.grids`.
pub fn sample_multires(image: &PageImage, cfg: &TilerConfig) -> Result<Vec<SubImageBatch>> {
    cfg.grids
        .levels()
        .iter()
        .enumerate()
        .map(|(level_index, &grid)| {
            let regions = partition(image, grid.rows, grid.cols)?
                .iter()
                .map(|r| resize(r, cfg.target_h, cfg.target_w))
                .collect::<Result<Vec<_>>>()?;
            Ok(SubImageBatch {
                level_index,
                grid,
                regions,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize, ch: usize) -> PageImage {
        PageImage::from_fn(w, h, ch, |x, y, c| ((x * 31 + y * 17 + c * 5) % 256) as u8).unwrap()
    }

    /// Reference interpolator written as a sum over a tent kernel rather
    /// than an explicit two-tap lerp.
    fn reference_resize_row(src: &[u8], dst_len: usize) -> Vec<u8> {
        let n = src.len();
        (0..dst_len)
            .map(|i| {
                let centre = ((i as f64 + 0.5) * n as f64 / dst_len as f64 - 0.5)
                    .max(0.0)
                    .min((n - 1) as f64);
                let v: f64 = src
                    .iter()
                    .enumerate()
                    .map(|(j, &s)| s as f64 * (1.0 - (centre - j as f64).abs()).max(0.0))
                    .sum();
                v.round() as u8
            })
            .collect()
    }

    #[test]
    fn partition_exact_division() {
        let img = ramp(60, 100, 1);
        let regions = partition(&img, 2, 3).unwrap();
        assert_eq!(regions.len(), 6);
        for r in &regions {
            assert_eq!((r.height(), r.width()), (50, 20));
        }
        assert_eq!(regions[4], img.crop(20, 50, 40, 100).unwrap());
    }

    #[test]
    fn partition_identity() {
        let img = ramp(7, 5, 3);
        assert_eq!(partition(&img, 1, 1).unwrap(), vec![img]);
    }

    #[test]
    fn partition_floor_boundaries() {
        let img = ramp(5, 3, 1);
        let widths: Vec<_> = partition(&img, 1, 2)
            .unwrap()
            .iter()
            .map(|r| r.width())
            .collect();
        assert_eq!(widths, vec![2, 3]);
        assert_eq!(cut_points(5, 2), vec![0, 2, 5]);
    }

    #[test]
    fn partition_too_fine() {
        let img = ramp(3, 2, 1);
        assert!(matches!(
            partition(&img, 3, 1),
            Err(Error::GridTooFine { .. })
        ));
        assert!(matches!(
            partition(&img, 1, 4),
            Err(Error::GridTooFine { .. })
        ));
    }

    #[test]
    fn resize_constant() {
        let img = PageImage::filled(13, 7, &[77, 3, 250]).unwrap();
        let out = resize(&img, 32, 24).unwrap();
        assert_eq!(out, PageImage::filled(24, 32, &[77, 3, 250]).unwrap());
    }

    #[test]
    fn resize_identity_checkerboard() {
        let img = PageImage::new(2, 2, 1, vec![0, 255, 255, 0]).unwrap();
        assert_eq!(resize(&img, 2, 2).unwrap(), img);
    }

    #[test]
    fn resize_upsample_matches_reference() {
        let img = PageImage::new(2, 1, 1, vec![0, 255]).unwrap();
        let out = resize(&img, 1, 4).unwrap();
        let expect = reference_resize_row(&[0, 255], 4);
        assert_eq!(expect, vec![0, 64, 191, 255]);
        assert_eq!(out.pixels(), &expect[..]);
    }

    #[test]
    fn multires_counts() {
        let img = ramp(96, 64, 1);
        let cfg = TilerConfig::new(16, 16, GranularitySpec::default()).unwrap();
        let batches = sample_multires(&img, &cfg).unwrap();
        assert_eq!(batches.len(), 4);
        let s: usize = batches.iter().map(|b| b.regions.len()).sum();
        assert_eq!(s, 13);
        assert_eq!(s * 1024, 13312);
        assert!(batches
            .iter()
            .flat_map(|b| &b.regions)
            .all(|r| r.width() == 16 && r.height() == 16));

        let single = TilerConfig::new(16, 16, "1x1".parse().unwrap()).unwrap();
        assert_eq!(sample_multires(&img, &single).unwrap()[0].regions.len(), 1);
    }

    #[test]
    fn small_target_rejected() {
        assert!(TilerConfig::new(7, 64, GranularitySpec::default()).is_err());
    }

    proptest! {
        #[test]
        fn regions_reassemble_page(w in 1usize..40, h in 1usize..40, rows in 1usize..5, cols in 1usize..5, ch in prop::sample::select(vec![1usize, 3])) {
            prop_assume!(rows <= h && cols <= w);
            let img = ramp(w, h, ch);
            let regions = partition(&img, rows, cols).unwrap();
            let ys = cut_points(h, rows);
            let xs = cut_points(w, cols);
            let rebuilt = PageImage::from_fn(w, h, ch, |x, y, c| {
                let r = ys.partition_point(|&b| b <= y) - 1;
                let k = xs.partition_point(|&b| b <= x) - 1;
                regions[r * cols + k].get(x - xs[k], y - ys[r], c)
            }).unwrap();
            prop_assert_eq!(rebuilt, img);
        }

        #[test]
        fn resize_rows_match_reference(src in prop::collection::vec(any::<u8>(), 1..12), dst in 1usize..30) {
            let img = PageImage::new(src.len(), 1, 1, src.clone()).unwrap();
            let out = resize(&img, 1, dst).unwrap();
            prop_assert_eq!(out.pixels(), &reference_resize_row(&src, dst)[..]);
        }
    }
}
