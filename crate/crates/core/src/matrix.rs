//! Token matrices: the row-major `f32` storage every other module trades in.
//!
//! Similarity everywhere is a raw dot product between unit rows, so cosine
//! similarity and the late-interaction dot product are the same operator.
//! Norms and dot products accumulate in `f64`.

use crate::error::{Error, Result};

/// Rows whose norm is already within this distance of 1 are left untouched
/// by normalization, which makes normalization idempotent bit-for-bit.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// An `rows x dim` matrix of finite `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

/// Borrowed, row-major view over a contiguous block of token rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenView<'a> {
    rows: usize,
    dim: usize,
    data: &'a [f32],
}

impl TokenMatrix {
    /// Builds a matrix, checking shape and finiteness. Rows are not normalized.
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.len() != rows * dim {
            return Err(Error::ShapeMismatch {
                rows,
                dim,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteEntry(i));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f32>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(0, dim, Vec::new())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn view(&self) -> TokenView<'_> {
        TokenView {
            rows: self.rows,
            dim: self.dim,
            data: &self.data,
        }
    }

    /// True when every row norm is within `tol` of 1.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.view().is_normalized(tol)
    }

    /// Stacks matrices vertically. All parts must share `dim`.
    pub fn concat(dim: usize, parts: &[TokenMatrix]) -> Result<Self> {
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        let mut rows = 0;
        for p in parts {
            if p.dim != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: p.dim,
                });
            }
            rows += p.rows;
            data.extend_from_slice(&p.data);
        }
        Self::new(rows, dim, data)
    }
}

impl<'a> TokenView<'a> {
    pub fn new(rows: usize, dim: usize, data: &'a [f32]) -> Result<Self> {
        if dim == 0 || data.len() != rows * dim {
            return Err(Error::ShapeMismatch {
                rows,
                dim,
                len: data.len(),
            });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &'a [f32] {
        self.data
    }

    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &'a [f32]> + 'a {
        self.data.chunks_exact(self.dim)
    }

    /// Leading `rows` rows.
    pub fn prefix(&self, rows: usize) -> TokenView<'a> {
        let rows = rows.min(self.rows);
        TokenView {
            rows,
            dim: self.dim,
            data: &self.data[..rows * self.dim],
        }
    }

    pub fn to_matrix(&self) -> TokenMatrix {
        TokenMatrix {
            rows: self.rows,
            dim: self.dim,
            data: self.data.to_vec(),
        }
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.iter_rows().all(|r| (norm(r) - 1.0).abs() <= tol)
    }
}

/// Dot product accumulated in `f64`, in index order.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (&x, &y)| acc + x as f64 * y as f64)
}

#[inline]
pub fn norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit L2 norm. Vectors already within [`UNIT_TOLERANCE`]
/// of unit norm are returned unchanged.
pub fn l2_normalize(v: &[f32]) -> Result<Vec<f32>> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry(i));
    }
    let n = norm(v);
    if n == 0.0 {
        return Err(Error::ZeroNormRow(0));
    }
    if (n - 1.0).abs() <= UNIT_TOLERANCE {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|&x| (x as f64 / n) as f32).collect())
}

/// `f64` twin of [`l2_normalize`], in place. Returns `false` on a zero vector.
pub(crate) fn l2_normalize_f64(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        v.iter_mut().for_each(|x| *x /= n);
    }
    true
}

/// Normalizes every row to unit norm, rejecting zero rows and non-finite
/// entries. Rows that are already unit norm come back bit-identical.
pub fn validate_token_matrix(m: TokenMatrix) -> Result<TokenMatrix> {
    let dim = m.dim;
    if let Some(i) = m.data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry(i));
    }
    let mut data = m.data;
    for (r, row) in data.chunks_exact_mut(dim).enumerate() {
        let n = norm(row);
        if n == 0.0 {
            return Err(Error::ZeroNormRow(r));
        }
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            row.iter_mut().for_each(|x| *x = (*x as f64 / n) as f32);
        }
    }
    Ok(TokenMatrix {
        rows: m.rows,
        dim,
        data,
    })
}

/// A query's token embeddings. Always at least one unit-norm row.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEmbedding {
    pub query_id: String,
    tokens: TokenMatrix,
}

impl QueryEmbedding {
    pub fn new(query_id: impl Into<String>, tokens: TokenMatrix) -> Result<Self> {
        if tokens.rows() == 0 {
            return Err(Error::EmptyQuery);
        }
        Ok(Self {
            query_id: query_id.into(),
            tokens: validate_token_matrix(tokens)?,
        })
    }

    pub fn tokens(&self) -> &TokenMatrix {
        &self.tokens
    }

    pub fn view(&self) -> TokenView<'_> {
        self.tokens.view()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalizes_three_four() {
        let m = TokenMatrix::new(1, 2, vec![3.0, 4.0]).unwrap();
        let v = validate_token_matrix(m).unwrap();
        assert_eq!(v.row(0), &[0.6f32, 0.8]);
    }

    #[test]
    fn unit_rows_untouched() {
        let data = vec![0.6f32, 0.8, 1.0, 0.0, 0.0, -1.0];
        let m = TokenMatrix::new(3, 2, data.clone()).unwrap();
        let v = validate_token_matrix(m).unwrap();
        assert_eq!(v.data(), &data[..]);
    }

    #[test]
    fn zero_row_rejected() {
        let m = TokenMatrix::new(2, 2, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            validate_token_matrix(m),
            Err(Error::ZeroNormRow(0))
        ));
        let m = TokenMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            validate_token_matrix(m),
            Err(Error::ZeroNormRow(1))
        ));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            TokenMatrix::new(1, 2, vec![1.0, f32::NAN]),
            Err(Error::NonFiniteEntry(1))
        ));
        assert!(matches!(
            l2_normalize(&[f32::INFINITY]),
            Err(Error::NonFiniteEntry(0))
        ));
    }

    #[test]
    fn shape_checked() {
        assert!(TokenMatrix::new(2, 3, vec![0.0; 5]).is_err());
        assert!(TokenMatrix::new(0, 0, vec![]).is_err());
        assert!(TokenMatrix::new(0, 4, vec![]).is_ok());
    }

    #[test]
    fn l2_normalize_examples() {
        assert_eq!(l2_normalize(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(l2_normalize(&[2.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let h = l2_normalize(&[1.0, 1.0]).unwrap();
        for x in h {
            assert!((x as f64 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7);
        }
        assert!(matches!(
            l2_normalize(&[0.0, 0.0]),
            Err(Error::ZeroNormRow(_))
        ));
    }

    #[test]
    fn empty_query_rejected() {
        let m = TokenMatrix::empty(4).unwrap();
        assert!(matches!(
            QueryEmbedding::new("q", m),
            Err(Error::EmptyQuery)
        ));
    }

    fn arb_matrix() -> impl Strategy<Value = TokenMatrix> {
        (1usize..6, 1usize..10).prop_flat_map(|(rows, dim)| {
            prop::collection::vec(-100.0f32..100.0, rows * dim)
                .prop_filter("nonzero rows", move |d| {
                    d.chunks(dim).all(|r| r.iter().any(|x| x.abs() > 1e-3))
                })
                .prop_map(move |d| TokenMatrix::new(rows, dim, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn normalization_idempotent(m in arb_matrix()) {
            let once = validate_token_matrix(m).unwrap();
            let twice = validate_token_matrix(once.clone()).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.is_normalized(UNIT_TOLERANCE));
        }

        #[test]
        fn dot_of_unit_rows_bounded(a in arb_matrix(), b in arb_matrix()) {
            let a = validate_token_matrix(a).unwrap();
            let b = validate_token_matrix(b).unwrap();
            if a.dim() == b.dim() {
                for ra in a.view().iter_rows() {
                    for rb in b.view().iter_rows() {
                        let s = dot(ra, rb);
                        prop_assert!((-1.0 - 1e-5..=1.0 + 1e-5).contains(&s));
                    }
                }
            }
        }
    }
}
