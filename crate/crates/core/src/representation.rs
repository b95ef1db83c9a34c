//! Nested multi-level page representations.
//!
//! A page's tokens are stored as one contiguous coarse-to-fine concatenation
//! of per-level segments, so the level-`k` representation is simply the
//! leading `boundaries[k-1]` rows.

use crate::error::{Error, Result};
use crate::matrix::{validate_token_matrix, TokenMatrix, TokenView};

#[derive(Debug, Clone, PartialEq)]
pub struct NestedPageRep {
    pub page_id: String,
    tokens: TokenMatrix,
    /// Cumulative row counts; `boundaries[k-1]` = rows in levels `1..=k`.
    boundaries: Vec<usize>,
}

impl NestedPageRep {
    /// Concatenates per-level segments (coarse to fine). Every segment must
    /// share one dimension; rows are validated and normalized.
    pub fn from_segments(page_id: impl Into<String>, segments: Vec<TokenMatrix>) -> Result<Self> {
        let dim = segments
            .first()
            .map(TokenMatrix::dim)
            .ok_or(Error::LevelCountMismatch {
                expected: 1,
                found: 0,
            })?;
        let mut boundaries = Vec::with_capacity(segments.len());
        let mut total = 0;
        for s in &segments {
            if s.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            total += s.rows();
            boundaries.push(total);
        }
        let tokens = validate_token_matrix(TokenMatrix::concat(dim, &segments)?)?;
        Ok(Self {
            page_id: page_id.into(),
            tokens,
            boundaries,
        })
    }

    /// Rebuilds a representation from a concatenated matrix and its
    /// cumulative boundaries.
    pub fn from_parts(
        page_id: impl Into<String>,
        tokens: TokenMatrix,
        boundaries: Vec<usize>,
    ) -> Result<Self> {
        let ok = !boundaries.is_empty()
            && boundaries.windows(2).all(|w| w[0] <= w[1])
            && boundaries.last() == Some(&tokens.rows());
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "boundaries {boundaries:?} inconsistent with {} rows",
                tokens.rows()
            )));
        }
        Ok(Self {
            page_id: page_id.into(),
            tokens: validate_token_matrix(tokens)?,
            boundaries,
        })
    }

    pub fn levels(&self) -> usize {
        self.boundaries.len()
    }

    pub fn dim(&self) -> usize {
        self.tokens.dim()
    }

    pub fn total_tokens(&self) -> usize {
        self.tokens.rows()
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// The full concatenation `D^(L)`.
    pub fn tokens(&self) -> &TokenMatrix {
        &self.tokens
    }

    fn check_level(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.levels() {
            return Err(Error::LevelOutOfRange {
                level: k,
                levels: self.levels(),
            });
        }
        Ok(())
    }

    /// Rows belonging to level `k` alone (1-based).
    pub fn segment(&self, k: usize) -> Result<TokenView<'_>> {
        self.check_level(k)?;
        let start = if k == 1 { 0 } else { self.boundaries[k - 2] };
        let end = self.boundaries[k - 1];
        let dim = self.dim();
        TokenView::new(
            end - start,
            dim,
            &self.tokens.data()[start * dim..end * dim],
        )
    }

    /// Level-`k` nested representation: segments `1..=k` concatenated.
    pub fn nested_at(&self, k: usize) -> Result<TokenView<'_>> {
        self.check_level(k)?;
        Ok(self.tokens.view().prefix(self.boundaries[k - 1]))
    }

    /// 1-based level that owns token `index` (half-open level intervals).
    pub fn level_of_token(&self, index: usize) -> Result<usize> {
        if index >= self.total_tokens() {
            return Err(Error::IndexOutOfRange {
                index,
                total: self.total_tokens(),
            });
        }
        Ok(self.boundaries.partition_point(|&b| b <= index) + 1)
    }
}
