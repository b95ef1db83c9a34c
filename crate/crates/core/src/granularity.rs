//! Grid layouts defining the coarse-to-fine resolution hierarchy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `rows x cols` grid layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidGranularity(format!("expected RxC, got {s:?}"));
        let (r, c) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let rows: usize = r.parse().map_err(|_| bad())?;
        let cols: usize = c.parse().map_err(|_| bad())?;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGranularity(format!(
                "grid dimensions must be >= 1, got {s:?}"
            )));
        }
        Ok(Grid { rows, cols })
    }
}

/// Ordered grid levels, coarse to fine, strictly increasing in cell count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GranularitySpec {
    levels: Vec<Grid>,
}

impl GranularitySpec {
    pub fn new(levels: Vec<Grid>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidGranularity("no levels".into()));
        }
        if let Some(g) = levels.iter().find(|g| g.rows == 0 || g.cols == 0) {
            return Err(Error::InvalidGranularity(format!("empty grid {g}")));
        }
        for w in levels.windows(2) {
            if w[1].cells() <= w[0].cells() {
                return Err(Error::InvalidGranularity(format!(
                    "cell counts must strictly increase: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { levels })
    }

    /// `{1x1, 1x2, 2x2, 2x3}`.
    pub fn default_levels() -> Self {
        Self {
            levels: vec![
                Grid::new(1, 1),
                Grid::new(1, 2),
                Grid::new(2, 2),
                Grid::new(2, 3),
            ],
        }
    }

    pub fn levels(&self) -> &[Grid] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Total sub-image count `S` across all levels.
    pub fn total_regions(&self) -> usize {
        self.levels.iter().map(Grid::cells).sum()
    }

    /// True when the coarsest level is the single global view.
    pub fn has_global_view(&self) -> bool {
        self.levels[0] == Grid::new(1, 1)
    }
}

impl Default for GranularitySpec {
    fn default() -> Self {
        Self::default_levels()
    }
}

impl FromStr for GranularitySpec {
    type Err = Error;

    /// Grammar: `RxC(,RxC)*`.
    fn from_str(s: &str) -> Result<Self> {
        let levels = s
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<Grid>>>()?;
        Self::new(levels)
    }
}

impl fmt::Display for GranularitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.levels.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

impl TryFrom<String> for GranularitySpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GranularitySpec> for String {
    fn from(g: GranularitySpec) -> String {
        g.to_string()
    }
}
