//! Persistent page index: `manifest.json` plus one MVTX file per page under
//! `docs/<page_id>.mvtx`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compressor::{compress_page, CompressionConfig, CompressionScope};
use crate::encoder::ToyEncoderConfig;
use crate::error::{Error, Result};
use crate::granularity::GranularitySpec;
use crate::matrix::{validate_token_matrix, QueryEmbedding, TokenMatrix, TokenView};
use crate::mvtx;
use crate::representation::NestedPageRep;
use crate::scorer::{Searchable, Selector};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DOCS_DIR: &str = "docs";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Uncompressed nested pages; per-level boundaries are kept.
    Full,
    Tokens(usize),
}

impl Serialize for Budget {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Budget::Full => s.serialize_str("full"),
            Budget::Tokens(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Budget {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Tokens(usize),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Tokens(n) if n > 0 => Ok(Budget::Tokens(n)),
            Raw::Name(s) if s == "full" => Ok(Budget::Full),
            _ => Err(serde::de::Error::custom(
                "budget must be a positive integer or \"full\"",
            )),
        }
    }
}

/// Where the stored embeddings came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EncoderDescriptor {
    Toy {
        #[serde(flatten)]
        config: ToyEncoderConfig,
        target_h: usize,
        target_w: usize,
    },
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageEntry {
    pub page_id: String,
    pub file: String,
    pub rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<GranularitySpec>,
    pub budget: Budget,
    #[serde(default)]
    pub scope: CompressionScope,
    pub encoder: EncoderDescriptor,
    pub pages: Vec<PageEntry>,
}

/// How to build an index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexOptions {
    pub budget: Budget,
    pub scope: CompressionScope,
    pub grids: Option<GranularitySpec>,
    pub encoder: EncoderDescriptor,
    /// Dimension recorded for an empty corpus.
    pub dim: Option<usize>,
}

impl IndexOptions {
    pub fn new(budget: Budget) -> Self {
        Self {
            budget,
            scope: CompressionScope::WholeSequence,
            grids: None,
            encoder: EncoderDescriptor::External,
            dim: None,
        }
    }
}

/// One stored page of a loaded index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedPage {
    pub page_id: String,
    pub tokens: TokenMatrix,
    pub boundaries: Option<Vec<usize>>,
}

impl Searchable for IndexedPage {
    fn page_id(&self) -> &str {
        &self.page_id
    }

    fn tokens_at(&self, selector: Selector) -> Result<TokenView<'_>> {
        match (selector, &self.boundaries) {
            (Selector::Full, _) => Ok(self.tokens.view()),
            (Selector::Level(k), Some(b)) if k >= 1 && k <= b.len() => {
                Ok(self.tokens.view().prefix(b[k - 1]))
            }
            (Selector::Level(level), b) => Err(Error::LevelOutOfRange {
                level,
                levels: b.as_ref().map_or(0, Vec::len),
            }),
        }
    }
}

/// A loaded, validated, immutable index.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    pub manifest: IndexManifest,
    pub pages: Vec<IndexedPage>,
    root: PathBuf,
}

impl Index {
    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Stored pages as nested representations. Requires an uncompressed index.
    pub fn nested_pages(&self) -> Result<Vec<NestedPageRep>> {
        self.pages
            .iter()
            .map(|p| {
                let b = p.boundaries.clone().ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "page {} has no level boundaries (compressed index?)",
                        p.page_id
                    ))
                })?;
                NestedPageRep::from_parts(p.page_id.clone(), p.tokens.clone(), b)
            })
            .collect()
    }
}

/// Rejects ids that cannot be used verbatim as file names.
pub fn check_page_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "page id {id:?} is not file-name safe"
        )))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `corpus` (compressed to `opts.budget`) under `out_dir`.
pub fn build_index(
    corpus: &[NestedPageRep],
    out_dir: &Path,
    opts: &IndexOptions,
) -> Result<IndexManifest> {
    let dim = corpus
        .first()
        .map(NestedPageRep::dim)
        .or(opts.dim)
        .unwrap_or(1);
    let mut seen = std::collections::BTreeSet::new();
    for p in corpus {
        check_page_id(&p.page_id)?;
        if !seen.insert(p.page_id.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "duplicate page id {}",
                p.page_id
            )));
        }
        if p.dim() != dim {
            return Err(Error::InconsistentDim {
                page: p.page_id.clone(),
                expected: dim,
                found: p.dim(),
            });
        }
    }
    let docs = out_dir.join(DOCS_DIR);
    fs::create_dir_all(&docs).map_err(|e| Error::io(&docs, e))?;

    let pages = corpus
        .par_iter()
        .map(|p| {
            let file = format!("{DOCS_DIR}/{}.mvtx", p.page_id);
            let (tokens, boundaries, provenance) = match opts.budget {
                Budget::Full => (p.tokens().clone(), Some(p.boundaries().to_vec()), None),
                Budget::Tokens(n) => {
                    let cfg = CompressionConfig {
                        budget: n,
                        scope: opts.scope,
                    };
                    let c = compress_page(p, &cfg)?;
                    (c.centroids, None, c.provenance)
                }
            };
            mvtx::write(&out_dir.join(&file), &tokens)?;
            Ok(PageEntry {
                page_id: p.page_id.clone(),
                file,
                rows: tokens.rows(),
                boundaries,
                provenance,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = IndexManifest {
        format_version: FORMAT_VERSION,
        dim,
        grids: opts.grids.clone(),
        budget: opts.budget,
        scope: opts.scope,
        encoder: opts.encoder.clone(),
        pages,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<IndexManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: IndexManifest =
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if m.format_version != FORMAT_VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported format_version {}", m.format_version),
        ));
    }
    Ok(m)
}

/// Loads and validates every page listed in `dir/manifest.json`.
pub fn load_index(dir: &Path) -> Result<Index> {
    let manifest = read_manifest(dir)?;
    let mut seen = std::collections::BTreeSet::new();
    for e in &manifest.pages {
        check_page_id(&e.page_id)?;
        if !seen.insert(e.page_id.as_str()) {
            return Err(Error::format(
                dir.join(MANIFEST_FILE),
                format!("duplicate page id {}", e.page_id),
            ));
        }
    }
    let pages = manifest
        .pages
        .par_iter()
        .map(|e| {
            let path = dir.join(&e.file);
            let m = mvtx::read(&path)?;
            if m.dim() != manifest.dim {
                return Err(Error::InconsistentDim {
                    page: e.page_id.clone(),
                    expected: manifest.dim,
                    found: m.dim(),
                });
            }
            if m.rows() != e.rows {
                return Err(Error::format(
                    &path,
                    format!("manifest lists {} rows, file has {}", e.rows, m.rows()),
                ));
            }
            if let Some(b) = &e.boundaries {
                let ok = !b.is_empty()
                    && b.windows(2).all(|w| w[0] <= w[1])
                    && b.last() == Some(&m.rows());
                if !ok {
                    return Err(Error::format(
                        &path,
                        format!("boundaries {b:?} do not fit {} rows", m.rows()),
                    ));
                }
            }
            Ok(IndexedPage {
                page_id: e.page_id.clone(),
                tokens: validate_token_matrix(m)?,
                boundaries: e.boundaries.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Index {
        manifest,
        pages,
        root: dir.to_path_buf(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageReport {
    pub pages: usize,
    /// Payload bytes (token values only) across all page files.
    pub data_bytes: u64,
    /// Payload plus per-file header and checksum.
    pub file_bytes: u64,
    pub bytes_per_page: f64,
    pub tokens_per_page: f64,
}

pub fn storage_report(index: &Index) -> StorageReport {
    let pages = index.pages.len();
    let tokens: usize = index.pages.iter().map(|p| p.tokens.rows()).sum();
    let data_bytes: u64 = index
        .pages
        .iter()
        .map(|p| (p.tokens.data().len() * 4) as u64)
        .sum();
    let file_bytes = data_bytes + (pages * (mvtx::HEADER_LEN + mvtx::TRAILER_LEN)) as u64;
    let per = |x: f64| if pages == 0 { 0.0 } else { x / pages as f64 };
    StorageReport {
        pages,
        data_bytes,
        file_bytes,
        bytes_per_page: per(data_bytes as f64),
        tokens_per_page: per(tokens as f64),
    }
}

/// Writes each query as `<dir>/<query_id>.mvtx`.
pub fn write_query_dir(dir: &Path, queries: &[QueryEmbedding]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for q in queries {
        check_page_id(&q.query_id)?;
        mvtx::write(&dir.join(format!("{}.mvtx", q.query_id)), q.tokens())?;
    }
    Ok(())
}

/// Reads every `*.mvtx` in `dir` as a query named by its file stem,
/// sorted by id.
pub fn read_query_dir(dir: &Path) -> Result<Vec<QueryEmbedding>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mvtx"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            QueryEmbedding::new(id, mvtx::read(p)?)
        })
        .collect()
}
