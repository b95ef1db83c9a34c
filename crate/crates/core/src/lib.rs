//! Multi-resolution, multi-vector page retrieval.
//!
//! Pages are tiled at several grid granularities, each region is encoded
//! into token embeddings, and the per-level token sets are concatenated
//! coarse to fine so every prefix is itself a usable representation.
//! Queries are scored with MaxSim late interaction; page token sets can be
//! compressed to a fixed budget with agglomerative clustering, persisted in
//! a checksummed binary index, and evaluated with NDCG@K. A small
//! contrastive trainer fits a projection head with a level-weighted InfoNCE
//! objective.

pub mod compressor;
pub mod encoder;
pub mod error;
pub mod evalkit;
pub mod granularity;
pub mod image;
pub mod index;
pub mod matrix;
pub mod mvtx;
pub mod representation;
pub mod rng;
pub mod scorer;
pub mod synth;
pub mod tiler;
pub mod trainer;

pub use compressor::{
    compress_corpus, compress_page, hac_compress, CompressedPage, CompressionConfig,
    CompressionScope,
};
pub use encoder::{
    encode_page, ingest_external, toy_encode, EncoderBackend, ToyEncoder, ToyEncoderConfig,
};
pub use error::{Error, Result};
pub use evalkit::{
    budget_sweep, combined_selector, ndcg_at_k, NdcgReport, OracleTable, RelevanceJudgments,
    RetrievalRun, SweepRow,
};
pub use granularity::{GranularitySpec, Grid};
pub use image::PageImage;
pub use index::{build_index, load_index, storage_report, Index, IndexManifest, StorageReport};
pub use matrix::{l2_normalize, validate_token_matrix, QueryEmbedding, TokenMatrix, TokenView};
pub use representation::NestedPageRep;
pub use rng::SplitMix64;
pub use scorer::{
    contribution, maxsim, maxsim_at_level, search, ContributionReport, ScoredPage, Selector,
};
pub use synth::{gen_corpus, gen_images, SynthConfig, SynthCorpus};
pub use tiler::{partition, resize, sample_multires, SubImageBatch, TilerConfig};
pub use trainer::{
    level_loss, total_loss, train_toy, HeadObjective, ProjectionHead, TrainingBatch, TrainingConfig,
};
