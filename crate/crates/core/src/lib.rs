//! Directional word-relatedness evaluation.
//!
//! Conditional likelihoods `P(b|a)` come from three kinds of resources:
//! free-association counts ([`evocation`]), static embeddings
//! ([`embedding`]) and masked language models scored over corpus contexts
//! ([`corpus`], [`lm`]). [`metrics`] compares them through the log asymmetry
//! ratio, its per-relation mean, rank correlation and directional accuracy.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! name the common instantiations.

pub mod conditional;
pub mod convert;
pub mod corpus;
pub mod embedding;
pub mod evocation;
pub mod lm;
pub mod metrics;
pub mod pair;
pub mod relations;
pub mod scalar;

pub use conditional::{ConditionalTable, TableError};
pub use corpus::{build_index, ContextRecord, IndexConfig, PairContexts, ParagraphSplit, ParagraphStore};
pub use embedding::{DualVectorTable, ProjectionSpace, StaticConditionals, VectorError, VectorTable};
pub use evocation::{clean_pair_filter, ingest_evocation, EvocationDataset, EvocationError};
pub use lm::{LmError, PairEstimate, ScoreResult, Scorer, ScoringTask};
pub use metrics::{
    alar, cam, directional_accuracy, geometric_mean_similarity, lar, spearman, LarMap, MetricError, MetricReport,
};
pub use pair::{normalize_word, OrderedPair, WordPair};
pub use relations::{build_pair_sets, KgEdge, RelationPairSet, FALLBACK_RELATION};
pub use scalar::Real;

pub type VectorTableF32 = VectorTable<f32>;
pub type VectorTableF64 = VectorTable<f64>;
pub type ConditionalTableF32 = ConditionalTable<f32>;
pub type ConditionalTableF64 = ConditionalTable<f64>;
pub type LarMapF32 = LarMap<f32>;
pub type LarMapF64 = LarMap<f64>;

/// Version string written into output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
