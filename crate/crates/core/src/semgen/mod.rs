//! Semantic generation: structured tables, prompt templates, n-sample
//! semanticization, and the mean-centrality selector.

use thiserror::Error;

use crate::diagnose::provider::ProviderError;

pub mod embed;
pub mod prompt;
pub mod selector;
pub mod table;

pub use embed::{Embedder, HashEmbedder, UnitVector, DEFAULT_EMBED_DIMS, DEFAULT_EMBED_SEED};
pub use prompt::{
    build_semantic_prompt, build_symbolic_prompt, Demonstration, PromptTemplate, PromptVariant,
};
pub use selector::{
    mean_centrality, sample_semantics, select_best, similarity_matrix, CentralityScores,
    SemanticText, SimilarityMatrix,
};
pub use table::{render_table, StructuredTable};

#[derive(Debug, Error)]
pub enum SemGenError {
    #[error("window excludes all rows")]
    EmptySelection,

    #[error("self-heuristic prompt requires knowledge snippets and device context")]
    MissingContext,

    #[error("symbolic prompt requires at least one demonstration")]
    NoDemonstrations,

    #[error("cannot embed empty text")]
    EmptyText,

    #[error("vector dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("vector component is not finite")]
    NonFiniteComponent,

    #[error("vector norm {0} is not within tolerance of 1")]
    NotUnitNorm(f64),

    #[error("similarity entry {0} outside [-1, 1]")]
    SimilarityOutOfRange(f64),

    #[error("similarity matrix asymmetric at ({i}, {j})")]
    AsymmetricSimilarity { i: usize, j: usize },

    #[error("similarity diagonal at {index} is {value}, expected 1")]
    BadDiagonal { index: usize, value: f64 },

    #[error("need at least two texts, got {0}")]
    TooFewTexts(usize),

    #[error("text list is empty")]
    EmptyList,

    #[error("provider failed at sample {sample_index}: {source}")]
    Provider {
        sample_index: usize,
        source: ProviderError,
    },
}
