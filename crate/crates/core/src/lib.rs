//! PCA-based static dimension pruning for dense-retrieval embedding indexes.
//!
//! The pipeline: fit an uncentered PCA on document embeddings
//! ([`pca::fit_pca`]), keep the leading `m` principal directions at a cutoff
//! ([`pca::prune_model`]), project the corpus offline and each query at search
//! time, then retrieve exactly ([`index::search`]) and evaluate
//! ([`eval::evaluate_run`], [`stats::wilcoxon_signed_rank`]).

pub mod bench;
pub mod eigen;
pub mod error;
pub mod eval;
pub mod index;
pub mod io;
pub mod matrix;
pub mod pca;
pub mod stats;
pub mod synth;
pub mod workflow;

pub use eigen::{sym_eigendecomposition, EigenDecomposition};
pub use error::{Error, Result};
pub use eval::{EvalConfig, Gain, Metric, MetricReport, Qrels};
pub use index::{EmbeddingIndex, Precision, Ranking, ScoredHit};
pub use matrix::{gram_matrix, project, DenseMatrix, SymmetricMatrix};
pub use pca::{
    cutoff_to_m, fit_pca, prune_model, reconstruction_error, sample_rows, transform_corpus,
    transform_query, PcaModel, PrunedTransform,
};
pub use stats::{wilcoxon_signed_rank, WilcoxonResult};
pub use synth::{SynthCorpus, SynthSpec};
