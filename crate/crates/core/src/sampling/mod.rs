//! Embedding, clustering and multi-perspective subset sampling.

mod embed;
mod kmeans;
mod subsets;

pub use embed::{embed_documents, EmbeddingVector};
pub use kmeans::{kmeans_cluster, kmeans_runs, ClusterSet, KMeansRun, MAX_LLOYD_ITERATIONS, RESTARTS};
pub use subsets::{
    sample_subsets, DocumentSubset, SamplingOutcome, TruncationNotice, ATTEMPTS_PER_SUBSET,
};
