//! Final clustering and evaluation: k-means with k-means++ restarts,
//! ACC / NMI / ARI, and nearest-neighbour retrieval.

mod error;
mod hungarian;
mod kmeans;
mod metrics;
mod neighbors;
mod report;

pub use error::ClusterError;
pub use hungarian::min_cost_assignment;
pub use kmeans::{kmeans, kmeans_plus_plus, lloyd, ClusteringResult, MAX_LLOYD_ITERS};
pub use metrics::{accuracy, ari, contingency, nmi, Contingency};
pub use neighbors::{nearest_neighbors, nearest_to_index};
pub use report::{EmbeddingStats, EvalReport};
