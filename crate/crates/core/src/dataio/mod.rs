//! Dataset ingestion, synthetic data, noise corruption and minibatching.

mod batches;
mod bundle;
mod error;
pub mod idx;
mod matrix_file;
mod noise;
mod synthetic;

pub use batches::minibatches;
pub use bundle::DatasetBundle;
pub use error::DataError;
pub use idx::{load_idx, write_idx};
pub use matrix_file::{load_matrix, write_matrix, MatrixManifest};
pub use noise::corrupt_gaussian;
pub use synthetic::make_synthetic_gmm;
