use ndarray::{ArrayView1, ArrayView2, Axis};

use super::error::ClusterError;
use crate::scalar::{to_f64, Real};

/// The `k` rows of `embeddings` closest to `query` in Euclidean distance,
/// as `(index, distance)`. Ties go to the lower index; `exclude` (typically
/// the query's own row) is never returned.
pub fn nearest_neighbors<T: Real>(
    query: ArrayView1<T>,
    embeddings: ArrayView2<T>,
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<(usize, f64)>, ClusterError> {
    let available =
        embeddings.nrows() - usize::from(exclude.is_some_and(|e| e < embeddings.nrows()));
    if k > available {
        return Err(ClusterError::TooMany { k, n: available });
    }
    let mut scored: Vec<(usize, f64)> = embeddings
        .axis_iter(Axis(0))
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, row)| {
            let d2: f64 = row
                .iter()
                .zip(query.iter())
                .map(|(&a, &b)| to_f64((a - b) * (a - b)))
                .sum();
            (i, d2.sqrt())
        })
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Neighbors of stored row `index`, excluding the row itself.
pub fn nearest_to_index<T: Real>(
    embeddings: ArrayView2<T>,
    index: usize,
    k: usize,
) -> Result<Vec<(usize, f64)>, ClusterError> {
    if index >= embeddings.nrows() {
        return Err(ClusterError::TooMany {
            k: index + 1,
            n: embeddings.nrows(),
        });
    }
    nearest_neighbors(embeddings.row(index), embeddings, k, Some(index))
}
