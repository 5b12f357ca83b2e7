use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::bundle::DatasetBundle;
use super::error::DataError;
use crate::rng;
use crate::scalar::{lit, Real};

/// Isotropic unit-variance Gaussian blobs whose means are pairwise at least
/// `separation` apart, mapped into `[0, 1]` by one global affine rescale
/// (so relative geometry is preserved). Labels are the generating component.
pub fn make_synthetic_gmm<T: Real>(
    k: usize,
    dim: usize,
    n_per_cluster: usize,
    separation: f64,
    seed: u64,
) -> Result<DatasetBundle<T>, DataError> {
    if k == 0 || dim < 2 || separation.is_nan() || separation <= 0.0 || n_per_cluster == 0 {
        return Err(DataError::InvalidArgument(format!(
            "need k >= 1, dim >= 2, n_per_cluster >= 1, separation > 0 (got k={k}, dim={dim}, n={n_per_cluster}, separation={separation})"
        )));
    }
    let mut rng = rng::stream(seed, rng::SYNTHETIC, 0);

    let mut spread = separation / (dim as f64).sqrt();
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut failures = 0;
    while means.len() < k {
        let candidate: Vec<f64> = (0..dim)
            .map(|_| spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let ok = means.iter().all(|m| {
            m.iter()
                .zip(&candidate)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                >= separation * separation
        });
        if ok {
            means.push(candidate);
        } else {
            failures += 1;
            if failures % 100 == 0 {
                spread *= 1.1;
            }
        }
    }

    let n = k * n_per_cluster;
    let mut raw = Array2::<f64>::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (c, mean) in means.iter().enumerate() {
        for i in 0..n_per_cluster {
            let row = c * n_per_cluster + i;
            for (j, m) in mean.iter().enumerate() {
                raw[[row, j]] = m + rng.sample::<f64, _>(StandardNormal);
            }
            labels.push(c);
        }
    }

    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let x = raw.mapv(|v| lit::<T>(((v - lo) / span).clamp(0.0, 1.0)));
    DatasetBundle::new(format!("synthetic-k{k}-d{dim}"), x, Some(labels))
}
