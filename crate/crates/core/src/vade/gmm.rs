//! Diagonal-covariance Gaussian mixture fitted by EM, used to initialise
//! the latent prior after autoencoder pretraining.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::cluster::{self, ClusterError};
use crate::rng;
use crate::scalar::{log_sum_exp, to_f64, Real};

/// Re-seeding attempts for components that lose all their mass.
pub const EM_MAX_RETRIES: usize = 5;
const REG_VAR: f64 = 1e-6;
const EMPTY_MASS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub weights: Vec<f64>,
    /// `K x d`
    pub means: Array2<f64>,
    /// `K x d`
    pub variances: Array2<f64>,
    /// Data log-likelihood evaluated before each M-step.
    pub log_likelihood: Vec<f64>,
    pub retries: usize,
}

fn log_gauss(x: &[f64], mean: ndarray::ArrayView1<f64>, var: ndarray::ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for ((&xi, &m), &v) in x.iter().zip(mean).zip(var) {
        acc += (2.0 * std::f64::consts::PI * v).ln() + (xi - m) * (xi - m) / v;
    }
    -0.5 * acc
}

/// EM for a `k`-component diagonal GMM, seeded from k-means++ / Lloyd.
pub fn fit_diag_gmm<T: Real>(
    points: ArrayView2<T>,
    k: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<GmmFit, ClusterError> {
    let x = points.mapv(to_f64);
    let (n, d) = x.dim();
    let init = cluster::kmeans(x.view(), k, 5, seed)?;
    let global_var: Array1<f64> = x.var_axis(Axis(0), 0.0).mapv(|v| v + REG_VAR);

    let mut means = init.centroids.clone();
    let mut variances = Array2::<f64>::zeros((k, d));
    let mut weights = vec![0.0; k];
    for c in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| init.assignments[i] == c).collect();
        weights[c] = members.len().max(1) as f64 / n as f64;
        if members.len() < 2 {
            variances.row_mut(c).assign(&global_var);
        } else {
            let sub = x.select(Axis(0), &members);
            variances
                .row_mut(c)
                .assign(&sub.var_axis(Axis(0), 0.0).mapv(|v| v + REG_VAR));
        }
    }
    let wsum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= wsum);

    let mut rng = rng::stream(seed, rng::GMM_INIT, 0);
    let mut trace = Vec::new();
    let mut retries = 0;
    let mut resp = Array2::<f64>::zeros((n, k));
    for _ in 0..max_iter {
        // E-step
        let mut ll = 0.0;
        for i in 0..n {
            let xi = x.row(i).to_vec();
            let logs: Vec<f64> = (0..k)
                .map(|c| weights[c].ln() + log_gauss(&xi, means.row(c), variances.row(c)))
                .collect();
            let lse = log_sum_exp(logs.iter().copied());
            ll += lse;
            for c in 0..k {
                resp[[i, c]] = (logs[c] - lse).exp();
            }
        }
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| (ll - prev).abs() <= tol * ll.abs().max(1.0));
        trace.push(ll);
        if converged {
            break;
        }

        // M-step
        let mass = resp.sum_axis(Axis(0));
        let mut degenerate = false;
        for c in 0..k {
            if mass[c] < EMPTY_MASS * n as f64 {
                degenerate = true;
                if retries < EM_MAX_RETRIES {
                    let pick = rng.random_range(0..n);
                    means.row_mut(c).assign(&x.row(pick));
                    variances.row_mut(c).assign(&global_var);
                    weights[c] = 1.0 / k as f64;
                }
                continue;
            }
            let r = resp.column(c);
            let mean = r.dot(&x) / mass[c];
            let mut var = Array1::<f64>::zeros(d);
            for i in 0..n {
                let diff = &x.row(i) - &mean;
                var.scaled_add(r[i], &diff.mapv(|v| v * v));
            }
            var.mapv_inplace(|v| v / mass[c] + REG_VAR);
            means.row_mut(c).assign(&mean);
            variances.row_mut(c).assign(&var);
            weights[c] = mass[c] / n as f64;
        }
        if degenerate {
            if retries >= EM_MAX_RETRIES {
                log::warn!("GMM: component stayed empty after {EM_MAX_RETRIES} re-seeds");
                break;
            }
            retries += 1;
            let s: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= s);
        }
    }
    Ok(GmmFit {
        weights,
        means,
        variances,
        log_likelihood: trace,
        retries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::make_synthetic_gmm;

    #[test]
    fn log_likelihood_never_decreases() {
        let data = make_synthetic_gmm::<f64>(3, 4, 60, 4.0, 5).unwrap();
        let fit = fit_diag_gmm(data.x.view(), 3, 100, 0.0, 1).unwrap();
        assert!(fit.log_likelihood.len() > 2);
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
        assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_separated_components() {
        let data = make_synthetic_gmm::<f64>(2, 3, 100, 8.0, 2).unwrap();
        let fit = fit_diag_gmm(data.x.view(), 2, 100, 1e-10, 0).unwrap();
        for w in &fit.weights {
            assert!((w - 0.5).abs() < 0.01);
        }
    }
}
