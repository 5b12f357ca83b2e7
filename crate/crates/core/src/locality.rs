//! Perplexity-calibrated input affinities `P`, the locality mapper, Student-t
//! output affinities `Q` and the KL loss between them.

use ndarray::Array2;

use crate::diffcore::{expanded_sq_dists, DiffError, Tape, Var};
use crate::model::LpvdnModel;
use crate::scalar::{lit, to_f64, Real};

pub const BISECTION_MAX_ITERS: usize = 50;
/// Tolerance on the row entropy in bits.
pub const ENTROPY_TOL: f64 = 1e-5;
pub const LOG2_BETA_MIN: f64 = -60.0;
pub const LOG2_BETA_MAX: f64 = 60.0;
pub const AFFINITY_FLOOR: f64 = 1e-12;

/// Result of calibrating one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    /// Precision `1 / (2 eta^2)`.
    pub beta: f64,
    pub eta: f64,
    /// Perplexity actually reached at `beta`.
    pub perplexity: f64,
    /// False when the target could not be met inside the search range.
    pub converged: bool,
}

/// Conditional row `p_{j|i}` for precision `beta` plus its entropy in bits.
fn row_distribution(sq_dists: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let min = sq_dists.iter().copied().fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = sq_dists
        .iter()
        .map(|&d| (-(d - min) * beta).exp())
        .collect();
    let total: f64 = p.iter().sum();
    // H = ln Z + beta * E[d - min]
    let mut mean_shift = 0.0;
    for (v, &d) in p.iter_mut().zip(sq_dists) {
        *v /= total;
        mean_shift += *v * (d - min);
    }
    let h = (total.ln() + beta * mean_shift) / std::f64::consts::LN_2;
    (p, h.max(0.0))
}

/// Binary search on `log2(beta)` until the perplexity `2^H` of the row
/// matches `perplexity`. `sq_dists` must not contain the diagonal entry.
pub fn calibrate_bandwidth(sq_dists: &[f64], perplexity: f64) -> Bandwidth {
    let target = perplexity.log2();
    let (mut lo, mut hi) = (LOG2_BETA_MIN, LOG2_BETA_MAX);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut converged = false;
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let (_, h) = row_distribution(sq_dists, mid.exp2());
        let err = (h - target).abs();
        if err < best.0 {
            best = (err, mid, h);
        }
        if err <= ENTROPY_TOL {
            converged = true;
            break;
        }
        // Entropy falls as beta grows.
        if h > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = best.1.exp2();
    if !converged {
        log::warn!(
            "perplexity {perplexity} unreachable for a row of {} distances; reached {}",
            sq_dists.len(),
            best.2.exp2()
        );
    }
    Bandwidth {
        beta,
        eta: (0.5 / beta).sqrt(),
        perplexity: best.2.exp2(),
        converged,
    }
}

/// Perplexity actually used for a batch of `b` points: the configured value
/// capped at `b / 2` so small batches stay calibratable.
pub fn effective_perplexity(perplexity: f64, b: usize) -> f64 {
    perplexity.min(0.5 * b as f64)
}

/// Symmetric joint affinities `P` over the rows of `mu` (f64, no gradient).
pub fn high_affinities<T: Real>(mu: &Array2<T>, perplexity: f64) -> Result<Array2<f64>, DiffError> {
    let b = mu.nrows();
    if b < 3 {
        return Err(DiffError::Shape {
            op: "high_affinities",
            detail: format!("need at least 3 points, got {b}"),
        });
    }
    if !(perplexity > 1.0 && perplexity < (b - 1) as f64 + 1e-12) {
        return Err(DiffError::Shape {
            op: "high_affinities",
            detail: format!("perplexity {perplexity} outside (1, {}]", b - 1),
        });
    }
    let d = expanded_sq_dists(&mu.mapv(to_f64));
    let mut cond = Array2::<f64>::zeros((b, b));
    let mut row = Vec::with_capacity(b - 1);
    for i in 0..b {
        row.clear();
        row.extend((0..b).filter(|&j| j != i).map(|j| d[[i, j]]));
        let bw = calibrate_bandwidth(&row, perplexity);
        let (p, _) = row_distribution(&row, bw.beta);
        for (k, j) in (0..b).filter(|&j| j != i).enumerate() {
            cond[[i, j]] = p[k];
        }
    }
    let denom = 2.0 * b as f64;
    let mut out = Array2::<f64>::zeros((b, b));
    for i in 0..b {
        for j in 0..b {
            if i != j {
                out[[i, j]] = (cond[[i, j]] + cond[[j, i]]) / denom;
            }
        }
    }
    Ok(out)
}

/// `o' = f_lp(mu)`.
pub fn map_points_vars<T: Real>(
    model: &LpvdnModel<T>,
    tape: &mut Tape<'_, T>,
    mu: Var,
) -> Result<Var, DiffError> {
    model.mapper.forward(tape, mu)
}

/// Student-t joint affinities over the rows of `o`.
pub fn low_affinities_vars<T: Real>(tape: &mut Tape<'_, T>, o: Var) -> Result<Var, DiffError> {
    let d = tape.pairwise_sq_dist(o);
    let shifted = tape.add_scalar(d, T::one());
    let kernel = tape.recip(shifted);
    let masked = tape.mask_diag(kernel)?;
    let total = tape.sum(masked);
    tape.div(masked, total)
}

/// `sum_{i != j} P_ij log(P_ij / Q_ij)`, both floored at 1e-12.
pub fn lp_loss_vars<T: Real>(
    tape: &mut Tape<'_, T>,
    p: &Array2<f64>,
    q: Var,
) -> Result<Var, DiffError> {
    let b = p.nrows();
    let mut weights = Array2::<T>::zeros((b, b));
    let mut entropy = 0.0;
    for ((i, j), &v) in p.indexed_iter() {
        if i != j {
            let v = v.max(AFFINITY_FLOOR);
            entropy += v * v.ln();
            weights[[i, j]] = lit(v);
        }
    }
    let w = tape.constant(weights);
    let qc = tape.clamp(q, lit(AFFINITY_FLOOR), T::infinity());
    let log_q = tape.ln(qc);
    let cross = tape.mul(w, log_q)?;
    let cross = tape.sum(cross);
    let neg = tape.neg(cross);
    Ok(tape.add_scalar(neg, lit(entropy)))
}

pub fn map_points<T: Real>(model: &LpvdnModel<T>, mu: &Array2<T>) -> Result<Array2<T>, DiffError> {
    let mut tape = Tape::new(&model.store);
    let m = tape.constant(mu.clone());
    let o = map_points_vars(model, &mut tape, m)?;
    Ok(tape.value(o).clone())
}

pub fn low_affinities<T: Real>(o: &Array2<T>) -> Result<Array2<T>, DiffError> {
    let store = crate::diffcore::ParamStore::new();
    let mut tape = Tape::new(&store);
    let ov = tape.constant(o.clone());
    let q = low_affinities_vars(&mut tape, ov)?;
    Ok(tape.value(q).clone())
}

pub fn lp_loss<T: Real>(p: &Array2<f64>, q: &Array2<T>) -> Result<f64, DiffError> {
    let store = crate::diffcore::ParamStore::new();
    let mut tape = Tape::new(&store);
    let qv = tape.constant(q.clone());
    let l = lp_loss_vars(&mut tape, p, qv)?;
    Ok(to_f64(tape.scalar(l)))
}
