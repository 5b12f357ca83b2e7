//! Embedding discriminator `D(x, z)` and its binary-classification
//! mutual-information loss with in-batch negatives.

use ndarray::Array2;
use rand::Rng;

use crate::diffcore::{DiffError, Tape, Var};
use crate::model::LpvdnModel;
use crate::scalar::{lit, softplus, to_f64, Real};

/// A batch of positive `(x_i, z_i)` pairs plus the permutation that builds
/// the negatives `(x_{perm(i)}, z_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch<T: Real> {
    pub xs: Array2<T>,
    pub zs: Array2<T>,
    pub neg_perm: Vec<usize>,
}

impl<T: Real> PairBatch<T> {
    pub fn new(xs: Array2<T>, zs: Array2<T>, neg_perm: Vec<usize>) -> Result<Self, DiffError> {
        let b = xs.nrows();
        if zs.nrows() != b || neg_perm.len() != b {
            return Err(DiffError::Shape {
                op: "pair_batch",
                detail: format!(
                    "xs has {b} rows, zs {} rows, permutation length {}",
                    zs.nrows(),
                    neg_perm.len()
                ),
            });
        }
        if !is_derangement(&neg_perm) {
            return Err(DiffError::Shape {
                op: "pair_batch",
                detail: "negative permutation must be a derangement".into(),
            });
        }
        Ok(Self { xs, zs, neg_perm })
    }
}

/// True when `perm` is a permutation of `0..n` with no fixed points
/// (a single element is allowed to map to itself).
pub fn is_derangement(perm: &[usize]) -> bool {
    let n = perm.len();
    let mut seen = vec![false; n];
    for (i, &p) in perm.iter().enumerate() {
        if p >= n || seen[p] || (n >= 2 && p == i) {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// Uniform random cyclic permutation (Sattolo), a derangement for `n >= 2`.
pub fn derangement<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..i);
        p.swap(i, j);
    }
    p
}

/// Discriminator logits for rows of `[z || x]` (`B x 1`).
pub fn score_vars<T: Real>(
    model: &LpvdnModel<T>,
    tape: &mut Tape<'_, T>,
    x: Var,
    z: Var,
) -> Result<Var, DiffError> {
    let joined = tape.concat_cols(z, x)?;
    model.discriminator.forward(tape, joined)
}

/// `mean softplus(-D(x_i, z_i)) + mean softplus(D(x_perm(i), z_i))`.
pub fn mi_loss_vars<T: Real>(
    model: &LpvdnModel<T>,
    tape: &mut Tape<'_, T>,
    x: &Array2<T>,
    z: Var,
    neg_perm: &[usize],
) -> Result<Var, DiffError> {
    let xv = tape.constant(x.clone());
    let x_neg = tape.constant(x.select(ndarray::Axis(0), neg_perm));
    let pos = score_vars(model, tape, xv, z)?;
    let neg = score_vars(model, tape, x_neg, z)?;
    let pos_neg = tape.neg(pos);
    let pos_term = tape.softplus(pos_neg);
    let neg_term = tape.softplus(neg);
    let a = tape.mean(pos_term);
    let b = tape.mean(neg_term);
    tape.add(a, b)
}

/// Logits for plain arrays.
pub fn score<T: Real>(
    model: &LpvdnModel<T>,
    x: &Array2<T>,
    z: &Array2<T>,
) -> Result<Vec<T>, DiffError> {
    let mut tape = Tape::new(&model.store);
    let xv = tape.constant(x.clone());
    let zv = tape.constant(z.clone());
    let s = score_vars(model, &mut tape, xv, zv)?;
    Ok(tape.value(s).iter().copied().collect())
}

pub fn mi_loss<T: Real>(model: &LpvdnModel<T>, batch: &PairBatch<T>) -> Result<f64, DiffError> {
    let mut tape = Tape::new(&model.store);
    let z = tape.constant(batch.zs.clone());
    let l = mi_loss_vars(model, &mut tape, &batch.xs, z, &batch.neg_perm)?;
    Ok(to_f64(tape.scalar(l)))
}

/// Loss from already computed positive and negative logits.
pub fn mi_loss_from_logits<T: Real>(pos: &[T], neg: &[T]) -> T {
    let n = lit::<T>(pos.len().max(1) as f64);
    let p: T = pos.iter().map(|&t| softplus(-t)).sum();
    let q: T = neg.iter().map(|&t| softplus(t)).sum();
    p / n + q / n
}
