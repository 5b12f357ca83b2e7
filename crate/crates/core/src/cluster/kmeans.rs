use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::error::ClusterError;
use crate::rng;
use crate::scalar::{lit, Real};

pub const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult<T: Real> {
    pub assignments: Vec<usize>,
    /// `k x d`
    pub centroids: Array2<T>,
    /// Total squared distance of every point to its centroid.
    pub inertia: T,
    pub iterations: usize,
}

fn sq_dist<T: Real>(a: ArrayView1<T>, b: ArrayView1<T>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

/// Index of the nearest centroid; ties go to the lower index.
fn nearest<T: Real>(p: ArrayView1<T>, centroids: &Array2<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, row) in centroids.axis_iter(Axis(0)).enumerate() {
        let d = sq_dist(p, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: each new centre is drawn with probability proportional
/// to the squared distance from the nearest centre chosen so far.
pub fn kmeans_plus_plus<T: Real, R: Rng + ?Sized>(
    points: ArrayView2<T>,
    k: usize,
    rng: &mut R,
) -> Array2<T> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut d2: Vec<f64> = points
        .axis_iter(Axis(0))
        .map(|p| crate::scalar::to_f64(sq_dist(p, points.row(first))))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, p) in points.axis_iter(Axis(0)).enumerate() {
            let d = crate::scalar::to_f64(sq_dist(p, points.row(pick)));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

/// Lloyd iterations from `centroids` until assignments stop changing.
/// An emptied cluster is re-seeded with the point farthest from its centroid.
pub fn lloyd<T: Real>(points: ArrayView2<T>, mut centroids: Array2<T>) -> ClusteringResult<T> {
    let (n, d) = points.dim();
    let k = centroids.nrows();
    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;
    let mut reseeded = false;
    loop {
        let mut changed = reseeded;
        reseeded = false;
        for (i, p) in points.axis_iter(Axis(0)).enumerate() {
            let (c, _) = nearest(p, &centroids);
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        if !changed || iterations >= MAX_LLOYD_ITERS {
            break;
        }
        iterations += 1;

        let mut sums = Array2::<T>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, p) in points.axis_iter(Axis(0)).enumerate() {
            sums.row_mut(assignments[i]).scaled_add(T::one(), &p);
            counts[assignments[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = lit::<T>(1.0 / counts[c] as f64);
                centroids.row_mut(c).assign(&sums.row(c).mapv(|v| v * inv));
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let (far, _) = points
                    .axis_iter(Axis(0))
                    .enumerate()
                    .map(|(i, p)| (i, sq_dist(p, centroids.row(assignments[i]))))
                    .fold((0, -T::one()), |a, b| if b.1 > a.1 { b } else { a });
                centroids.row_mut(c).assign(&points.row(far));
                counts[assignments[far]] -= 1;
                assignments[far] = c;
                counts[c] = 1;
                reseeded = true;
            }
        }
    }
    let inertia = points
        .axis_iter(Axis(0))
        .zip(&assignments)
        .map(|(p, &c)| sq_dist(p, centroids.row(c)))
        .sum();
    ClusteringResult {
        assignments,
        centroids,
        inertia,
        iterations,
    }
}

/// Best of `n_init` k-means++-seeded Lloyd runs by lowest inertia.
pub fn kmeans<T: Real>(
    points: ArrayView2<T>,
    k: usize,
    n_init: usize,
    seed: u64,
) -> Result<ClusteringResult<T>, ClusterError> {
    let n = points.nrows();
    if n == 0 || k == 0 {
        return Err(ClusterError::Empty);
    }
    if k > n {
        return Err(ClusterError::TooMany { k, n });
    }
    let mut best: Option<ClusteringResult<T>> = None;
    for run in 0..n_init.max(1) {
        let mut rng = rng::stream(seed, rng::KMEANS, run as u64);
        let init = kmeans_plus_plus(points, k, &mut rng);
        let result = lloyd(points, init);
        if best.as_ref().is_none_or(|b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one run"))
}
