use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng;
use crate::scalar::{lit, to_f64, Real};

/// Adds i.i.d. `N(0, sigma^2)` noise to every entry and clamps to `[0, 1]`.
pub fn corrupt_gaussian<T: Real>(x: &Array2<T>, sigma: f64, seed: u64) -> Array2<T> {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    if sigma == 0.0 {
        return x.clone();
    }
    let mut rng = rng::stream(seed, rng::NOISE, 0);
    x.mapv(|v| {
        let e: f64 = rng.sample(StandardNormal);
        lit::<T>((to_f64(v) + sigma * e).clamp(0.0, 1.0))
    })
}
