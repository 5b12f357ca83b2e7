use rand::seq::SliceRandom;

use crate::rng;

/// Shuffles `0..n` and cuts it into consecutive slices of `batch_size`; the
/// final slice may be short.
pub fn minibatches(n: usize, batch_size: usize, shuffle_seed: u64) -> Vec<Vec<usize>> {
    assert!(
        batch_size >= 1 && batch_size <= n.max(1),
        "batch size {batch_size} out of range for n = {n}"
    );
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(shuffle_seed, rng::SHUFFLE, 0));
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
