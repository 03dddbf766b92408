//! Index bookkeeping shared by the training loop and dataset partitioning.

use rand::seq::SliceRandom;

use crate::init;

/// Number of held-out items for a validation `fraction` of `n`: `ceil(fraction * n)`.
///
/// A 1e-9 snap absorbs binary representation error, so 0.2 of 10 yields 2 rather than 3.
pub fn holdout_len(n: usize, fraction: f64) -> usize {
    if fraction <= 0.0 || n == 0 {
        return 0;
    }
    let raw = fraction * n as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Seeded shuffle of `0..n`, split so that the trailing `holdout_len` indices are held out.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut init::rng(seed));
    let val = holdout_len(n, fraction);
    let held = idx.split_off(n - val);
    (idx, held)
}

/// Number of mini-batches per epoch, last partial batch included.
pub fn batches_per_epoch(n: usize, batch_size: usize) -> usize {
    n.div_ceil(batch_size)
}
