//! Participant-wise fold plans for repeated nested cross-validation.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const FOLDS: usize = 5;

/// Default seed base; run `r` uses seed `42 + r`.
pub const SEED_BASE: u64 = 42;

/// Train / validation / test assignment for one fold of one run. Entries are
/// the ids handed to [`make_folds`] (participant indices in the harness).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub run: usize,
    pub fold: usize,
    pub seed: u64,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Sizes of `k` contiguous chunks of `n` items that differ by at most one.
pub fn chunk_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

/// Per run: shuffle with seed `seed_base + run`, cut five contiguous test
/// chunks, and split the remaining ids 4:1 into train and validation (the
/// validation share rounded to the nearest integer).
pub fn make_folds(ids: &[usize], runs: usize, seed_base: u64) -> Result<Vec<FoldPlan>> {
    if ids.len() < FOLDS {
        return Err(invalid(alloc::format!("need at least {FOLDS} participants for cross-validation, got {}", ids.len())));
    }
    let mut plans = Vec::with_capacity(runs * FOLDS);
    for run in 0..runs {
        let seed = seed_base + run as u64;
        let mut order = ids.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut start = 0;
        for (fold, size) in chunk_sizes(order.len(), FOLDS).into_iter().enumerate() {
            let test = order[start..start + size].to_vec();
            let rest: Vec<usize> = order[..start].iter().chain(&order[start + size..]).copied().collect();
            let n_val = ((rest.len() + 2) / 5).clamp(1, rest.len() - 1);
            let (train, validation) = rest.split_at(rest.len() - n_val);
            plans.push(FoldPlan {
                run,
                fold,
                seed,
                train: train.to_vec(),
                validation: validation.to_vec(),
                test,
            });
            start += size;
        }
    }
    Ok(plans)
}
