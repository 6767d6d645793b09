//! Random forest of Gini trees on bootstrap samples.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_classification, Tree};
use crate::math;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfParams {
    pub n_trees: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams { n_trees: 100, min_samples_split: 2, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub max_features: usize,
}

impl ForestModel {
    /// Mean over trees of the leaf positive-class fraction.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit_rf(x: &Matrix, y: &[bool], params: &RfParams, seed: u64) -> ForestModel {
    let n = x.rows();
    let max_features = (math::floor(math::sqrt(x.cols() as f64)) as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let mut tree_rng = ChaCha8Rng::seed_from_u64(rng.random());
        let rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| tree_rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        trees.push(grow_classification(x, y, &rows, max_features, params.min_samples_split, &mut tree_rng));
    }
    ForestModel { trees, max_features }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(seed: u64, n: usize, shift: f64) -> (Matrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2 == 0;
            let base = if c { shift } else { 0.0 };
            rows.push([base + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            y.push(c);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = blobs(1, 50, 1.0);
        assert_eq!(fit_rf(&x, &y, &RfParams::default(), 42), fit_rf(&x, &y, &RfParams::default(), 42));
        assert_ne!(fit_rf(&x, &y, &RfParams::default(), 42), fit_rf(&x, &y, &RfParams::default(), 43));
    }

    #[test]
    fn pure_leaves_give_tree_count_granularity() {
        let (x, y) = blobs(2, 60, 0.5);
        let m = fit_rf(&x, &y, &RfParams::default(), 7);
        for t in &m.trees {
            assert!(t.leaf_values().all(|v| v == 0.0 || v == 1.0));
        }
        for r in x.iter_rows() {
            let p = m.predict_row(r);
            assert!((0.0..=1.0).contains(&p));
            let k = p * 100.0;
            assert!((k - math::round(k)).abs() < 1e-9);
        }
    }
}
