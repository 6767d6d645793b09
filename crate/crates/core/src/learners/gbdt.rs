//! Gradient boosting on the logistic loss with Newton-step leaves.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tree::{grow_regression, Node, Tree};
use crate::math;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams { n_trees: 100, learning_rate: 1.0, max_depth: 3, min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    /// Log-odds of the training base rate.
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GbdtModel {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        math::sigmoid(self.raw_score(x))
    }
}

/// Caller guarantees both classes are present.
pub fn fit_gbdt(x: &Matrix, y: &[bool], params: &GbdtParams) -> GbdtModel {
    let n = x.rows();
    let pos = y.iter().filter(|v| **v).count() as f64;
    let p0 = pos / n as f64;
    let init = math::ln(p0 / (1.0 - p0));
    let targets: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let mut raw = alloc::vec![init; n];
    let rows: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let prob: Vec<f64> = raw.iter().map(|&f| math::sigmoid(f)).collect();
        let residual: Vec<f64> = targets.iter().zip(&prob).map(|(t, p)| t - p).collect();
        let (mut tree, leaves) = grow_regression(x, &residual, &rows, params.max_depth, params.min_samples_split);
        for (node, members) in leaves {
            let num: f64 = members.iter().map(|&i| residual[i]).sum();
            let den: f64 = members.iter().map(|&i| prob[i] * (1.0 - prob[i])).sum();
            let value = if den.abs() < 1e-150 { 0.0 } else { num / den };
            tree.nodes[node] = Node::Leaf { value };
            for &i in &members {
                raw[i] += params.learning_rate * value;
            }
        }
        trees.push(tree);
    }
    GbdtModel { init, learning_rate: params.learning_rate, trees }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trees_predict_base_rate() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let y = [true, false, false, false];
        let m = fit_gbdt(&x, &y, &GbdtParams { n_trees: 0, ..GbdtParams::default() });
        for r in x.iter_rows() {
            assert!((m.predict_row(r) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn xor_is_learned_at_depth_three() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let a = (i % 2) as f64;
            let b = ((i / 2) % 2) as f64;
            rows.push([a, b]);
            y.push((a != b) as u8 == 1);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let m = fit_gbdt(&x, &y, &GbdtParams::default());
        let acc = x.iter_rows().zip(&y).filter(|(r, t)| (m.predict_row(r) >= 0.5) == **t).count();
        assert_eq!(acc, 40);
        assert!(m.trees.iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn deterministic_refit() {
        let rows: Vec<[f64; 3]> = (0..30).map(|i| [(i * 7 % 11) as f64, (i * 3 % 5) as f64, i as f64]).collect();
        let y: Vec<bool> = (0..30).map(|i| (i * 7 % 11) > 5).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        assert_eq!(fit_gbdt(&x, &y, &GbdtParams::default()), fit_gbdt(&x, &y, &GbdtParams::default()));
    }
}
