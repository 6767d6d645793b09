//! L2-regularised logistic regression fit by damped Newton iterations.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrParams {
    /// Coefficient of `0.5 * |w|^2` added to the mean logistic loss.
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the gradient's max-norm drops to this value.
    pub tol: f64,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams { l2: 1.0, max_iter: 1000, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step, starting with the initial point.
    pub objective_trace: Vec<f64>,
}

impl LogisticModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        math::sigmoid(self.decision(x))
    }
}

/// Mean logistic loss plus `l2/2 |w|^2` and its gradient. The gradient
/// has `d + 1` entries, the bias (unpenalised) last.
pub fn logistic_objective(x: &Matrix, y: &[bool], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>) {
    let n = x.rows() as f64;
    let d = x.cols();
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (i, row) in x.iter_rows().enumerate() {
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let t = if y[i] { 1.0 } else { 0.0 };
        loss += math::softplus(z) - t * z;
        let r = math::sigmoid(z) - t;
        for j in 0..d {
            grad[j] += r * row[j];
        }
        grad[d] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for j in 0..d {
        grad[j] += l2 * w[j];
    }
    (loss, grad)
}

fn hessian(x: &Matrix, w: &[f64], b: f64, l2: f64) -> Matrix {
    let d = x.cols();
    let p = d + 1;
    let n = x.rows() as f64;
    let mut h = Matrix::zeros(p, p);
    let mut ext = vec![1.0; p];
    for row in x.iter_rows() {
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let s = math::sigmoid(z);
        let wgt = s * (1.0 - s) / n;
        ext[..d].copy_from_slice(row);
        for a in 0..p {
            let ea = wgt * ext[a];
            if ea == 0.0 {
                continue;
            }
            let hr = h.row_mut(a);
            for c in a..p {
                hr[c] += ea * ext[c];
            }
        }
    }
    for a in 0..p {
        for c in 0..a {
            h.set(a, c, h.get(c, a));
        }
    }
    for j in 0..d {
        h.set(j, j, h.get(j, j) + l2);
    }
    h
}

/// Solves `a x = rhs` for symmetric positive definite `a` by Cholesky.
fn cholesky_solve(a: &Matrix, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l.set(i, i, math::sqrt(s));
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l.get(i, k) * z[k];
        }
        z[i] = s / l.get(i, i);
    }
    let mut out = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l.get(k, i) * out[k];
        }
        out[i] = s / l.get(i, i);
    }
    Some(out)
}

/// Newton's method with Armijo backtracking; every accepted step strictly
/// lowers the objective. Cost per iteration is `O(n d^2 + d^3)`, which suits
/// the low-dimensional feature sets this learner is routed to.
pub fn fit_lr(x: &Matrix, y: &[bool], params: &LrParams) -> LogisticModel {
    let d = x.cols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (mut f, mut g) = logistic_objective(x, y, &w, b, params.l2);
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..params.max_iter {
        if g.iter().all(|v| v.abs() <= params.tol) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut h = hessian(x, &w, b, params.l2);
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut jitter = 1e-10;
        let step = loop {
            if let Some(s) = cholesky_solve(&h, &neg_g) {
                break s;
            }
            for j in 0..=d {
                h.set(j, j, h.get(j, j) + jitter);
            }
            jitter *= 10.0;
            if jitter > 1e3 {
                break neg_g.clone();
            }
        };
        let slope: f64 = g.iter().zip(&step).map(|(a, c)| a * c).sum();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let wn: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let bn = b + t * step[d];
            let (fn_, gn) = logistic_objective(x, y, &wn, bn, params.l2);
            if fn_ <= f + 1e-4 * t * slope && fn_ < f {
                w = wn;
                b = bn;
                f = fn_;
                g = gn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no representable decrease left
            converged = g.iter().all(|v| v.abs() <= params.tol);
            break;
        }
        trace.push(f);
    }
    if !converged {
        converged = g.iter().all(|v| v.abs() <= params.tol);
    }
    LogisticModel { weights: w, bias: b, iterations, converged, objective_trace: trace }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, n: usize, d: usize) -> (Matrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let y = (0..n).map(|i| x.row(i)[0] + rng.random_range(-1.0..1.0) > 0.0).collect();
        (x, y)
    }

    #[test]
    fn separable_pair_with_small_penalty() {
        let x = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let y = [false, true];
        let m = fit_lr(&x, &y, &LrParams { l2: 1e-3, ..LrParams::default() });
        assert!(m.predict_row(&[-1.0]) < 0.5 && m.predict_row(&[1.0]) > 0.5);
    }

    #[test]
    fn objective_decreases_monotonically() {
        for seed in 0..10 {
            let (x, y) = random_problem(seed, 60, 5);
            let m = fit_lr(&x, &y, &LrParams::default());
            assert!(m.converged);
            for w in m.objective_trace.windows(2) {
                assert!(w[1] < w[0]);
            }
        }
    }

    #[test]
    fn duplicated_rows_give_identical_weights() {
        let (x, y) = random_problem(11, 40, 4);
        let idx: Vec<usize> = (0..40).chain(0..40).collect();
        let x2 = x.select_rows(&idx);
        let y2: Vec<bool> = idx.iter().map(|&i| y[i]).collect();
        let p = LrParams { tol: 1e-10, ..LrParams::default() };
        let a = fit_lr(&x, &y, &p);
        let b = fit_lr(&x2, &y2, &p);
        for (u, v) in a.weights.iter().zip(&b.weights) {
            assert!((u - v).abs() < 1e-8);
        }
        assert!((a.bias - b.bias).abs() < 1e-8);
    }

    #[test]
    fn stationary_point_has_small_gradient() {
        let (x, y) = random_problem(5, 80, 3);
        let m = fit_lr(&x, &y, &LrParams::default());
        let (_, g) = logistic_objective(&x, &y, &m.weights, m.bias, 1.0);
        assert!(g.iter().all(|v| v.abs() <= 1e-4));
    }
}
