//! C-SVC with an RBF kernel solved by SMO, plus Platt probability scaling.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    /// `1 / (d * var(X))` over every entry of the training matrix.
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Gamma,
    /// KKT violation tolerance of the stopping rule.
    pub tol: f64,
    /// Iteration cap; `None` means `max(10^7, 100 n)`.
    pub max_iter: Option<usize>,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, gamma: Gamma::Scale, tol: 1e-3, max_iter: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support: Matrix,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    /// Decision value is `sum coef_i K(s_i, x) - rho`.
    pub rho: f64,
    pub gamma: f64,
    /// Dual variables for every training row (zero for non-support rows).
    pub alpha: Vec<f64>,
    pub platt_a: f64,
    pub platt_b: f64,
    pub iterations: usize,
    /// `false` when the iteration cap was hit before the KKT tolerance.
    pub converged: bool,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    math::exp(-gamma * d)
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, c) in self.coef.iter().enumerate() {
            s += c * rbf(self.support.row(i), x, self.gamma);
        }
        s - self.rho
    }

    pub fn platt(&self, decision: f64) -> f64 {
        // P(y = 1 | f) = 1 / (1 + exp(A f + B))
        math::sigmoid(-(self.platt_a * decision + self.platt_b))
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.platt(self.decision(x))
    }
}

pub fn scale_gamma(x: &Matrix) -> f64 {
    let s = math::population_std(x.as_slice());
    let var = s * s;
    if var > 0.0 && x.cols() > 0 {
        1.0 / (x.cols() as f64 * var)
    } else {
        1.0
    }
}

const TAU: f64 = 1e-12;

/// Caller guarantees both classes are present.
pub fn fit_svm(x: &Matrix, y: &[bool], params: &SvmParams) -> SvmModel {
    let n = x.rows();
    let gamma = match params.gamma {
        Gamma::Scale => scale_gamma(x),
        Gamma::Value(g) => g,
    };
    let c = params.c;
    let ys: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rbf(x.row(i), x.row(j), gamma);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    let q = |i: usize, j: usize| ys[i] * ys[j] * k.get(i, j);

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = params.max_iter.unwrap_or_else(|| (100 * n).max(10_000_000));
    let mut iterations = 0;
    let mut converged = false;
    let up = |a: f64, yy: f64| (yy > 0.0 && a < c) || (yy < 0.0 && a > 0.0);
    let low = |a: f64, yy: f64| (yy > 0.0 && a > 0.0) || (yy < 0.0 && a < c);

    while iterations < max_iter {
        // second-order working set selection
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if up(alpha[t], ys[t]) {
                let v = -ys[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            if low(alpha[t], ys[t]) {
                let v = -ys[t] * grad[t];
                if v < gmin {
                    gmin = v;
                }
                if i_sel != usize::MAX {
                    let b = gmax + ys[t] * grad[t];
                    if b > 0.0 {
                        let mut a = k.get(i_sel, i_sel) + k.get(t, t) - 2.0 * k.get(i_sel, t);
                        if a <= 0.0 {
                            a = TAU;
                        }
                        let o = -(b * b) / a;
                        if o < obj_min {
                            obj_min = o;
                            j_sel = t;
                        }
                    }
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < params.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel, j_sel);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        if ys[i] != ys[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = alpha[i] - ai_old;
        let dj = alpha[j] - aj_old;
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // offset from free variables, else the midpoint of the feasible interval
    let mut free = 0usize;
    let mut sum_free = 0.0;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };

    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let support = x.select_rows(&sv);
    let coef: Vec<f64> = sv.iter().map(|&t| alpha[t] * ys[t]).collect();
    let mut model = SvmModel {
        support,
        coef,
        rho,
        gamma,
        alpha,
        platt_a: 0.0,
        platt_b: 0.0,
        iterations,
        converged,
    };
    let dec: Vec<f64> = (0..n)
        .map(|t| sv.iter().zip(&model.coef).map(|(&s, c)| c * k.get(s, t)).sum::<f64>() - rho)
        .collect();
    let (a, b) = platt_fit(&dec, y);
    model.platt_a = a;
    model.platt_b = b;
    model
}

/// Two-parameter sigmoid fit of `P(y=1|f) = 1/(1+exp(A f + B))` with
/// regularised targets, by Newton's method with backtracking. `A` is kept
/// non-positive so the map is non-decreasing in the decision value.
pub fn platt_fit(dec: &[f64], y: &[bool]) -> (f64, f64) {
    let prior1 = y.iter().filter(|v| **v).count() as f64;
    let prior0 = y.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = y.iter().map(|&v| if v { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        dec.iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + libm::log1p(math::exp(-z))
                } else {
                    (ti - 1.0) * z + libm::log1p(math::exp(z))
                }
            })
            .sum()
    };
    let mut a = 0.0;
    let mut b = math::ln((prior0 + 1.0) / (prior1 + 1.0));
    let mut fval = objective(a, b);
    let sigma = 1e-12;
    let eps = 1e-5;
    let min_step = 1e-10;
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (&f, &ti) in dec.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = math::exp(-z);
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = math::exp(z);
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= min_step {
            let na = a + step * da;
            let nb = b + step * db;
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            break;
        }
    }
    if a > 0.0 {
        let mean_t = t.iter().sum::<f64>() / t.len() as f64;
        return (0.0, math::ln((1.0 - mean_t) / mean_t));
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(seed: u64, n: usize, sep: f64) -> (Matrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2 == 0;
            let m = if c { sep } else { -sep };
            rows.push([m + rng.sample(normal), m + rng.sample(normal)]);
            y.push(c);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separated_blobs_are_classified() {
        let (x, y) = blobs(1, 200, 4.0);
        let m = fit_svm(&x, &y, &SvmParams::default());
        assert!(m.converged);
        let correct = x.iter_rows().zip(&y).filter(|(r, t)| (m.decision(r) > 0.0) == **t).count();
        assert!(correct as f64 / 200.0 >= 0.99);
        let pc = x.iter_rows().zip(&y).filter(|(r, t)| (m.predict_row(r) >= 0.5) == **t).count();
        assert!(pc as f64 / 200.0 >= 0.99);
    }

    #[test]
    fn dual_feasibility() {
        for seed in 0..5 {
            let (x, y) = blobs(seed, 80, 0.7);
            let m = fit_svm(&x, &y, &SvmParams::default());
            let mut s = 0.0;
            for (a, &t) in m.alpha.iter().zip(&y) {
                assert!(*a >= 0.0 && *a <= 1.0);
                s += if t { *a } else { -*a };
            }
            assert!(s.abs() <= 1e-6, "sum alpha y = {s}");
        }
    }

    #[test]
    fn platt_map_is_monotone() {
        let (x, y) = blobs(3, 60, 0.5);
        let m = fit_svm(&x, &y, &SvmParams::default());
        assert!(m.platt_a <= 0.0);
        let mut prev = m.platt(-10.0);
        for i in -99..=100 {
            let p = m.platt(i as f64 / 10.0);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn scale_gamma_matches_definition() {
        let x = Matrix::from_rows(&[[0.0, 2.0], [2.0, 0.0]]).unwrap();
        // entries {0, 2, 2, 0}: variance 1, d = 2
        assert!((scale_gamma(&x) - 0.5).abs() < 1e-15);
        assert_eq!(scale_gamma(&Matrix::from_rows(&[[1.0], [1.0]]).unwrap()), 1.0);
    }
}
