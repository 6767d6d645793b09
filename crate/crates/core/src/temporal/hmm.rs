//! Diagonal-covariance Gaussian HMM: k-means initialisation, scaled
//! Baum-Welch, Viterbi decoding and state duration/frequency summaries.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{self, NeumaierSum};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmmConfig {
    pub states: usize,
    pub em_iters: usize,
    pub variance_floor: f64,
    pub kmeans_iters: usize,
}

impl Default for HmmConfig {
    fn default() -> Self {
        HmmConfig { states: 4, em_iters: 20, variance_floor: 1e-6, kmeans_iters: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub states: usize,
    pub dim: usize,
    /// `states x dim`
    pub means: Matrix,
    /// `states x dim`, every entry at least the variance floor.
    pub variances: Matrix,
    /// Row-stochastic `states x states`.
    pub transition: Matrix,
    pub initial: Vec<f64>,
    /// Length every sequence is zero-padded (or truncated) to.
    pub t_max: usize,
    pub em_iters: usize,
    pub seed: u64,
    /// Total training log-likelihood before each EM update, followed by the
    /// log-likelihood of the returned parameters (`em_iters + 1` values).
    pub log_likelihood: Vec<f64>,
}

/// Zero-pads or truncates `x` to exactly `t_max` rows.
pub(crate) fn pad_to(x: &Matrix, t_max: usize) -> Matrix {
    let mut out = Matrix::zeros(t_max, x.cols());
    for t in 0..t_max.min(x.rows()) {
        out.row_mut(t).copy_from_slice(x.row(t));
    }
    out
}

struct Emission {
    log_norm: Vec<f64>,
    inv_var: Matrix,
}

impl HmmModel {
    fn emission(&self) -> Emission {
        let mut log_norm = Vec::with_capacity(self.states);
        let mut inv_var = Matrix::zeros(self.states, self.dim);
        for k in 0..self.states {
            let mut s = 0.0;
            for d in 0..self.dim {
                let v = self.variances.get(k, d);
                s += math::ln(2.0 * PI * v);
                inv_var.set(k, d, 1.0 / v);
            }
            log_norm.push(-0.5 * s);
        }
        Emission { log_norm, inv_var }
    }

    fn log_emissions(&self, em: &Emission, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.states);
        for t in 0..x.rows() {
            let row = x.row(t);
            for k in 0..self.states {
                let mu = self.means.row(k);
                let iv = em.inv_var.row(k);
                let mut q = 0.0;
                for d in 0..self.dim {
                    let z = row[d] - mu[d];
                    q += z * z * iv[d];
                }
                out.set(t, k, em.log_norm[k] - 0.5 * q);
            }
        }
        out
    }

    /// Log-likelihood of one (already padded) sequence under the model.
    pub fn sequence_log_likelihood(&self, x: &Matrix) -> f64 {
        let em = self.emission();
        forward_backward(self, &self.log_emissions(&em, x), false).log_likelihood
    }

    /// Joint log-probability of `x` and a given state path.
    pub fn path_log_score(&self, x: &Matrix, path: &[usize]) -> f64 {
        let em = self.emission();
        let le = self.log_emissions(&em, x);
        let mut s = math::ln(self.initial[path[0]]) + le.get(0, path[0]);
        for t in 1..path.len() {
            s += math::ln(self.transition.get(path[t - 1], path[t])) + le.get(t, path[t]);
        }
        s
    }
}

struct Posterior {
    log_likelihood: f64,
    /// `T x K` state posteriors.
    gamma: Matrix,
    /// Expected transition counts summed over time.
    xi: Matrix,
}

fn forward_backward(model: &HmmModel, log_em: &Matrix, want_posteriors: bool) -> Posterior {
    let k = model.states;
    let t_len = log_em.rows();
    let mut b = Matrix::zeros(t_len, k);
    let mut ll = NeumaierSum::default();
    for t in 0..t_len {
        let row = log_em.row(t);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ll.add(m);
        for j in 0..k {
            b.set(t, j, math::exp(row[j] - m));
        }
    }

    let mut alpha = Matrix::zeros(t_len, k);
    let mut scale = vec![0.0; t_len];
    for t in 0..t_len {
        let mut c = 0.0;
        for j in 0..k {
            let prior = if t == 0 {
                model.initial[j]
            } else {
                let prev = alpha.row(t - 1);
                (0..k).map(|i| prev[i] * model.transition.get(i, j)).sum()
            };
            let a = prior * b.get(t, j);
            alpha.set(t, j, a);
            c += a;
        }
        scale[t] = c;
        if c > 0.0 {
            for j in 0..k {
                alpha.set(t, j, alpha.get(t, j) / c);
            }
        }
        ll.add(math::ln(c));
    }

    if !want_posteriors {
        return Posterior { log_likelihood: ll.value(), gamma: Matrix::zeros(0, k), xi: Matrix::zeros(k, k) };
    }

    let mut beta = Matrix::zeros(t_len, k);
    for j in 0..k {
        beta.set(t_len - 1, j, 1.0);
    }
    for t in (0..t_len.saturating_sub(1)).rev() {
        for i in 0..k {
            let mut s = 0.0;
            for j in 0..k {
                s += model.transition.get(i, j) * b.get(t + 1, j) * beta.get(t + 1, j);
            }
            beta.set(t, i, s / scale[t + 1]);
        }
    }

    let mut gamma = Matrix::zeros(t_len, k);
    for t in 0..t_len {
        let mut s = 0.0;
        for j in 0..k {
            let g = alpha.get(t, j) * beta.get(t, j);
            gamma.set(t, j, g);
            s += g;
        }
        if s > 0.0 {
            for j in 0..k {
                gamma.set(t, j, gamma.get(t, j) / s);
            }
        }
    }

    let mut xi = Matrix::zeros(k, k);
    for t in 0..t_len.saturating_sub(1) {
        let c = scale[t + 1];
        if c <= 0.0 {
            continue;
        }
        for i in 0..k {
            let a = alpha.get(t, i);
            if a == 0.0 {
                continue;
            }
            for j in 0..k {
                let v = a * model.transition.get(i, j) * b.get(t + 1, j) * beta.get(t + 1, j) / c;
                xi.set(i, j, xi.get(i, j) + v);
            }
        }
    }
    Posterior { log_likelihood: ll.value(), gamma, xi }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &Matrix, x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for k in 0..centers.rows() {
        let d = sq_dist(centers.row(k), x);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Seeded k-means++ followed by Lloyd iterations; returns (centers, labels).
fn kmeans(frames: &Matrix, k: usize, iters: usize, rng: &mut ChaCha8Rng) -> (Matrix, Vec<usize>) {
    let n = frames.rows();
    let d = frames.cols();
    let mut centers = Matrix::zeros(k, d);
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(frames.row(first));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(frames.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, w) in dist.iter().enumerate() {
                acc += w;
                if acc > u {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            0
        };
        centers.row_mut(c).copy_from_slice(frames.row(pick));
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(frames.row(i), centers.row(c)));
        }
    }

    let mut labels: Vec<usize> = (0..n).map(|i| nearest(&centers, frames.row(i))).collect();
    for _ in 0..iters {
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let row = frames.row(i);
            let s = sums.row_mut(l);
            for j in 0..d {
                s[j] += row[j];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centers.set(c, j, sums.get(c, j) / counts[c] as f64);
                }
            }
        }
        let next: Vec<usize> = (0..n).map(|i| nearest(&centers, frames.row(i))).collect();
        let changed = next != labels;
        labels = next;
        if !changed {
            break;
        }
    }
    (centers, labels)
}

/// Fits a `cfg.states`-state HMM to all training sequences jointly.
///
/// Sequences are zero-padded to the longest training length (`t_max`), the
/// means are initialised by seeded k-means over every padded frame, and
/// exactly `cfg.em_iters` Baum-Welch updates are applied.
pub fn fit_hmm(train: &[&Matrix], cfg: &HmmConfig, seed: u64) -> Result<HmmModel> {
    let k = cfg.states;
    if train.is_empty() {
        return Err(invalid("HMM training set is empty"));
    }
    if k == 0 {
        return Err(invalid("HMM needs at least one state"));
    }
    let dim = train[0].cols();
    if let Some(bad) = train.iter().find(|x| x.cols() != dim) {
        return Err(Error::Dimension { expected: dim, found: bad.cols() });
    }
    if !train.iter().any(|x| x.rows() >= k) {
        return Err(invalid(format!("HMM needs at least one training sequence with {k} or more steps")));
    }
    let t_max = train.iter().map(|x| x.rows()).max().unwrap_or(0);
    let padded: Vec<Matrix> = train.iter().map(|x| pad_to(x, t_max)).collect();
    let refs: Vec<&Matrix> = padded.iter().collect();
    let frames = Matrix::vstack(&refs)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (centers, labels) = kmeans(&frames, k, cfg.kmeans_iters, &mut rng);

    let floor = cfg.variance_floor;
    let n = frames.rows();
    let global_var: Vec<f64> = (0..dim)
        .map(|j| {
            let s = math::population_std(&frames.column(j));
            (s * s).max(floor)
        })
        .collect();
    let mut variances = Matrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    let mut ss = Matrix::zeros(k, dim);
    for i in 0..n {
        let l = labels[i];
        counts[l] += 1;
        for j in 0..dim {
            let z = frames.get(i, j) - centers.get(l, j);
            ss.set(l, j, ss.get(l, j) + z * z);
        }
    }
    for c in 0..k {
        for j in 0..dim {
            let v = if counts[c] > 0 { ss.get(c, j) / counts[c] as f64 } else { global_var[j] };
            variances.set(c, j, v.max(floor));
        }
    }

    // add-one smoothed dynamics from the k-means label sequences
    let mut trans = Matrix::from_vec(k, k, vec![1.0; k * k])?;
    let mut init = vec![1.0; k];
    for s in 0..padded.len() {
        let seq = &labels[s * t_max..(s + 1) * t_max];
        init[seq[0]] += 1.0;
        for w in seq.windows(2) {
            trans.set(w[0], w[1], trans.get(w[0], w[1]) + 1.0);
        }
    }
    normalize_rows(&mut trans);
    let z: f64 = init.iter().sum();
    init.iter_mut().for_each(|v| *v /= z);

    let mut model = HmmModel {
        states: k,
        dim,
        means: centers,
        variances,
        transition: trans,
        initial: init,
        t_max,
        em_iters: cfg.em_iters,
        seed,
        log_likelihood: Vec::with_capacity(cfg.em_iters + 1),
    };

    for iter in 0..cfg.em_iters {
        let ll = em_step(&mut model, &padded, floor);
        if !ll.is_finite() {
            return Err(Error::NonFinite { iteration: iter });
        }
        model.log_likelihood.push(ll);
    }
    let em = model.emission();
    let mut total = NeumaierSum::default();
    for x in &padded {
        total.add(forward_backward(&model, &model.log_emissions(&em, x), false).log_likelihood);
    }
    let final_ll = total.value();
    if !final_ll.is_finite() {
        return Err(Error::NonFinite { iteration: cfg.em_iters });
    }
    model.log_likelihood.push(final_ll);
    Ok(model)
}

fn normalize_rows(m: &mut Matrix) {
    for i in 0..m.rows() {
        let row = m.row_mut(i);
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}

/// One E-step + M-step; returns the log-likelihood of the parameters the
/// E-step was run with.
fn em_step(model: &mut HmmModel, seqs: &[Matrix], floor: f64) -> f64 {
    let k = model.states;
    let dim = model.dim;
    let em = model.emission();
    let mut total = NeumaierSum::default();
    let mut posts = Vec::with_capacity(seqs.len());
    for x in seqs {
        let p = forward_backward(model, &model.log_emissions(&em, x), true);
        total.add(p.log_likelihood);
        posts.push(p);
    }

    let mut init = vec![0.0; k];
    let mut xi = Matrix::zeros(k, k);
    let mut occ = vec![0.0; k];
    let mut wsum = Matrix::zeros(k, dim);
    for (x, p) in seqs.iter().zip(&posts) {
        for j in 0..k {
            init[j] += p.gamma.get(0, j);
        }
        for i in 0..k {
            for j in 0..k {
                xi.set(i, j, xi.get(i, j) + p.xi.get(i, j));
            }
        }
        for t in 0..x.rows() {
            let row = x.row(t);
            for j in 0..k {
                let g = p.gamma.get(t, j);
                occ[j] += g;
                let w = wsum.row_mut(j);
                for d in 0..dim {
                    w[d] += g * row[d];
                }
            }
        }
    }

    let z: f64 = init.iter().sum();
    if z > 0.0 {
        for j in 0..k {
            model.initial[j] = init[j] / z;
        }
    }
    for i in 0..k {
        let s: f64 = xi.row(i).iter().sum();
        if s > 0.0 {
            for j in 0..k {
                model.transition.set(i, j, xi.get(i, j) / s);
            }
        }
    }
    for j in 0..k {
        if occ[j] > 0.0 {
            for d in 0..dim {
                model.means.set(j, d, wsum.get(j, d) / occ[j]);
            }
        }
    }
    let mut sq = Matrix::zeros(k, dim);
    for (x, p) in seqs.iter().zip(&posts) {
        for t in 0..x.rows() {
            let row = x.row(t);
            for j in 0..k {
                let g = p.gamma.get(t, j);
                if g == 0.0 {
                    continue;
                }
                let mu = model.means.row(j);
                let s = sq.row_mut(j);
                for d in 0..dim {
                    let e = row[d] - mu[d];
                    s[d] += g * e * e;
                }
            }
        }
    }
    for j in 0..k {
        if occ[j] > 0.0 {
            for d in 0..dim {
                model.variances.set(j, d, (sq.get(j, d) / occ[j]).max(floor));
            }
        }
    }
    total.value()
}

/// Most likely state path (ties resolved towards the lowest state index) and
/// its joint log-probability.
pub fn viterbi(model: &HmmModel, x: &Matrix) -> (Vec<usize>, f64) {
    let k = model.states;
    let t_len = x.rows();
    if t_len == 0 {
        return (Vec::new(), 0.0);
    }
    let em = model.emission();
    let le = model.log_emissions(&em, x);
    let log_a: Vec<f64> = model.transition.as_slice().iter().map(|&a| math::ln(a)).collect();
    let mut delta: Vec<f64> = (0..k).map(|j| math::ln(model.initial[j]) + le.get(0, j)).collect();
    let mut back = vec![0usize; t_len * k];
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; k];
        for j in 0..k {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in 0..k {
                let v = delta[i] + log_a[i * k + j];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + le.get(t, j);
            back[t * k + j] = arg;
        }
        delta = next;
    }
    let mut last = 0;
    for j in 1..k {
        if delta[j] > delta[last] {
            last = j;
        }
    }
    let score = delta[last];
    let mut path = vec![0usize; t_len];
    path[t_len - 1] = last;
    for t in (1..t_len).rev() {
        path[t - 1] = back[t * k + path[t]];
    }
    (path, score)
}

/// Per-state occupancy then per-state run count, both divided by `t_max`.
pub fn state_dynamics(path: &[usize], states: usize, t_max: usize) -> Vec<f64> {
    let mut occupancy = vec![0usize; states];
    let mut runs = vec![0usize; states];
    for (t, &s) in path.iter().enumerate() {
        occupancy[s] += 1;
        if t == 0 || path[t - 1] != s {
            runs[s] += 1;
        }
    }
    let denom = t_max as f64;
    occupancy.iter().chain(runs.iter()).map(|&c| c as f64 / denom).collect()
}

/// Duration and frequency features of the Viterbi path of `x` padded to the
/// model's `t_max`. The flag reports whether `x` had to be truncated.
pub fn hmm_dynamics(model: &HmmModel, x: &Matrix) -> Result<(Vec<f64>, bool)> {
    if x.cols() != model.dim {
        return Err(Error::Dimension { expected: model.dim, found: x.cols() });
    }
    let truncated = x.rows() > model.t_max;
    let padded = pad_to(x, model.t_max);
    let (path, _) = viterbi(model, &padded);
    Ok((state_dynamics(&path, model.states, model.t_max), truncated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::GaussianHmm;

    #[test]
    fn dynamics_of_hand_path() {
        assert_eq!(state_dynamics(&[0, 0, 1, 1], 2, 4), vec![0.5, 0.5, 0.25, 0.25]);
        assert_eq!(state_dynamics(&[0; 5], 4, 5), vec![1.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0]);
        assert_eq!(state_dynamics(&[2, 0, 2], 3, 3)[3..], [1.0 / 3.0, 0.0, 2.0 / 3.0]);
    }

    fn planted(seed: u64, n: usize, t: usize) -> (GaussianHmm, Vec<Matrix>) {
        let hmm = GaussianHmm::well_separated(4, 2, 6.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seqs = (0..n).map(|_| hmm.sample(t, &mut rng)).collect();
        (hmm, seqs)
    }

    #[test]
    fn deterministic_given_seed() {
        let (_, seqs) = planted(3, 10, 40);
        let refs: Vec<&Matrix> = seqs.iter().collect();
        let a = fit_hmm(&refs, &HmmConfig::default(), 9).unwrap();
        let b = fit_hmm(&refs, &HmmConfig::default(), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.log_likelihood.len(), 21);
    }

    #[test]
    fn parameters_stay_normalised() {
        let (_, seqs) = planted(4, 12, 50);
        let refs: Vec<&Matrix> = seqs.iter().collect();
        let m = fit_hmm(&refs, &HmmConfig::default(), 1).unwrap();
        assert!((m.initial.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..4 {
            assert!((m.transition.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(m.variances.as_slice().iter().all(|v| *v >= 1e-6));
    }

    #[test]
    fn constant_data_hits_variance_floor() {
        let x = Matrix::from_vec(30, 2, vec![1.5; 60]).unwrap();
        let refs = [&x, &x, &x];
        let m = fit_hmm(&refs, &HmmConfig::default(), 0).unwrap();
        assert!(m.log_likelihood.iter().all(|v| v.is_finite()));
        assert!(m.variances.as_slice().contains(&1e-6));
        let (dyn_, _) = hmm_dynamics(&m, &x).unwrap();
        let occupied = dyn_[..4].iter().filter(|v| **v > 0.0).count();
        assert_eq!(occupied, 1);
        assert!((dyn_[..4].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(fit_hmm(&[], &HmmConfig::default(), 0).is_err());
        let short = Matrix::zeros(3, 1);
        assert!(fit_hmm(&[&short], &HmmConfig::default(), 0).is_err());
        let a = Matrix::zeros(5, 1);
        let b = Matrix::zeros(5, 2);
        assert!(matches!(fit_hmm(&[&a, &b], &HmmConfig::default(), 0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn viterbi_beats_random_paths() {
        let (_, seqs) = planted(5, 8, 30);
        let refs: Vec<&Matrix> = seqs.iter().collect();
        let m = fit_hmm(&refs, &HmmConfig::default(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for x in &seqs {
            let (path, score) = viterbi(&m, x);
            assert!((m.path_log_score(x, &path) - score).abs() < 1e-6);
            for _ in 0..100 {
                let p: Vec<usize> = (0..x.rows()).map(|_| rng.random_range(0..4)).collect();
                assert!(score >= m.path_log_score(x, &p));
            }
        }
    }

    #[test]
    fn truncation_is_flagged() {
        let (_, seqs) = planted(6, 4, 20);
        let refs: Vec<&Matrix> = seqs.iter().collect();
        let m = fit_hmm(&refs, &HmmConfig::default(), 2).unwrap();
        let long = planted(7, 1, 35).1.remove(0);
        let (v, truncated) = hmm_dynamics(&m, &long).unwrap();
        assert!(truncated);
        assert!((v[..4].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dynamics_depend_on_row_order() {
        // two regimes: ordered blocks give one run per state, interleaving gives many
        let mut rows = Vec::new();
        for t in 0..40 {
            rows.push([if t < 20 { 0.0 } else { 10.0 }]);
        }
        let ordered = Matrix::from_rows(&rows).unwrap();
        let idx: Vec<usize> = (0..40).map(|i| if i % 2 == 0 { i / 2 } else { 20 + i / 2 }).collect();
        let shuffled = ordered.select_rows(&idx);
        let cfg = HmmConfig { states: 2, ..HmmConfig::default() };
        let m = fit_hmm(&[&ordered, &shuffled], &cfg, 0).unwrap();
        let (a, _) = hmm_dynamics(&m, &ordered).unwrap();
        let (b, _) = hmm_dynamics(&m, &shuffled).unwrap();
        assert_ne!(a[2..], b[2..]);
        // pooled statistics ignore the order
        assert_eq!(crate::temporal::pool_quantiles(&ordered, &[0.5]), crate::temporal::pool_quantiles(&shuffled, &[0.5]));
    }
}
