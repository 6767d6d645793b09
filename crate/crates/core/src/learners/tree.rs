//! Binary decision trees shared by the boosting and forest learners.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Larger gain wins; exact ties go to the lower feature, then the lower threshold.
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.gain > o.gain
                    || (self.gain == o.gain
                        && (self.feature < o.feature || (self.feature == o.feature && self.threshold < o.threshold)))
            }
        }
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t >= hi {
        lo
    } else {
        t
    }
}

const MIN_GAIN: f64 = 1e-12;

/// Scans every boundary between distinct sorted values of one feature;
/// `score(order, pos)` rates the split that puts `order[..pos]` left.
fn scan_feature<F>(x: &Matrix, idx: &[usize], feature: usize, mut score: F) -> Option<Candidate>
where
    F: FnMut(&[usize], usize) -> f64,
{
    let mut order: Vec<usize> = idx.to_vec();
    order.sort_by(|&a, &b| x.get(a, feature).total_cmp(&x.get(b, feature)).then(a.cmp(&b)));
    let mut best: Option<Candidate> = None;
    for pos in 1..order.len() {
        let gain = score(&order, pos);
        let lo = x.get(order[pos - 1], feature);
        let hi = x.get(order[pos], feature);
        // zero-gain splits are kept so that pure interactions (XOR) can be reached
        if lo == hi || gain < -MIN_GAIN {
            continue;
        }
        let c = Candidate { gain, feature, threshold: midpoint(lo, hi) };
        if c.beats(&best) {
            best = Some(c);
        }
    }
    best
}

fn is_constant(x: &Matrix, idx: &[usize], feature: usize) -> bool {
    let v = x.get(idx[0], feature);
    idx.iter().all(|&i| x.get(i, feature) == v)
}

/// Least-squares regression tree on `targets` (variance-reduction splits,
/// exhaustive threshold scan). Returns the tree with placeholder leaf values
/// and the row indices that reach each leaf, keyed by node index.
pub fn grow_regression(
    x: &Matrix,
    targets: &[f64],
    rows: &[usize],
    max_depth: usize,
    min_samples_split: usize,
) -> (Tree, Vec<(usize, Vec<usize>)>) {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut leaves = Vec::new();
    let mut stack = vec![(0usize, rows.to_vec(), 0usize)];
    while let Some((node, idx, depth)) = stack.pop() {
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| targets[i]).sum();
        let sse: f64 = {
            let m = total / n as f64;
            idx.iter().map(|&i| (targets[i] - m) * (targets[i] - m)).sum()
        };
        let mut best: Option<Candidate> = None;
        if depth < max_depth && n >= min_samples_split && sse > MIN_GAIN {
            for f in 0..x.cols() {
                // gain = S_l^2/n_l + S_r^2/n_r - S^2/n
                let mut prefix = Vec::new();
                let c = scan_feature(x, &idx, f, |order, pos| {
                    if prefix.is_empty() {
                        let mut acc = 0.0;
                        prefix.push(0.0);
                        for &i in order {
                            acc += targets[i];
                            prefix.push(acc);
                        }
                    }
                    let sl = prefix[pos];
                    let sr = total - sl;
                    let nl = pos as f64;
                    let nr = (order.len() - pos) as f64;
                    sl * sl / nl + sr * sr / nr - total * total / (nl + nr)
                });
                if let Some(c) = c {
                    if c.beats(&best) {
                        best = Some(c);
                    }
                }
            }
        }
        match best {
            Some(c) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.get(i, c.feature) <= c.threshold);
                let li = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[node] = Node::Split { feature: c.feature, threshold: c.threshold, left: li, right: li + 1 };
                stack.push((li + 1, r, depth + 1));
                stack.push((li, l, depth + 1));
            }
            None => leaves.push((node, idx)),
        }
    }
    leaves.sort_by_key(|(n, _)| *n);
    (Tree { nodes }, leaves)
}

/// Gini classification tree grown to purity (or fewer than
/// `min_samples_split` rows). Each split inspects features in a random order
/// until `max_features` non-constant ones have been scored. Leaves hold the
/// positive-class fraction.
pub fn grow_classification<R: Rng>(
    x: &Matrix,
    y: &[bool],
    rows: &[usize],
    max_features: usize,
    min_samples_split: usize,
    rng: &mut R,
) -> Tree {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![(0usize, rows.to_vec())];
    let mut features: Vec<usize> = (0..x.cols()).collect();
    while let Some((node, idx)) = stack.pop() {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| y[i]).count();
        let frac = pos as f64 / n as f64;
        let mut best: Option<Candidate> = None;
        if n >= min_samples_split && pos > 0 && pos < n {
            let parent = n as f64 * gini(pos as f64, n as f64);
            features.shuffle(rng);
            let mut inspected = 0;
            for &f in &features {
                if inspected >= max_features {
                    break;
                }
                if is_constant(x, &idx, f) {
                    continue;
                }
                inspected += 1;
                let mut prefix = Vec::new();
                let c = scan_feature(x, &idx, f, |order, at| {
                    if prefix.is_empty() {
                        let mut acc = 0usize;
                        prefix.push(0usize);
                        for &i in order {
                            acc += usize::from(y[i]);
                            prefix.push(acc);
                        }
                    }
                    let pl = prefix[at] as f64;
                    let nl = at as f64;
                    let pr = pos as f64 - pl;
                    let nr = n as f64 - nl;
                    parent - nl * gini(pl, nl) - nr * gini(pr, nr)
                });
                if let Some(c) = c {
                    if c.beats(&best) {
                        best = Some(c);
                    }
                }
            }
        }
        match best {
            Some(c) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.get(i, c.feature) <= c.threshold);
                let li = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[node] = Node::Split { feature: c.feature, threshold: c.threshold, left: li, right: li + 1 };
                stack.push((li + 1, r));
                stack.push((li, l));
            }
            None => nodes[node] = Node::Leaf { value: frac },
        }
    }
    Tree { nodes }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}
