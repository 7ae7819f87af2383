//! Exact CART regression tree with multi-output squared-error splits.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeSpec {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Kept for reproducibility manifests; ties are broken deterministically
    /// by feature index then threshold, so no randomness is drawn.
    pub seed: u64,
}

impl Default for TreeSpec {
    fn default() -> Self {
        TreeSpec {
            max_depth: None,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// Root at index 0.
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub n_outputs: usize,
}

/// Best split of one node: rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Sum over outputs of `S_L^2 / n_L + S_R^2 / n_R`; larger is better.
    pub gain: f64,
    pub n_left: usize,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    if m >= b {
        a
    } else {
        m
    }
}

/// Exhaustive search over midpoints between consecutive distinct values.
/// Minimizing the children's total SSE is the same as maximizing `gain`,
/// because the sum of squares of the node is fixed.
pub fn best_split(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    rows: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = rows.len();
    let q = y.ncols();
    if n < 2 * min_leaf {
        return None;
    }
    let mut total = vec![0.0; q];
    for &r in rows {
        for j in 0..q {
            total[j] += y[(r, j)];
        }
    }
    let mut best: Option<SplitChoice> = None;
    let mut sorted = rows.to_vec();
    let mut left = vec![0.0; q];
    for f in 0..x.ncols() {
        sorted.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(a.cmp(&b)));
        left.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n - 1 {
            let r = sorted[i];
            for j in 0..q {
                left[j] += y[(r, j)];
            }
            let n_left = i + 1;
            let (a, b) = (x[(r, f)], x[(sorted[i + 1], f)]);
            if a == b || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let (nl, nr) = (n_left as f64, (n - n_left) as f64);
            let gain: f64 = (0..q)
                .map(|j| {
                    let right = total[j] - left[j];
                    left[j] * left[j] / nl + right * right / nr
                })
                .sum();
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(a, b),
                    gain,
                    n_left,
                });
            }
        }
    }
    best
}

fn mean_row(y: &DMatrix<f64>, rows: &[usize]) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..y.ncols())
        .map(|j| rows.iter().map(|&r| y[(r, j)]).sum::<f64>() / n)
        .collect()
}

fn constant_targets(y: &DMatrix<f64>, rows: &[usize]) -> bool {
    rows.iter()
        .all(|&r| (0..y.ncols()).all(|j| y[(r, j)] == y[(rows[0], j)]))
}

pub fn tree_fit(spec: &TreeSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<TreeModel> {
    if spec.min_samples_leaf == 0 {
        return Err(Error::invalid("tree spec", "min_samples_leaf must be >= 1"));
    }
    if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::invalid("tree input", "empty training data"));
    }
    if x.nrows() != y.nrows() {
        return Err(Error::invalid(
            "tree input",
            format!("{} input rows vs {} target rows", x.nrows(), y.nrows()),
        ));
    }
    let mut nodes = Vec::new();
    // (node slot, rows, depth); slots are reserved before children are built.
    let mut pending = vec![(0usize, (0..x.nrows()).collect::<Vec<_>>(), 0usize)];
    nodes.push(Node::Leaf { value: Vec::new() });
    while let Some((slot, rows, depth)) = pending.pop() {
        let stop = spec.max_depth.is_some_and(|d| depth >= d) || constant_targets(y, &rows);
        let choice = if stop {
            None
        } else {
            best_split(x, y, &rows, spec.min_samples_leaf)
        };
        match choice {
            None => nodes[slot] = Node::Leaf { value: mean_row(y, &rows) },
            Some(c) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| x[(i, c.feature)] <= c.threshold);
                let (left, right) = (nodes.len(), nodes.len() + 1);
                nodes.push(Node::Leaf { value: Vec::new() });
                nodes.push(Node::Leaf { value: Vec::new() });
                nodes[slot] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                pending.push((right, r, depth + 1));
                pending.push((left, l, depth + 1));
            }
        }
    }
    Ok(TreeModel {
        nodes,
        n_features: x.ncols(),
        n_outputs: y.ncols(),
    })
}

impl TreeModel {
    fn leaf(&self, row: impl Fn(usize) -> f64) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            deepest = deepest.max(d);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        deepest
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

pub fn tree_predict(model: &TreeModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != model.n_features {
        return Err(Error::invalid(
            "tree input",
            format!("expected {} columns, got {}", model.n_features, x.ncols()),
        ));
    }
    let mut out = DMatrix::zeros(x.nrows(), model.n_outputs);
    for i in 0..x.nrows() {
        let leaf = model.leaf(|f| x[(i, f)]);
        for (j, v) in leaf.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}
