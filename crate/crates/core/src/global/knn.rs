use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Scaler;
use crate::error::{Error, Result};
use crate::metrics::rmae;
use crate::N_VARIABLES;

/// Distances below this (in scaled units) count as an exact hit.
pub const ZERO_DIST_TOL: f64 = 1e-12;

/// Neighbor weights for one query.
#[derive(Debug, Clone, PartialEq)]
pub enum Neighbors {
    /// The query coincides with this reference point.
    Exact(usize),
    /// `(reference, normalized weight)`, nearest first.
    Weighted(Vec<(usize, f64)>),
}

/// Inverse-distance weights `phi_f = 1 / |x_f - q|` over the `k` nearest rows
/// of `points`, normalized to sum to one. Equal distances go to the lower
/// index.
pub fn idw_neighbors(points: &DMatrix<f64>, query: &[f64], k: usize, tol: f64) -> Neighbors {
    let mut dist: Vec<(f64, usize)> = (0..points.nrows())
        .map(|i| {
            let d2: f64 = query
                .iter()
                .enumerate()
                .map(|(j, q)| (points[(i, j)] - q).powi(2))
                .sum();
            (d2.sqrt(), i)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if dist[0].0 < tol {
        return Neighbors::Exact(dist[0].1);
    }
    let near = &dist[..k.min(dist.len())];
    let total: f64 = near.iter().map(|(d, _)| 1.0 / d).sum();
    Neighbors::Weighted(near.iter().map(|&(d, i)| (i, (1.0 / d) / total)).collect())
}

/// Blends column `var` of the snapshots (`n_p x 4` each) with the weights.
pub fn blend(snapshots: &[DMatrix<f64>], var: usize, neighbors: &Neighbors) -> Vec<f64> {
    match neighbors {
        Neighbors::Exact(i) => snapshots[*i].column(var).iter().copied().collect(),
        Neighbors::Weighted(w) => {
            let n_p = snapshots[w[0].0].nrows();
            let mut out = vec![0.0; n_p];
            for &(i, wt) in w {
                for (o, v) in out.iter_mut().zip(snapshots[i].column(var).iter()) {
                    *o += wt * v;
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnSpec {
    /// Neighbor count per output variable (Cp, Cfx, Cfy, Cfz).
    pub k: [usize; N_VARIABLES],
    pub zero_dist_tol: f64,
}

impl Default for KnnSpec {
    fn default() -> Self {
        KnnSpec {
            k: [7, 6, 9, 6],
            zero_dist_tol: ZERO_DIST_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub scaler: Scaler,
    /// `n_tr x 3`
    pub scaled_train_params: DMatrix<f64>,
    /// One `n_p x 4` matrix per training condition.
    pub train_snapshots: Vec<DMatrix<f64>>,
    pub k: [usize; N_VARIABLES],
    pub zero_dist_tol: f64,
}

pub fn knn_fit(spec: &KnnSpec, params: &DMatrix<f64>, snapshots: Vec<DMatrix<f64>>) -> Result<KnnModel> {
    let n = params.nrows();
    if n == 0 || snapshots.len() != n {
        return Err(Error::invalid(
            "kNN training set",
            format!("{n} parameter rows vs {} snapshots", snapshots.len()),
        ));
    }
    if let Some(&k) = spec.k.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::invalid("kNN spec", format!("k = {k} must lie in 1..={n}")));
    }
    let scaler = Scaler::fit(params);
    Ok(KnnModel {
        scaled_train_params: scaler.apply(params),
        scaler,
        train_snapshots: snapshots,
        k: spec.k,
        zero_dist_tol: spec.zero_dist_tol,
    })
}

/// Snapshot (`n_p x 4`) at raw flow parameters `p`.
pub fn knn_predict(m: &KnnModel, p: &[f64; 3]) -> DMatrix<f64> {
    let q = m.scaler.apply_row(p);
    let n_p = m.train_snapshots[0].nrows();
    let mut out = DMatrix::zeros(n_p, N_VARIABLES);
    for v in 0..N_VARIABLES {
        let nb = idw_neighbors(&m.scaled_train_params, &q, m.k[v], m.zero_dist_tol);
        out.set_column(v, &nalgebra::DVector::from_vec(blend(&m.train_snapshots, v, &nb)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: [usize; N_VARIABLES],
    /// `scores[v][i]`: mean held-out rMAE of variable `v` at `k_range[i]`,
    /// averaged over repeats.
    pub scores: Vec<Vec<f64>>,
    pub k_range: Vec<usize>,
}

/// Repeated hold-out selection of `k`: each repeat removes `removals` random
/// snapshots, predicts them from the rest, and records the mean rMAE per `k`.
/// Scores are averaged over repeats before taking the argmin (smaller `k` on
/// ties).
pub fn knn_select_k(
    params: &DMatrix<f64>,
    snapshots: &[DMatrix<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    removals: usize,
    repeats: usize,
    seed: u64,
) -> Result<KSelection> {
    let n = params.nrows();
    let ks: Vec<usize> = k_range.collect();
    let k_max = *ks.iter().max().ok_or_else(|| Error::invalid("k range", "empty"))?;
    if ks.contains(&0) {
        return Err(Error::invalid("k range", "k must be >= 1"));
    }
    if n <= k_max + removals || snapshots.len() != n || repeats == 0 {
        return Err(Error::invalid(
            "k selection",
            format!("need repeats >= 1 and n_tr > max k + removals (n_tr={n}, max k={k_max}, removals={removals})"),
        ));
    }
    let scaled = Scaler::fit(params).apply(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut totals = vec![vec![0.0; ks.len()]; N_VARIABLES];
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..repeats {
        order.shuffle(&mut rng);
        let (held, kept) = order.split_at(removals);
        let refs = scaled.select_rows(kept);
        let ref_snaps: Vec<DMatrix<f64>> = kept.iter().map(|&i| snapshots[i].clone()).collect();
        let mut counts = vec![vec![0usize; ks.len()]; N_VARIABLES];
        let mut sums = vec![vec![0.0; ks.len()]; N_VARIABLES];
        for &h in held {
            let q: Vec<f64> = scaled.row(h).iter().copied().collect();
            for (ki, &k) in ks.iter().enumerate() {
                let nb = idw_neighbors(&refs, &q, k, ZERO_DIST_TOL);
                for v in 0..N_VARIABLES {
                    let truth: Vec<f64> = snapshots[h].column(v).iter().copied().collect();
                    if let Some(e) = rmae(&truth, &blend(&ref_snaps, v, &nb)) {
                        sums[v][ki] += e;
                        counts[v][ki] += 1;
                    }
                }
            }
        }
        for v in 0..N_VARIABLES {
            for ki in 0..ks.len() {
                totals[v][ki] += if counts[v][ki] > 0 {
                    sums[v][ki] / counts[v][ki] as f64
                } else {
                    0.0
                };
            }
        }
    }
    let scores: Vec<Vec<f64>> = totals
        .into_iter()
        .map(|row| row.into_iter().map(|s| s / repeats as f64).collect())
        .collect();
    let mut k = [0; N_VARIABLES];
    for v in 0..N_VARIABLES {
        let mut best = 0;
        for ki in 1..ks.len() {
            if scores[v][ki] < scores[v][best] {
                best = ki;
            }
        }
        k[v] = ks[best];
    }
    Ok(KSelection {
        k,
        scores,
        k_range: ks,
    })
}
