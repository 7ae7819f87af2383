use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::knn::{blend, idw_neighbors, Neighbors, ZERO_DIST_TOL};
use super::RbfSpec;
use crate::dataset::{snapshot_matrix, Scaler};
use crate::error::{Error, Result};
use crate::numerics::{geodesic_distances, knn_graph, pairwise_distances, rbf_predict, sym_eig, RbfModel};
use crate::N_VARIABLES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsomapSpec {
    pub r: usize,
    pub k_graph: usize,
    /// Backmapping neighbor count per output variable.
    pub k_back: [usize; N_VARIABLES],
    pub rbf: RbfSpec,
}

impl Default for IsomapSpec {
    fn default() -> Self {
        IsomapSpec {
            r: 3,
            k_graph: 10,
            k_back: [7, 7, 12, 9],
            rbf: RbfSpec::default(),
        }
    }
}

/// Classical MDS result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    /// `n x r`, rows are points.
    pub coords: DMatrix<f64>,
    /// Full spectrum of the double-centered Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors (columns) matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

/// Gram matrix `B = -1/2 H (D o D) H` with `H = I - J / n`.
pub fn double_center(d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.nrows();
    let sq = d.map(|v| v * v);
    let row_means: Vec<f64> = sq.row_iter().map(|r| r.sum() / n as f64).collect();
    let col_means: Vec<f64> = sq.column_iter().map(|c| c.sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - col_means[j] + grand));
    // Symmetrize away rounding.
    (&b + b.transpose()) * 0.5
}

fn spectrum_summary(values: &[f64]) -> String {
    let head: Vec<String> = values.iter().take(6).map(|v| format!("{v:.3e}")).collect();
    format!("[{}{}]", head.join(", "), if values.len() > 6 { ", ..." } else { "" })
}

fn coords_from(eig_vectors: &DMatrix<f64>, values: &[f64], r: usize) -> DMatrix<f64> {
    DMatrix::from_fn(eig_vectors.nrows(), r, |i, c| eig_vectors[(i, c)] * values[c].sqrt())
}

/// Embedding rows `P_r Lambda_r^(1/2)` from the `r` leading eigenpairs.
pub fn classical_mds(d: &DMatrix<f64>, r: usize) -> Result<Embedding> {
    if r == 0 || r > d.nrows() {
        return Err(Error::invalid("embedding dimension", format!("r = {r} with {} points", d.nrows())));
    }
    let eig = sym_eig(&double_center(d))?;
    let values: Vec<f64> = eig.values.iter().copied().collect();
    let tol = 1e-12 * values[0].abs().max(f64::MIN_POSITIVE);
    let positive = values.iter().take_while(|&&v| v > tol).count();
    if positive < r {
        return Err(Error::Numerical(format!(
            "only {positive} positive eigenvalues for an r = {r} embedding; spectrum {}",
            spectrum_summary(&values)
        )));
    }
    Ok(Embedding {
        coords: coords_from(&eig.vectors, &values, r),
        eigenvalues: values,
        eigenvectors: eig.vectors,
    })
}

/// `(r, |D_G - D_Z(r)|_F)` for every `r` in the range that has a positive
/// eigenvalue.
pub fn isomap_dim_scan(
    d_g: &DMatrix<f64>,
    emb: &Embedding,
    r_range: std::ops::RangeInclusive<usize>,
) -> Vec<(usize, f64)> {
    let tol = 1e-12 * emb.eigenvalues[0].abs().max(f64::MIN_POSITIVE);
    r_range
        .filter(|&r| r >= 1 && r <= emb.eigenvalues.len() && emb.eigenvalues[r - 1] > tol)
        .map(|r| {
            let z = coords_from(&emb.eigenvectors, &emb.eigenvalues, r);
            (r, (d_g - pairwise_distances(&z)).norm())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsomapVariable {
    /// `n_tr x r`, zero column means.
    pub train_embedding: DMatrix<f64>,
    pub forward_map: RbfModel,
    pub eigenvalues: Vec<f64>,
    pub k_back: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsomapModel {
    pub scaler: Scaler,
    pub scaled_train_params: DMatrix<f64>,
    pub train_snapshots: Vec<DMatrix<f64>>,
    pub r: usize,
    pub k_graph: usize,
    pub variables: Vec<IsomapVariable>,
}

/// Geodesic distances between the snapshots of one variable.
pub fn snapshot_geodesics(snapshots: &[DMatrix<f64>], var: usize, k_graph: usize) -> Result<DMatrix<f64>> {
    let points = snapshot_matrix(snapshots, var).transpose();
    Ok(geodesic_distances(&knn_graph(&points, k_graph)?))
}

pub fn isomap_fit(spec: &IsomapSpec, params: &DMatrix<f64>, snapshots: Vec<DMatrix<f64>>) -> Result<IsomapModel> {
    let n = params.nrows();
    if snapshots.len() != n || n <= spec.r {
        return Err(Error::invalid(
            "IsoMap training set",
            format!("{n} parameter rows, {} snapshots, r = {}", snapshots.len(), spec.r),
        ));
    }
    if let Some(&k) = spec.k_back.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::invalid("IsoMap spec", format!("k_back = {k} must lie in 1..={n}")));
    }
    let scaler = Scaler::fit(params);
    let scaled = scaler.apply(params);
    let mut variables = Vec::with_capacity(N_VARIABLES);
    for v in 0..N_VARIABLES {
        let d_g = snapshot_geodesics(&snapshots, v, spec.k_graph)?;
        let emb = classical_mds(&d_g, spec.r)?;
        let forward_map = spec.rbf.fit(&scaled, &emb.coords)?;
        variables.push(IsomapVariable {
            train_embedding: emb.coords,
            forward_map,
            eigenvalues: emb.eigenvalues,
            k_back: spec.k_back[v],
        });
    }
    Ok(IsomapModel {
        scaler,
        scaled_train_params: scaled,
        train_snapshots: snapshots,
        r: spec.r,
        k_graph: spec.k_graph,
        variables,
    })
}

/// Forward RBF into the latent space, then inverse-distance kNN over the
/// training embedding. A query on a training condition returns that snapshot.
pub fn isomap_predict(m: &IsomapModel, p: &[f64; 3]) -> DMatrix<f64> {
    let q = m.scaler.apply_row(p);
    let n_p = m.train_snapshots[0].nrows();
    let mut out = DMatrix::zeros(n_p, N_VARIABLES);
    let hit = match idw_neighbors(&m.scaled_train_params, &q, 1, ZERO_DIST_TOL) {
        Neighbors::Exact(i) => Some(i),
        Neighbors::Weighted(_) => None,
    };
    let qm = DMatrix::from_row_slice(1, 3, &q);
    for (v, var) in m.variables.iter().enumerate() {
        let nb = match hit {
            Some(i) => Neighbors::Exact(i),
            None => {
                let z = rbf_predict(&var.forward_map, &qm);
                let z: Vec<f64> = z.row(0).iter().copied().collect();
                idw_neighbors(&var.train_embedding, &z, var.k_back, ZERO_DIST_TOL)
            }
        };
        out.set_column(v, &DVector::from_vec(blend(&m.train_snapshots, v, &nb)));
    }
    out
}
