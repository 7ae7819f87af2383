use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::RbfSpec;
use crate::dataset::{snapshot_matrix, Scaler};
use crate::error::{Error, Result};
use crate::numerics::{rbf_predict, svd, RbfModel};
use crate::N_VARIABLES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PodSpec {
    pub energy_threshold: f64,
    pub rbf: RbfSpec,
}

impl Default for PodSpec {
    fn default() -> Self {
        PodSpec {
            energy_threshold: 0.99,
            rbf: RbfSpec::default(),
        }
    }
}

/// Reduced basis of one output variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodBasis {
    pub mean_field: DVector<f64>,
    /// `n_p x r`, orthonormal columns.
    pub u_r: DMatrix<f64>,
    pub sigma_r: DVector<f64>,
    /// Maps scaled parameters to the `r` raw right-singular coordinates.
    pub latent: RbfModel,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodModel {
    pub scaler: Scaler,
    pub energy_threshold: f64,
    pub variables: Vec<PodBasis>,
}

/// Smallest `r` whose leading singular values sum to at least
/// `threshold` times the total.
pub fn energy_rank(sigma: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid("energy threshold", format!("{threshold} is outside (0, 1]")));
    }
    let total: f64 = sigma.iter().sum();
    let target = threshold * total;
    let mut acc = 0.0;
    for (i, s) in sigma.iter().enumerate() {
        acc += s;
        if acc >= target {
            return Ok(i + 1);
        }
    }
    Ok(sigma.len())
}

/// Singular values below this fraction of the largest are treated as zero;
/// centering alone removes one direction, so such modes always exist.
const RANK_TOL: f64 = 1e-10;

fn fit_variable(scaled: &DMatrix<f64>, snaps: DMatrix<f64>, spec: &PodSpec) -> Result<PodBasis> {
    let n_tr = snaps.ncols();
    let mean_field = snaps.column_mean();
    let mut centered = snaps;
    for mut c in centered.column_iter_mut() {
        c -= &mean_field;
    }
    let dec = svd(&centered)?;
    let sig = dec.sigma.as_slice();
    let numerical = sig
        .iter()
        .take_while(|&&s| s > RANK_TOL * sig[0].max(f64::MIN_POSITIVE))
        .count();
    let r = energy_rank(sig, spec.energy_threshold)?.min(numerical).max(1);
    // Rows of V_r are the training coordinates.
    let z = DMatrix::from_fn(n_tr, r, |f, i| dec.vt[(i, f)]);
    let latent = spec.rbf.fit(scaled, &z)?;
    Ok(PodBasis {
        mean_field,
        u_r: dec.u.columns(0, r).into_owned(),
        sigma_r: dec.sigma.rows(0, r).into_owned(),
        latent,
        r,
    })
}

/// POD per variable on centered snapshots plus one RBF from the scaled
/// parameters to the retained coordinates.
pub fn pod_fit(spec: &PodSpec, params: &DMatrix<f64>, snapshots: &[DMatrix<f64>]) -> Result<PodModel> {
    if !(spec.energy_threshold > 0.0 && spec.energy_threshold <= 1.0) {
        return Err(Error::invalid(
            "energy threshold",
            format!("{} is outside (0, 1]", spec.energy_threshold),
        ));
    }
    if params.nrows() < 2 || snapshots.len() != params.nrows() {
        return Err(Error::invalid(
            "POD training set",
            format!("{} parameter rows vs {} snapshots (need >= 2)", params.nrows(), snapshots.len()),
        ));
    }
    let scaler = Scaler::fit(params);
    let scaled = scaler.apply(params);
    let variables = (0..N_VARIABLES)
        .map(|v| fit_variable(&scaled, snapshot_matrix(snapshots, v), spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(PodModel {
        scaler,
        energy_threshold: spec.energy_threshold,
        variables,
    })
}

impl PodBasis {
    /// `mean + U_r diag(sigma_r) z`.
    pub fn reconstruct(&self, z: &[f64]) -> DVector<f64> {
        let coeffs = DVector::from_iterator(self.r, (0..self.r).map(|i| self.sigma_r[i] * z[i]));
        &self.mean_field + &self.u_r * coeffs
    }
}

pub fn pod_predict(m: &PodModel, p: &[f64; 3]) -> DMatrix<f64> {
    let q = DMatrix::from_row_slice(1, 3, &m.scaler.apply_row(p));
    let n_p = m.variables[0].mean_field.len();
    let mut out = DMatrix::zeros(n_p, N_VARIABLES);
    for (v, basis) in m.variables.iter().enumerate() {
        let z = rbf_predict(&basis.latent, &q);
        let z: Vec<f64> = z.row(0).iter().copied().collect();
        out.set_column(v, &basis.reconstruct(&z));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, n_p: usize, seed: u64) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = DMatrix::from_fn(n, 3, |_, _| rng.random_range(0.0..1.0));
        let snaps = (0..n)
            .map(|_| DMatrix::from_fn(n_p, 4, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        (params, snaps)
    }

    #[test]
    fn energy_rank_by_hand() {
        assert_eq!(energy_rank(&[10.0, 5.0, 1.0, 0.5], 0.99).unwrap(), 4);
        assert_eq!(energy_rank(&[10.0, 5.0, 1.0, 0.5], 0.9).unwrap(), 2);
        assert_eq!(energy_rank(&[10.0, 5.0, 1.0, 0.5], 1.0).unwrap(), 4);
        assert!(energy_rank(&[1.0], 0.0).is_err());
        assert!(energy_rank(&[1.0], 1.5).is_err());
    }

    #[test]
    fn full_rank_reproduces_training_snapshots() {
        for seed in 0..5 {
            let (params, snaps) = random_set(20, 60, seed);
            let spec = PodSpec { energy_threshold: 1.0, ..PodSpec::default() };
            let m = pod_fit(&spec, &params, &snaps).unwrap();
            assert!(m.variables.iter().all(|b| b.r == 19));
            for (i, s) in snaps.iter().enumerate() {
                let p = [params[(i, 0)], params[(i, 1)], params[(i, 2)]];
                let err = (pod_predict(&m, &p) - s).norm() / s.norm();
                assert!(err <= 1e-6, "seed {seed} snapshot {i}: {err}");
            }
        }
    }

    #[test]
    fn basis_is_orthonormal_and_sigma_descending() {
        let (params, snaps) = random_set(15, 40, 9);
        let m = pod_fit(&PodSpec::default(), &params, &snaps).unwrap();
        for b in &m.variables {
            let gram = b.u_r.transpose() * &b.u_r;
            assert!((gram - DMatrix::identity(b.r, b.r)).amax() <= 1e-8);
            assert!(b.sigma_r.iter().all(|s| *s > 0.0));
            assert!(b.sigma_r.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn zero_latent_gives_mean_field() {
        let (params, snaps) = random_set(10, 30, 3);
        let m = pod_fit(&PodSpec::default(), &params, &snaps).unwrap();
        let b = &m.variables[2];
        assert_eq!(b.reconstruct(&vec![0.0; b.r]), b.mean_field);
        let p = [0.5, 0.5, 0.5];
        assert_eq!(pod_predict(&m, &p).shape(), (30, 4));
    }

    #[test]
    fn low_rank_fields_are_captured() {
        // Fields spanned by two modes with smooth coefficients.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 40;
        let params = DMatrix::from_fn(n, 3, |_, _| rng.random_range(0.0..1.0));
        let field = |p: [f64; 3], k: usize| -> f64 {
            let x = k as f64 / 50.0;
            1.0 + (p[0] + 0.5 * p[1]) * (3.0 * x).sin() + p[2] * p[2] * x
        };
        let snaps: Vec<_> = (0..n)
            .map(|i| {
                let p = [params[(i, 0)], params[(i, 1)], params[(i, 2)]];
                DMatrix::from_fn(50, 4, |k, _| field(p, k))
            })
            .collect();
        let spec = PodSpec {
            rbf: RbfSpec { kernel: Kernel::Multiquadric, ..RbfSpec::default() },
            ..PodSpec::default()
        };
        let m = pod_fit(&spec, &params, &snaps).unwrap();
        assert!(m.variables.iter().all(|b| b.r <= 2));
        let q = [0.4, 0.6, 0.3];
        let pred = pod_predict(&m, &q);
        let truth = DMatrix::from_fn(50, 4, |k, _| field(q, k));
        assert!((pred - &truth).amax() <= 2e-2 * truth.amax());
    }
}
