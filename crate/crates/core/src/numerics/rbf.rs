//! Radial basis function interpolation with a linear polynomial tail.
//!
//! For centers `x_i` and targets `z_i` the interpolant is
//! `s(x) = sum_i w_i phi(|x - x_i|) + c_0 + c^T x`, found from the saddle
//! system
//!
//! ```text
//! [ Phi + reg I   P ] [w]   [Z]
//! [ P^T           0 ] [c] = [0]
//! ```
//!
//! where `P = [1, X]`. All output columns share one factorization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(-(eps r)^2)`
    Gaussian,
    /// `sqrt(1 + (eps r)^2)`
    Multiquadric,
}

impl Kernel {
    pub fn eval(self, r: f64, shape: f64) -> f64 {
        let er = shape * r;
        match self {
            Kernel::Gaussian => (-er * er).exp(),
            Kernel::Multiquadric => (1.0 + er * er).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfModel {
    /// `m x d`
    pub centers: DMatrix<f64>,
    /// `m x q`
    pub weights: DMatrix<f64>,
    /// `(d + 1) x q`, constant term first.
    pub poly_coeffs: DMatrix<f64>,
    pub kernel: Kernel,
    pub shape: f64,
    pub reg: f64,
}

fn row_distance(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols())
        .map(|c| {
            let d = a[(i, c)] - b[(j, c)];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Dimensions along which every center has the same coordinate. Their tail
/// coefficient is pinned to zero, otherwise the saddle system is singular.
fn constant_dims(x: &DMatrix<f64>) -> Vec<bool> {
    x.column_iter()
        .map(|c| c.iter().all(|v| *v == c[0]))
        .collect()
}

fn system_matrix(x: &DMatrix<f64>, kernel: Kernel, shape: f64, reg: f64) -> DMatrix<f64> {
    let (m, d) = x.shape();
    let size = m + d + 1;
    let mut a = DMatrix::zeros(size, size);
    let pinned = constant_dims(x);
    for c in 0..d {
        if pinned[c] {
            a[(m + 1 + c, m + 1 + c)] = 1.0;
        }
    }
    for i in 0..m {
        for j in i..m {
            let v = kernel.eval(row_distance(x, i, x, j), shape);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a[(i, i)] += reg;
        a[(i, m)] = 1.0;
        a[(m, i)] = 1.0;
        for c in (0..d).filter(|&c| !pinned[c]) {
            a[(i, m + 1 + c)] = x[(i, c)];
            a[(m + 1 + c, i)] = x[(i, c)];
        }
    }
    a
}

fn rhs(z: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let (m, q) = z.shape();
    let mut b = DMatrix::zeros(m + d + 1, q);
    b.view_mut((0, 0), (m, q)).copy_from(z);
    b
}

fn check_inputs(x: &DMatrix<f64>, z: &DMatrix<f64>, shape: f64, reg: f64) -> Result<()> {
    let (m, d) = x.shape();
    if z.nrows() != m {
        return Err(Error::Domain(format!(
            "RBF inputs have {m} rows but targets have {}",
            z.nrows()
        )));
    }
    if m < d + 2 {
        return Err(Error::Domain(format!(
            "RBF with a linear tail in {d} dimensions needs at least {} centers, got {m}",
            d + 2
        )));
    }
    if !(shape.is_finite() && shape > 0.0) || !(reg.is_finite() && reg >= 0.0) {
        return Err(Error::Domain(format!(
            "RBF needs shape > 0 and reg >= 0 (shape={shape}, reg={reg})"
        )));
    }
    if x.iter().chain(z.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("RBF data contains non-finite values".into()));
    }
    Ok(())
}

fn singular(detail: &str) -> Error {
    Error::Numerical(format!(
        "RBF interpolation system is singular ({detail}); use distinct centers or set reg > 0"
    ))
}

pub fn rbf_fit(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    kernel: Kernel,
    shape: f64,
    reg: f64,
) -> Result<RbfModel> {
    check_inputs(x, z, shape, reg)?;
    let (m, d) = x.shape();
    if reg == 0.0 {
        for i in 0..m {
            if let Some(j) = ((i + 1)..m).find(|&j| row_distance(x, i, x, j) == 0.0) {
                return Err(singular(&format!("centers {i} and {j} coincide")));
            }
        }
    }
    let a = system_matrix(x, kernel, shape, reg);
    let sol = a
        .lu()
        .solve(&rhs(z, d))
        .ok_or_else(|| singular("zero pivot"))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(singular("non-finite solution"));
    }
    Ok(RbfModel {
        centers: x.clone(),
        weights: sol.rows(0, m).into_owned(),
        poly_coeffs: sol.rows(m, d + 1).into_owned(),
        kernel,
        shape,
        reg,
    })
}

pub fn rbf_predict(model: &RbfModel, xs: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, d) = model.centers.shape();
    assert_eq!(xs.ncols(), d, "RBF query dimension mismatch");
    let s = xs.nrows();
    let mut phi = DMatrix::zeros(s, m + d + 1);
    for i in 0..s {
        for j in 0..m {
            phi[(i, j)] = model
                .kernel
                .eval(row_distance(xs, i, &model.centers, j), model.shape);
        }
        phi[(i, m)] = 1.0;
        for c in 0..d {
            phi[(i, m + 1 + c)] = xs[(i, c)];
        }
    }
    let mut coeffs = DMatrix::zeros(m + d + 1, model.weights.ncols());
    coeffs.rows_mut(0, m).copy_from(&model.weights);
    coeffs.rows_mut(m, d + 1).copy_from(&model.poly_coeffs);
    phi * coeffs
}

/// Outcome of a leave-one-out shape scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSelection {
    pub shape: f64,
    /// `(shape, mean squared LOO error)` for every candidate that produced a
    /// well-conditioned system.
    pub scores: Vec<(f64, f64)>,
}

/// Largest 1-norm condition estimate accepted during shape selection.
const MAX_CONDITION: f64 = 1e13;

/// Picks the shape parameter with the smallest leave-one-out error, using
/// Rippa's closed form `e_i = c_i / (A^-1)_ii` over all output columns.
///
/// Candidates whose system is too ill-conditioned to trust are skipped.
pub fn select_shape_loocv(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    kernel: Kernel,
    candidates: &[f64],
    reg: f64,
) -> Result<ShapeSelection> {
    if candidates.is_empty() {
        return Err(Error::Domain("no shape candidates".into()));
    }
    let (m, d) = x.shape();
    let mut scores = Vec::new();
    for &shape in candidates {
        check_inputs(x, z, shape, reg)?;
        let a = system_matrix(x, kernel, shape, reg);
        let Some(inv) = a.clone().try_inverse() else {
            continue;
        };
        let cond = col_sum_max(&a) * col_sum_max(&inv);
        if !cond.is_finite() || cond > MAX_CONDITION {
            continue;
        }
        let coeffs = &inv * rhs(z, d);
        let mut total = 0.0;
        for c in 0..z.ncols() {
            for i in 0..m {
                let e = coeffs[(i, c)] / inv[(i, i)];
                total += e * e;
            }
        }
        let score = total / (m * z.ncols()) as f64;
        if score.is_finite() {
            scores.push((shape, score));
        }
    }
    let best = scores
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| {
            Error::Numerical("every RBF shape candidate gave an ill-conditioned system".into())
        })?;
    Ok(ShapeSelection {
        shape: best.0,
        scores,
    })
}

fn col_sum_max(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(seed: u64, m: usize, d: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, d, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn reproduces_constants() {
        let x = random_points(1, 15, 3);
        let z = DMatrix::from_element(15, 2, 4.25);
        for kernel in [Kernel::Gaussian, Kernel::Multiquadric] {
            let model = rbf_fit(&x, &z, kernel, 1.0, 0.0).unwrap();
            let pred = rbf_predict(&model, &random_points(2, 30, 3));
            assert!(pred.iter().all(|v| (v - 4.25).abs() < 1e-10));
        }
    }

    #[test]
    fn reproduces_affine_functions() {
        let x = random_points(3, 20, 3);
        let f = |r: &[f64]| 1.0 + 2.0 * r[0] - 0.5 * r[1] + 3.0 * r[2];
        let z = DMatrix::from_fn(20, 1, |i, _| f(&[x[(i, 0)], x[(i, 1)], x[(i, 2)]]));
        let model = rbf_fit(&x, &z, Kernel::Multiquadric, 1.0, 0.0).unwrap();
        let q = random_points(4, 10, 3);
        let pred = rbf_predict(&model, &q);
        for i in 0..10 {
            assert!((pred[(i, 0)] - f(&[q[(i, 0)], q[(i, 1)], q[(i, 2)]])).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolates_training_data() {
        let x = random_points(5, 25, 3);
        let z = DMatrix::from_fn(25, 3, |i, c| (x[(i, 0)] * (c + 1) as f64).sin() + x[(i, 2)].powi(2));
        let model = rbf_fit(&x, &z, Kernel::Gaussian, 1.5, 0.0).unwrap();
        let pred = rbf_predict(&model, &x);
        let scale = z.amax();
        assert!((pred - &z).amax() <= 1e-8 * scale);
    }

    #[test]
    fn sine_with_validated_shape() {
        let xs: Vec<f64> = (0..20).map(|i| std::f64::consts::PI * i as f64 / 19.0).collect();
        let x = DMatrix::from_column_slice(20, 1, &xs);
        let z = x.map(f64::sin);
        let candidates = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0];
        let sel = select_shape_loocv(&x, &z, Kernel::Gaussian, &candidates, 0.0).unwrap();
        let model = rbf_fit(&x, &z, Kernel::Gaussian, sel.shape, 0.0).unwrap();
        // Dense-grid oracle over the interior.
        let grid: Vec<f64> = (1..1000).map(|i| std::f64::consts::PI * i as f64 / 1000.0).collect();
        let q = DMatrix::from_column_slice(grid.len(), 1, &grid);
        let pred = rbf_predict(&model, &q);
        let err = grid
            .iter()
            .enumerate()
            .map(|(i, g)| (pred[(i, 0)] - g.sin()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "shape {} max error {err}", sel.shape);
    }

    #[test]
    fn center_error_shrinks_with_regularization() {
        let x = random_points(8, 30, 2);
        let z = DMatrix::from_fn(30, 1, |i, _| (3.0 * x[(i, 0)]).cos() * x[(i, 1)]);
        let mut prev = f64::INFINITY;
        for reg in [1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 0.0] {
            let model = rbf_fit(&x, &z, Kernel::Gaussian, 1.0, reg).unwrap();
            let err = (rbf_predict(&model, &x) - &z).amax();
            assert!(err <= prev + 1e-12, "reg {reg}: {err} > {prev}");
            prev = err;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn rejects_duplicates_and_too_few_centers() {
        let mut x = random_points(9, 6, 2);
        let z = DMatrix::from_element(6, 1, 1.0);
        x.set_row(3, &x.row(1).clone_owned());
        let err = rbf_fit(&x, &z, Kernel::Gaussian, 1.0, 0.0).unwrap_err();
        assert!(err.to_string().contains("reg > 0"), "{err}");
        assert!(rbf_fit(&x, &z, Kernel::Gaussian, 1.0, 1e-3).is_ok());
        let few = random_points(9, 3, 2);
        assert!(rbf_fit(&few, &DMatrix::zeros(3, 1), Kernel::Gaussian, 1.0, 0.0).is_err());
    }

    #[test]
    fn constant_dimension_is_tolerated() {
        let mut x = random_points(7, 12, 3);
        x.column_mut(2).fill(0.0);
        let z = DMatrix::from_fn(12, 1, |i, _| x[(i, 0)] * x[(i, 1)]);
        let m = rbf_fit(&x, &z, Kernel::Gaussian, 1.0, 0.0).unwrap();
        assert_eq!(m.poly_coeffs[(3, 0)], 0.0);
        assert!((rbf_predict(&m, &x) - &z).amax() <= 1e-9);
    }
}
