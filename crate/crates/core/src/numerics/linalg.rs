use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin singular value decomposition with singular values in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `n x k` left singular vectors.
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    /// `k x m` right singular vectors, transposed.
    pub vt: DMatrix<f64>,
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// `A = U diag(sigma) Vt` with `k = min(n, m)`.
///
/// Householder QR followed by one-sided Jacobi rotations on the triangular
/// factor. nalgebra's bidiagonal SVD returns inaccurate factors for some
/// rank-deficient inputs (centered snapshot matrices are always rank
/// deficient), so it is not used here.
pub fn svd(a: &DMatrix<f64>) -> Result<Svd> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("SVD input contains non-finite entries".into()));
    }
    if a.is_empty() {
        return Err(Error::Domain("SVD of an empty matrix".into()));
    }
    if a.nrows() < a.ncols() {
        let t = svd(&a.transpose())?;
        return Ok(Svd {
            u: t.vt.transpose(),
            sigma: t.sigma,
            vt: t.u.transpose(),
        });
    }
    let qr = a.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let (w, v) = jacobi_rotate(r)?;
    let k = w.ncols();
    let norms: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    let order = descending_order(&norms);
    let sigma = DVector::from_iterator(k, order.iter().map(|&i| norms[i]));
    let mut u_r = DMatrix::from_fn(k, k, |row, c| {
        let n = norms[order[c]];
        if n > 0.0 {
            w[(row, order[c])] / n
        } else {
            0.0
        }
    });
    orthonormalize(&mut u_r);
    let vt = DMatrix::from_fn(k, k, |row, c| v[(c, order[row])]);
    Ok(Svd { u: q * u_r, sigma, vt })
}

const MAX_SWEEPS: usize = 80;

/// Rotates the columns of `w` until they are mutually orthogonal; returns the
/// rotated matrix and the accumulated rotation `V` with `A V = W`.
fn jacobi_rotate(mut w: DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = w.ncols();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut w, &mut v] {
                    for row in 0..m.nrows() {
                        let (x, y) = (m[(row, p)], m[(row, q)]);
                        m[(row, p)] = c * x - s * y;
                        m[(row, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            return Ok((w, v));
        }
    }
    Err(Error::Numerical(format!("Jacobi SVD did not converge in {MAX_SWEEPS} sweeps")))
}

/// Modified Gram-Schmidt over the columns in order. Columns that vanish
/// (zero singular values) are replaced by completing unit vectors.
fn orthonormalize(u: &mut DMatrix<f64>) {
    let (n, k) = u.shape();
    let mut unit = 0;
    for c in 0..k {
        loop {
            // Two passes keep the result orthogonal to working precision.
            for _ in 0..2 {
                for prev in 0..c {
                    let pc = u.column(prev).into_owned();
                    let d = pc.dot(&u.column(c));
                    u.column_mut(c).axpy(-d, &pc, 1.0);
                }
            }
            let norm = u.column(c).norm();
            if norm > 0.5 {
                u.column_mut(c).unscale_mut(norm);
                break;
            }
            let mut e = DVector::zeros(n);
            e[unit % n] = 1.0;
            unit += 1;
            u.set_column(c, &e);
        }
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

pub fn sym_eig(b: &DMatrix<f64>) -> Result<SymEig> {
    if !b.is_square() {
        return Err(Error::Domain(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("eigendecomposition input is not finite".into()));
    }
    let asym = (b - b.transpose()).norm();
    if asym > 1e-9 * b.norm() {
        return Err(Error::Domain(format!(
            "matrix is not symmetric (|B - B^T|_F = {asym:e})"
        )));
    }
    let dec = b.clone().symmetric_eigen();
    let order = descending_order(dec.eigenvalues.as_slice());
    let n = order.len();
    let values = DVector::from_iterator(n, order.iter().map(|&i| dec.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| dec.eigenvectors[(r, order[c])]);
    Ok(SymEig { values, vectors })
}

/// Euclidean distances between the rows of `points`.
pub fn pairwise_distances(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    let rows: Vec<Vec<f64>> = points.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    d
}
