//! Dense symmetric eigendecomposition with a reproducible ordering and sign
//! convention. The factorization itself is delegated to `faer`, which is
//! built without its thread pool so every call runs sequentially.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Eigenvalues at or below this fraction of the largest magnitude count as
/// zero.
pub const POSITIVE_EIGENVALUE_FLOOR: f64 = 1e-10;

/// Top eigenpairs, in descending eigenvalue order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// One eigenvector per row (`L x M`).
    pub vectors: Matrix,
}

fn check_symmetric(s: &Matrix) -> Result<()> {
    let (rows, cols) = s.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let scale = s.max_abs().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in 0..rows {
        for j in i + 1..cols {
            worst = worst.max((s.get(i, j) - s.get(j, i)).abs());
        }
    }
    if worst > 1e-10 * scale {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

/// Full decomposition: eigenvalues in the solver's ascending order and
/// eigenvectors as columns of the returned row-major matrix.
fn decompose(s: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_symmetric(s)?;
    let n = s.rows();
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    let a = Mat::<f64>::from_fn(n, n, |i, j| s.get(i, j));
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenSolver)?;
    let diag = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<f64> = (0..n).map(|i| diag[i]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok((values, vectors))
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    decompose(s).map(|(values, _)| values)
}

/// The `l` largest eigenpairs of `s`, all strictly positive.
///
/// Eigenvalues are sorted descending; exact ties keep the solver's index
/// order. Each vector is flipped so its largest-magnitude entry (the first
/// one, on ties) is positive. Fails with
/// [`Error::InsufficientSpectrum`] when fewer than `l` eigenvalues exceed
/// [`POSITIVE_EIGENVALUE_FLOOR`] times the largest magnitude.
pub fn eigensolve_descending(s: &Matrix, l: usize) -> Result<EigenPairs> {
    let (values, vectors) = decompose(s)?;
    let n = values.len();
    if l > n {
        return Err(Error::InsufficientSpectrum {
            requested: l,
            available: n,
        });
    }
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = POSITIVE_EIGENVALUE_FLOOR * max_abs;
    let mut order: Vec<usize> = (0..n).filter(|&i| max_abs > 0.0 && values[i] > floor).collect();
    if order.len() < l {
        return Err(Error::InsufficientSpectrum {
            requested: l,
            available: order.len(),
        });
    }
    // stable: equal eigenvalues stay in index order
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order.truncate(l);

    let mut out = Matrix::zeros(l, n);
    for (row, &idx) in order.iter().enumerate() {
        let dst = out.row_mut(row);
        for (i, d) in dst.iter_mut().enumerate() {
            *d = vectors.get(i, idx);
        }
        fix_sign(dst);
    }
    Ok(EigenPairs {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: out,
    })
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
