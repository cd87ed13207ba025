//! Kernel-PCA filter learning and out-of-sample projection.
//!
//! A stage learns from `M` patches: the Gram matrix `K` is double-centered
//! to `K' = K - 1K - K1 + 1K1` (`1` is the `M x M` matrix of `1/M`), the
//! top `L` eigenpairs of `K'` are extracted, and each eigenvector `v_l` is
//! rescaled to `alpha_l = v_l / sqrt(lambda_l)` so that the corresponding
//! feature-space direction has unit norm.
//!
//! Filtering a patch `x` means projecting it onto those directions:
//!
//! ```text
//! y_l(x) = sum_p alpha_lp * (k(x, x_p) - mean_r k(x, x_r) - colmean_p + totalmean)
//! ```
//!
//! where `colmean` and `totalmean` are statistics of the uncentered Gram.
//! For a linear kernel this collapses to `w_l . x + b_l` with the explicit
//! filter `w_l = sum_p alpha_lp (x_p - xbar)`, i.e. an ordinary spatial
//! filter; for every other kernel no such input-space filter exists and the
//! projection is evaluated against all `M` retained patches.

use crate::eigen::eigensolve_descending;
use crate::error::{Error, Result};
use crate::kernels::{dot, gram, KernelKind, KernelSpec};
use crate::matrix::Matrix;
use crate::patches::PatchMatrix;

/// Learned filters of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct KpcaBasis {
    kernel: KernelSpec,
    basis_patches: PatchMatrix,
    alphas: Matrix,
    eigenvalues: Vec<f64>,
    basis_col_means: Vec<f64>,
    basis_total_mean: f64,
}

/// Double-centers a square kernel matrix.
pub fn center_gram(k: &Matrix) -> Result<Matrix> {
    let (rows, cols) = k.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let n = rows as f64;
    let row_means: Vec<f64> = (0..rows).map(|i| k.row(i).iter().sum::<f64>() / n).collect();
    let col_means = column_means(k);
    let total = row_means.iter().sum::<f64>() / n;
    Ok(Matrix::from_fn(rows, cols, |i, j| {
        k.get(i, j) - col_means[j] - row_means[i] + total
    }))
}

fn column_means(k: &Matrix) -> Vec<f64> {
    let mut means = vec![0.0; k.cols()];
    for i in 0..k.rows() {
        for (m, v) in means.iter_mut().zip(k.row(i)) {
            *m += v;
        }
    }
    let n = k.rows() as f64;
    means.iter_mut().for_each(|m| *m /= n);
    means
}

/// Learns `l` kernel-PCA components from the columns of `patches`.
pub fn learn_filters(patches: PatchMatrix, kernel: KernelSpec, l: usize) -> Result<KpcaBasis> {
    if patches.count() == 0 {
        return Err(Error::NoPatches);
    }
    if l == 0 || l > patches.count() {
        return Err(Error::InsufficientSpectrum {
            requested: l,
            available: patches.count(),
        });
    }
    if patches.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidImage("non-finite patch value".into()));
    }
    kernel.validate()?;

    let k = gram(&kernel, &patches);
    let basis_col_means = column_means(&k);
    let basis_total_mean = basis_col_means.iter().sum::<f64>() / basis_col_means.len() as f64;
    let centered = center_gram(&k)?;
    drop(k);
    let eig = eigensolve_descending(&centered, l)?;

    let m = patches.count();
    let mut alphas = eig.vectors;
    for (row, &lambda) in eig.values.iter().enumerate() {
        let scale = 1.0 / lambda.sqrt();
        alphas.row_mut(row).iter_mut().for_each(|a| *a *= scale);
    }
    debug_assert_eq!(alphas.shape(), (l, m));
    Ok(KpcaBasis {
        kernel,
        basis_patches: patches,
        alphas,
        eigenvalues: eig.values,
        basis_col_means,
        basis_total_mean,
    })
}

impl KpcaBasis {
    /// Reassembles a basis from stored parts, checking shapes.
    pub fn from_parts(
        kernel: KernelSpec,
        basis_patches: PatchMatrix,
        alphas: Matrix,
        eigenvalues: Vec<f64>,
        basis_col_means: Vec<f64>,
        basis_total_mean: f64,
    ) -> Result<Self> {
        let m = basis_patches.count();
        let l = eigenvalues.len();
        if alphas.shape() != (l, m) {
            return Err(Error::Format(format!(
                "alpha matrix is {}x{}, expected {l}x{m}",
                alphas.rows(),
                alphas.cols()
            )));
        }
        if basis_col_means.len() != m {
            return Err(Error::Format("centering statistics length mismatch".into()));
        }
        if l == 0 || l > m || eigenvalues.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(Error::Format("stored eigenvalues must be positive".into()));
        }
        kernel.validate()?;
        Ok(KpcaBasis {
            kernel,
            basis_patches,
            alphas,
            eigenvalues,
            basis_col_means,
            basis_total_mean,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn basis_patches(&self) -> &PatchMatrix {
        &self.basis_patches
    }

    /// `L x M` coefficients; row `l` is `alpha_l`.
    pub fn alphas(&self) -> &Matrix {
        &self.alphas
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis_col_means(&self) -> &[f64] {
        &self.basis_col_means
    }

    pub fn basis_total_mean(&self) -> f64 {
        self.basis_total_mean
    }

    pub fn num_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn patch_dim(&self) -> usize {
        self.basis_patches.patch_dim()
    }

    /// Projects every query column; entry `(l, q)` is component `l` of
    /// query `q`. Always evaluates the kernel against the retained basis.
    pub fn project(&self, queries: &PatchMatrix) -> Result<Matrix> {
        if queries.patch_dim() != self.patch_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.patch_dim(),
                found: queries.patch_dim(),
                context: "query patch dimension",
            });
        }
        let proj = KernelProjector::new(self);
        let l = self.num_components();
        let mut out = Matrix::zeros(l, queries.count());
        let mut scratch = vec![0.0; self.basis_patches.count()];
        let mut resp = vec![0.0; l];
        for (q, x) in queries.columns().enumerate() {
            proj.respond(x, &mut scratch, &mut resp);
            for (c, v) in resp.iter().enumerate() {
                out.set(c, q, *v);
            }
        }
        Ok(out)
    }

    /// Explicit input-space filters `w_l = sum_p alpha_lp (x_p - xbar)`,
    /// one per column. Only defined for the linear kernel.
    pub fn reconstruct_linear_filters(&self) -> Result<PatchMatrix> {
        if self.kernel.kind() != KernelKind::Linear {
            return Err(Error::NoInputSpaceFilter(self.kernel.kind().name()));
        }
        let d = self.patch_dim();
        let mean = self.basis_patches.mean_column();
        let mut data = vec![0.0; self.num_components() * d];
        for (l, w) in data.chunks_exact_mut(d).enumerate() {
            for (p, x) in self.basis_patches.columns().enumerate() {
                let a = self.alphas.get(l, p);
                for ((wi, xi), mi) in w.iter_mut().zip(x).zip(&mean) {
                    *wi += a * (xi - mi);
                }
            }
        }
        PatchMatrix::new(d, data)
    }

    /// The per-patch filter used by the network: explicit filters for the
    /// linear kernel, kernel projection otherwise.
    pub fn filter_bank(&self) -> FilterBank<'_> {
        match self.reconstruct_linear_filters() {
            Ok(filters) => {
                let offsets = (0..self.num_components())
                    .map(|l| {
                        self.alphas
                            .row(l)
                            .iter()
                            .zip(&self.basis_col_means)
                            .map(|(a, cm)| a * (self.basis_total_mean - cm))
                            .sum()
                    })
                    .collect();
                FilterBank::Explicit { filters, offsets }
            }
            Err(_) => FilterBank::Kernel(KernelProjector::new(self)),
        }
    }
}

/// Precomputed sums for the centered out-of-sample projection.
#[derive(Debug, Clone)]
pub struct KernelProjector<'a> {
    basis: &'a KpcaBasis,
    alpha_sums: Vec<f64>,
    alpha_dot_col_means: Vec<f64>,
}

impl<'a> KernelProjector<'a> {
    fn new(basis: &'a KpcaBasis) -> Self {
        let l = basis.num_components();
        let alpha_sums = (0..l).map(|c| basis.alphas.row(c).iter().sum()).collect();
        let alpha_dot_col_means = (0..l)
            .map(|c| dot(basis.alphas.row(c), &basis.basis_col_means))
            .collect();
        KernelProjector {
            basis,
            alpha_sums,
            alpha_dot_col_means,
        }
    }

    /// `scratch` must hold `M` values and `out` `L` values.
    #[inline]
    pub fn respond(&self, x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        let b = self.basis;
        for (s, xp) in scratch.iter_mut().zip(b.basis_patches.columns()) {
            *s = b.kernel.eval_unchecked(x, xp);
        }
        let mean_k = scratch.iter().sum::<f64>() / scratch.len() as f64;
        for (c, o) in out.iter_mut().enumerate() {
            *o = dot(b.alphas.row(c), scratch) - self.alpha_dot_col_means[c]
                + (b.basis_total_mean - mean_k) * self.alpha_sums[c];
        }
    }
}

/// How a learned stage maps one patch to its `L` responses.
#[derive(Debug, Clone)]
pub enum FilterBank<'a> {
    /// Linear kernel: `y_l = w_l . x + offset_l`.
    Explicit { filters: PatchMatrix, offsets: Vec<f64> },
    Kernel(KernelProjector<'a>),
}

impl FilterBank<'_> {
    pub fn num_components(&self) -> usize {
        match self {
            FilterBank::Explicit { offsets, .. } => offsets.len(),
            FilterBank::Kernel(p) => p.basis.num_components(),
        }
    }

    pub(crate) fn scratch_len(&self) -> usize {
        match self {
            FilterBank::Explicit { .. } => 0,
            FilterBank::Kernel(p) => p.basis.basis_patches.count(),
        }
    }

    #[inline]
    pub(crate) fn respond(&self, x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        match self {
            FilterBank::Explicit { filters, offsets } => {
                for ((o, w), b) in out.iter_mut().zip(filters.columns()).zip(offsets) {
                    *o = dot(w, x) + b;
                }
            }
            FilterBank::Kernel(p) => p.respond(x, scratch, out),
        }
    }
}
