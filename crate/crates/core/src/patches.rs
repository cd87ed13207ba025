//! Dense patch extraction with zero padding.
//!
//! A `k1 x k2` window is centered on every pixel. For even sizes the center
//! sits at offset `k / 2`, so the window spans `(k - 1) / 2` pixels before
//! and `k / 2` after. Windows are vectorized row-major; anything falling
//! outside the image reads as zero.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng::Rng;

/// Vectorized patches, one per column, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    patch_dim: usize,
    count: usize,
    data: Vec<f64>,
}

impl PatchMatrix {
    pub fn new(patch_dim: usize, data: Vec<f64>) -> Result<Self> {
        if patch_dim == 0 {
            return Err(Error::InvalidImage("patch dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(patch_dim) {
            return Err(Error::DimensionMismatch {
                expected: patch_dim,
                found: data.len() % patch_dim,
                context: "patch data length modulo patch_dim",
            });
        }
        let count = data.len() / patch_dim;
        Ok(PatchMatrix {
            patch_dim,
            count,
            data,
        })
    }

    pub fn from_columns(patch_dim: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(patch_dim * columns.len());
        for col in columns {
            if col.len() != patch_dim {
                return Err(Error::DimensionMismatch {
                    expected: patch_dim,
                    found: col.len(),
                    context: "patch column length",
                });
            }
            data.extend_from_slice(col);
        }
        PatchMatrix::new(patch_dim, data)
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.patch_dim..(j + 1) * self.patch_dim]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.patch_dim)
    }

    /// Mean of all columns.
    pub fn mean_column(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.patch_dim];
        for col in self.columns() {
            for (m, v) in mean.iter_mut().zip(col) {
                *m += v;
            }
        }
        let n = self.count.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    pub(crate) fn select(&self, indices: &[usize]) -> PatchMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.patch_dim);
        for &j in indices {
            data.extend_from_slice(self.column(j));
        }
        PatchMatrix {
            patch_dim: self.patch_dim,
            count: indices.len(),
            data,
        }
    }
}

/// Rows (or columns) of padding before the window center.
#[inline]
pub(crate) fn pad_before(k: usize) -> usize {
    (k - 1) / 2
}

/// Writes the window centered on `(row, col)` of a row-major grid into
/// `out` (length `k1 * k2`), optionally subtracting the window mean.
#[allow(clippy::too_many_arguments)]
pub(crate) fn write_patch(
    pixels: &[f64],
    rows: usize,
    cols: usize,
    row: usize,
    col: usize,
    k1: usize,
    k2: usize,
    remove_mean: bool,
    out: &mut [f64],
) {
    let r0 = row as isize - pad_before(k1) as isize;
    let c0 = col as isize - pad_before(k2) as isize;
    let mut i = 0;
    for dr in 0..k1 as isize {
        let r = r0 + dr;
        if r < 0 || r >= rows as isize {
            out[i..i + k2].fill(0.0);
            i += k2;
            continue;
        }
        let base = r as usize * cols;
        for dc in 0..k2 as isize {
            let c = c0 + dc;
            out[i] = if c < 0 || c >= cols as isize {
                0.0
            } else {
                pixels[base + c as usize]
            };
            i += 1;
        }
    }
    if remove_mean {
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        out.iter_mut().for_each(|v| *v -= mean);
    }
}

/// All `rows * cols` pixel-centered patches of `image`, in row-major pixel
/// order.
pub fn extract_dense(image: &GrayImage, k1: usize, k2: usize, remove_mean: bool) -> PatchMatrix {
    assert!(k1 >= 1 && k2 >= 1, "patch size must be positive");
    let (rows, cols) = image.shape();
    let dim = k1 * k2;
    let mut data = vec![0.0; rows * cols * dim];
    for (j, out) in data.chunks_exact_mut(dim).enumerate() {
        write_patch(image.pixels(), rows, cols, j / cols, j % cols, k1, k2, remove_mean, out);
    }
    PatchMatrix {
        patch_dim: dim,
        count: rows * cols,
        data,
    }
}

/// `min(budget, count)` columns drawn uniformly without replacement, kept in
/// their original relative order.
pub fn subsample(patches: &PatchMatrix, budget: usize, rng: &mut Rng) -> Result<PatchMatrix> {
    if patches.count() == 0 {
        return Err(Error::NoPatches);
    }
    if budget == 0 {
        return Err(Error::Config("patch budget must be at least 1".into()));
    }
    if budget >= patches.count() {
        return Ok(patches.clone());
    }
    let picked = rng.sample_indices(patches.count(), budget);
    Ok(patches.select(&picked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::rng::Rng;

    fn ramp(rows: usize, cols: usize) -> GrayImage {
        GrayImage::from_fn(rows, cols, |r, c| (r * cols + c + 1) as f64 / 100.0)
    }

    #[test]
    fn center_patch_is_the_image() {
        let img = ramp(3, 3);
        let p = extract_dense(&img, 3, 3, false);
        assert_eq!(p.count(), 9);
        assert_eq!(p.column(4), img.pixels());
    }

    #[test]
    fn single_pixel_is_zero_padded() {
        let img = GrayImage::new(1, 1, vec![0.7]).unwrap();
        let p = extract_dense(&img, 3, 3, false);
        assert_eq!(p.column(0), &[0.0, 0.0, 0.0, 0.0, 0.7, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn even_window_is_asymmetric() {
        // 4x4 window at (0,0): one row/col of padding before, two after
        let img = ramp(5, 5);
        let p = extract_dense(&img, 4, 4, false);
        let c = p.column(0);
        assert_eq!(&c[0..4], &[0.0; 4]);
        assert_eq!(&c[4..8], &[0.0, img.get(0, 0), img.get(0, 1), img.get(0, 2)]);
        let c = p.column(2 * 5 + 2);
        assert_eq!(c[0], img.get(1, 1));
        assert_eq!(c[15], img.get(4, 4));
    }

    #[test]
    fn subsample_budget() {
        let img = ramp(10, 10);
        let p = extract_dense(&img, 3, 3, false);
        let mut rng = Rng::from_seed(1);
        let all = subsample(&p, 100, &mut rng).unwrap();
        assert_eq!(all, p);
        let a = subsample(&p, 10, &mut Rng::from_seed(4)).unwrap();
        let b = subsample(&p, 10, &mut Rng::from_seed(4)).unwrap();
        assert_eq!(a.count(), 10);
        assert_eq!(a, b);
        let empty = PatchMatrix::new(9, vec![]).unwrap();
        assert!(matches!(subsample(&empty, 5, &mut rng), Err(Error::NoPatches)));
    }

    proptest! {
        #[test]
        fn dense_extraction_invariants(
            rows in 1usize..9, cols in 1usize..9, k1 in 1usize..6, k2 in 1usize..6, seed in any::<u64>()
        ) {
            let mut rng = Rng::from_seed(seed);
            let img = GrayImage::from_fn(rows, cols, |_, _| rng.uniform());
            let p = extract_dense(&img, k1, k2, false);
            prop_assert_eq!(p.count(), rows * cols);
            let (b1, b2) = (pad_before(k1) as isize, pad_before(k2) as isize);
            for j in 0..rows * cols {
                let (r, c) = ((j / cols) as isize, (j % cols) as isize);
                for dr in 0..k1 as isize {
                    for dc in 0..k2 as isize {
                        let (sr, sc) = (r - b1 + dr, c - b2 + dc);
                        let v = p.column(j)[(dr * k2 as isize + dc) as usize];
                        if sr < 0 || sc < 0 || sr >= rows as isize || sc >= cols as isize {
                            prop_assert_eq!(v, 0.0);
                        } else {
                            prop_assert_eq!(v, img.get(sr as usize, sc as usize));
                        }
                    }
                }
            }
            let centered = extract_dense(&img, k1, k2, true);
            for col in centered.columns() {
                prop_assert!(col.iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }
}
