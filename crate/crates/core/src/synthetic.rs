//! Seeded two-class oriented-stripe images for smoke tests and demos.
//!
//! Class 0 images carry horizontal stripes (intensity varies down the rows),
//! class 1 vertical stripes. Each image draws its own amplitude and a small
//! phase offset, then gets uniform pixel noise; values are clipped to
//! `[0, 1]`. Because the phase jitter is small the two class means differ,
//! so the classes are separable by a linear function of the raw pixels.

use std::f64::consts::TAU;

use crate::image::{GrayImage, LabeledSample};
use crate::rng::Rng;

pub const STRIPE_PERIOD: f64 = 4.0;
const PHASE_JITTER: f64 = 0.5;
const NOISE: f64 = 0.1;

/// One stripe image; `vertical` selects class 1.
pub fn stripe_image(rows: usize, cols: usize, vertical: bool, rng: &mut Rng) -> GrayImage {
    let amplitude = rng.uniform_range(0.3, 0.5);
    let phase = rng.uniform_range(-PHASE_JITTER, PHASE_JITTER);
    GrayImage::from_fn(rows, cols, |r, c| {
        let t = if vertical { c } else { r } as f64;
        let v = 0.5 + amplitude * (TAU * t / STRIPE_PERIOD + phase).sin() + rng.uniform_range(-NOISE, NOISE);
        v.clamp(0.0, 1.0)
    })
}

/// `per_class` images of each class, alternating labels 0, 1, 0, 1, ...
pub fn stripes(per_class: usize, rows: usize, cols: usize, rng: &mut Rng) -> Vec<LabeledSample> {
    (0..2 * per_class)
        .map(|i| {
            let label = i % 2;
            LabeledSample::new(stripe_image(rows, cols, label == 1, rng), label)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_labels_and_orientation() {
        let data = stripes(5, 16, 12, &mut Rng::from_seed(0));
        assert_eq!(data.len(), 10);
        assert_eq!(data.iter().filter(|s| s.label == 1).count(), 5);
        for s in &data {
            assert_eq!(s.image.shape(), (16, 12));
            assert!(s.image.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
            // variance along the stripe direction is noise only
            let img = &s.image;
            let along_row: f64 = (0..16).map(|r| (img.get(r, 0) - img.get(r, 1)).abs()).sum::<f64>() / 16.0;
            let along_col: f64 = (0..12).map(|c| (img.get(0, c) - img.get(1, c)).abs()).sum::<f64>() / 12.0;
            if s.label == 0 {
                assert!(along_row < along_col);
            } else {
                assert!(along_col < along_row);
            }
        }
        assert_eq!(stripes(3, 8, 8, &mut Rng::from_seed(4)), stripes(3, 8, 8, &mut Rng::from_seed(4)));
    }
}
