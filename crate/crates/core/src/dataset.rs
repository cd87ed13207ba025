//! Labeled datasets and seeded train/test splitting.
//!
//! Splits are uniform over the shuffled sample order and are not stratified
//! by class; use [`class_counts`] to inspect the resulting balance.

use crate::error::{Error, Result};
use crate::image::LabeledSample;
use crate::rng::Rng;

/// Samples sharing one image shape, with labels in `0..class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub class_count: usize,
    pub rows: usize,
    pub cols: usize,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        class_count: usize,
        rows: usize,
        cols: usize,
        samples: Vec<LabeledSample>,
    ) -> Result<Self> {
        let ds = Dataset {
            name: name.into(),
            class_count,
            rows,
            cols,
            samples,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.samples {
            if s.image.shape() != (self.rows, self.cols) {
                return Err(Error::ShapeMismatch {
                    expected_rows: self.rows,
                    expected_cols: self.cols,
                    rows: s.image.rows(),
                    cols: s.image.cols(),
                    file: None,
                });
            }
            if s.label >= self.class_count {
                return Err(Error::LabelOutOfRange {
                    label: s.label,
                    class_count: self.class_count,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same metadata, different samples.
    pub fn with_samples(&self, samples: Vec<LabeledSample>) -> Dataset {
        Dataset {
            name: self.name.clone(),
            class_count: self.class_count,
            rows: self.rows,
            cols: self.cols,
            samples,
        }
    }
}

/// Shuffles and splits so that `round(train_fraction * n)` samples land in
/// the training side.
pub fn split_dataset(
    samples: Vec<LabeledSample>,
    train_fraction: f64,
    rng: &mut Rng,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = samples.len();
    let train = (train_fraction * n as f64).round() as usize;
    split_by_count(samples, train, rng)
}

/// Shuffles and splits off exactly `train_count` training samples.
pub fn split_by_count(
    mut samples: Vec<LabeledSample>,
    train_count: usize,
    rng: &mut Rng,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train_count > samples.len() {
        return Err(Error::Config(format!(
            "requested {train_count} training samples from {}",
            samples.len()
        )));
    }
    rng.shuffle(&mut samples);
    let test = samples.split_off(train_count);
    Ok((samples, test))
}

/// Number of samples per class label.
pub fn class_counts(samples: &[LabeledSample], class_count: usize) -> Vec<usize> {
    let mut counts = vec![0; class_count];
    for s in samples {
        if s.label < class_count {
            counts[s.label] += 1;
        }
    }
    counts
}
