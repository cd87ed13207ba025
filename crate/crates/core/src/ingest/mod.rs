//! Dataset ingestion from IDX pairs and PGM class directories.

pub mod idx;
pub mod pgm;

use std::path::PathBuf;

pub use idx::{read_idx_images, read_idx_labels};
pub use pgm::{read_image_dir, read_pgm, write_pgm};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::image::LabeledSample;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    IdxPair { images: PathBuf, labels: PathBuf },
    /// One subdirectory of PGM files per class.
    ImageDir { root: PathBuf },
}

/// Where a dataset lives and what it must look like.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub source: DataSource,
    pub class_count: usize,
    pub rows: usize,
    pub cols: usize,
}

impl DatasetManifest {
    /// Reads every sample and checks shapes and labels against the manifest.
    pub fn load(&self) -> Result<Dataset> {
        let samples = match &self.source {
            DataSource::IdxPair { images, labels } => {
                let imgs = read_idx_images(images)?;
                let labs = read_idx_labels(labels)?;
                if imgs.len() != labs.len() {
                    return Err(Error::Format(format!(
                        "{} holds {} images but {} holds {} labels",
                        images.display(),
                        imgs.len(),
                        labels.display(),
                        labs.len()
                    )));
                }
                if let Some(img) = imgs.iter().find(|i| i.shape() != (self.rows, self.cols)) {
                    return Err(Error::ShapeMismatch {
                        expected_rows: self.rows,
                        expected_cols: self.cols,
                        rows: img.rows(),
                        cols: img.cols(),
                        file: Some(images.clone()),
                    });
                }
                imgs.into_iter().zip(labs).map(|(i, l)| LabeledSample::new(i, l)).collect()
            }
            DataSource::ImageDir { root } => {
                let contents = read_image_dir(root, self.rows, self.cols)?;
                if contents.class_names.len() != self.class_count {
                    return Err(Error::Format(format!(
                        "{} has {} class directories, manifest declares {}",
                        root.display(),
                        contents.class_names.len(),
                        self.class_count
                    )));
                }
                contents.samples
            }
        };
        Dataset::new(self.name.clone(), self.class_count, self.rows, self.cols, samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;

    #[test]
    fn idx_pair_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let imgs: Vec<GrayImage> = (0..3).map(|_| GrayImage::from_fn(2, 2, |_, _| 0.5)).collect();
        let ip = dir.path().join("i");
        let lp = dir.path().join("l");
        idx::write_bytes(&ip, &idx::encode_idx_images(&imgs).unwrap()).unwrap();
        idx::write_bytes(&lp, &idx::encode_idx_labels(&[0, 1]).unwrap()).unwrap();
        let mut m = DatasetManifest {
            name: "t".into(),
            source: DataSource::IdxPair { images: ip, labels: lp.clone() },
            class_count: 2,
            rows: 2,
            cols: 2,
        };
        assert!(m.load().unwrap_err().to_string().contains("3 images"));
        idx::write_bytes(&lp, &idx::encode_idx_labels(&[0, 1, 1]).unwrap()).unwrap();
        assert_eq!(m.load().unwrap().len(), 3);
        m.rows = 3;
        assert!(matches!(m.load(), Err(Error::ShapeMismatch { .. })));
    }
}
