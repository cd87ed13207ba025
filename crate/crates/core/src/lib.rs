//! Kernel-PCA filter-bank networks for image classification.
//!
//! A network learns a bank of KPCA filters per stage from image patches,
//! convolves every map with the bank, binarizes and hashes the last stage's
//! responses and pools the codes into block histograms. A linear SVM
//! classifies the pooled features.

pub mod classifier;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod eigen;
pub mod error;
pub mod image;
pub mod ingest;
pub mod kernels;
pub mod kpca;
pub mod matrix;
pub mod model_file;
pub mod network;
pub mod patches;
pub mod pooling;
pub mod rng;
pub mod synthetic;

pub use classifier::{evaluate, train_linear_ovr, Evaluation, LinearModel};
pub use config::NetConfig;
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use image::{GrayImage, LabeledSample};
pub use kernels::{KernelKind, KernelSpec};
pub use kpca::{learn_filters, KpcaBasis};
pub use network::{extract_features, forward, train_network, Model};
pub use pooling::FeatureVector;
pub use rng::Rng;
