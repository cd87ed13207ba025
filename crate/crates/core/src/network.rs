//! Cascaded KPCA stages.
//!
//! Every stage filters each incoming map with its `L` components, so after
//! stages `1..=S` an image has `L_1 * ... * L_S` maps, all the size of the
//! input. Maps are kept in lexicographic lineage order: the map produced by
//! filter `s` of stage 2 from stage-1 map `l` has lineage `[l, s]`. Indices
//! are 0-based.
//!
//! Stage `s > 1` learns from patches pooled across all stage-`(s-1)` maps of
//! all training images, subsampled to the patch budget, unless
//! `share_stage_filters` reuses the first stage's basis everywhere.

use rayon::prelude::*;

use crate::classifier::LinearModel;
use crate::config::NetConfig;
use crate::error::{Error, Result};
use crate::image::{GrayImage, LabeledSample};
use crate::kpca::{learn_filters, FilterBank, KpcaBasis};
use crate::patches::{write_patch, PatchMatrix};
use crate::pooling::{pool, FeatureVector};
use crate::rng::Rng;

/// All maps derived from one source image.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub source_index: usize,
    pub maps: Vec<GrayImage>,
    pub lineage: Vec<Vec<usize>>,
}

/// A trained network: per-stage bases, pooling geometry (in `config`) and
/// the linear classifier over pooled features.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: NetConfig,
    pub image_rows: usize,
    pub image_cols: usize,
    pub stage_bases: Vec<KpcaBasis>,
    pub classifier: LinearModel,
    pub class_count: usize,
}

fn filter_grid(grid: &GrayImage, bank: &FilterBank<'_>, k1: usize, k2: usize, remove_mean: bool) -> Vec<GrayImage> {
    let (rows, cols) = grid.shape();
    let l = bank.num_components();
    let mut outputs: Vec<Vec<f64>> = vec![vec![0.0; rows * cols]; l];
    let mut patch = vec![0.0; k1 * k2];
    let mut scratch = vec![0.0; bank.scratch_len()];
    let mut resp = vec![0.0; l];
    for r in 0..rows {
        for c in 0..cols {
            write_patch(grid.pixels(), rows, cols, r, c, k1, k2, remove_mean, &mut patch);
            bank.respond(&patch, &mut scratch, &mut resp);
            let j = r * cols + c;
            for (out, v) in outputs.iter_mut().zip(&resp) {
                out[j] = *v;
            }
        }
    }
    outputs
        .into_iter()
        .map(|px| GrayImage::from_vec_unchecked(rows, cols, px))
        .collect()
}

fn check_patch_dim(basis: &KpcaBasis, k1: usize, k2: usize) -> Result<()> {
    if basis.patch_dim() != k1 * k2 {
        return Err(Error::DimensionMismatch {
            expected: k1 * k2,
            found: basis.patch_dim(),
            context: "basis patch dimension",
        });
    }
    Ok(())
}

/// Filters every grid with `basis`; output `i` holds the `L` maps of input
/// `i`, each the same shape as the input.
pub fn apply_stage(
    images: &[GrayImage],
    basis: &KpcaBasis,
    k1: usize,
    k2: usize,
    remove_mean: bool,
) -> Result<Vec<Vec<GrayImage>>> {
    check_patch_dim(basis, k1, k2)?;
    let bank = basis.filter_bank();
    Ok(images
        .par_iter()
        .map(|img| filter_grid(img, &bank, k1, k2, remove_mean))
        .collect())
}

/// Maps entering the stage after `banks`; just the image when `banks` is empty.
fn maps_before(image: &GrayImage, banks: &[FilterBank<'_>], config: &NetConfig) -> Vec<GrayImage> {
    let mut maps = vec![image.clone()];
    for bank in banks {
        maps = maps
            .iter()
            .flat_map(|m| filter_grid(m, bank, config.patch_rows, config.patch_cols, config.remove_patch_mean))
            .collect();
    }
    maps
}

/// Learns one basis per stage from the training images.
pub fn train_network(train: &[LabeledSample], config: &NetConfig, rng: &mut Rng) -> Result<Vec<KpcaBasis>> {
    config.validate()?;
    let first = train.first().ok_or(Error::EmptyDataset)?;
    let (rows, cols) = first.image.shape();
    for s in train {
        if s.image.shape() != (rows, cols) {
            return Err(Error::ShapeMismatch {
                expected_rows: rows,
                expected_cols: cols,
                rows: s.image.rows(),
                cols: s.image.cols(),
                file: None,
            });
        }
    }
    let (k1, k2) = (config.patch_rows, config.patch_cols);
    let pixels = rows * cols;
    let mut bases: Vec<KpcaBasis> = Vec::with_capacity(config.stages);

    for stage in 0..config.stages {
        let mut stage_rng = rng.child();
        if stage > 0 && config.share_stage_filters {
            bases.push(bases[0].clone());
            continue;
        }
        let maps_per_image: usize = config.filters_per_stage[..stage].iter().product();
        let per_image = maps_per_image * pixels;
        let total = train.len() * per_image;
        let picked = stage_rng.sample_indices(total, config.train_patch_budget);

        // group the sorted picks by source image
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for idx in picked {
            let (img, rem) = (idx / per_image, idx % per_image);
            match groups.last_mut() {
                Some((i, v)) if *i == img => v.push(rem),
                _ => groups.push((img, vec![rem])),
            }
        }
        let banks: Vec<FilterBank<'_>> = bases.iter().map(|b| b.filter_bank()).collect();
        let chunks: Vec<Vec<f64>> = groups
            .par_iter()
            .map(|(img, rems)| {
                let maps = maps_before(&train[*img].image, &banks, config);
                let mut out = vec![0.0; rems.len() * k1 * k2];
                for (rem, dst) in rems.iter().zip(out.chunks_exact_mut(k1 * k2)) {
                    let (map, px) = (rem / pixels, rem % pixels);
                    write_patch(
                        maps[map].pixels(),
                        rows,
                        cols,
                        px / cols,
                        px % cols,
                        k1,
                        k2,
                        config.remove_patch_mean,
                        dst,
                    );
                }
                out
            })
            .collect();
        drop(banks);
        let patches = PatchMatrix::new(k1 * k2, chunks.concat())?;
        log::info!(
            "stage {}: learning {} filters from {} of {} patches",
            stage + 1,
            config.filters_per_stage[stage],
            patches.count(),
            total
        );
        let basis = learn_filters(patches, config.kernel, config.filters_per_stage[stage])
            .map_err(|e| e.at_stage(stage + 1))?;
        bases.push(basis);
    }
    Ok(bases)
}

fn check_bases(stage_bases: &[KpcaBasis], config: &NetConfig) -> Result<()> {
    if stage_bases.len() != config.stages {
        return Err(Error::Config(format!(
            "model has {} stage bases but config declares {} stages",
            stage_bases.len(),
            config.stages
        )));
    }
    for (s, basis) in stage_bases.iter().enumerate() {
        check_patch_dim(basis, config.patch_rows, config.patch_cols).map_err(|e| e.at_stage(s + 1))?;
        if basis.num_components() != config.filters_per_stage[s] {
            return Err(Error::Config(format!(
                "stage {} basis has {} components, config expects {}",
                s + 1,
                basis.num_components(),
                config.filters_per_stage[s]
            )));
        }
    }
    Ok(())
}

/// Runs an image through every stage, recording lineage.
pub fn forward(image: &GrayImage, stage_bases: &[KpcaBasis], config: &NetConfig) -> Result<StageOutput> {
    check_bases(stage_bases, config)?;
    let banks: Vec<FilterBank<'_>> = stage_bases.iter().map(|b| b.filter_bank()).collect();
    Ok(forward_with_banks(image, &banks, config))
}

fn forward_with_banks(image: &GrayImage, banks: &[FilterBank<'_>], config: &NetConfig) -> StageOutput {
    let mut maps = vec![image.clone()];
    let mut lineage: Vec<Vec<usize>> = vec![Vec::new()];
    for bank in banks {
        let mut next_maps = Vec::with_capacity(maps.len() * bank.num_components());
        let mut next_lineage = Vec::with_capacity(next_maps.capacity());
        for (map, tag) in maps.iter().zip(&lineage) {
            let outs = filter_grid(map, bank, config.patch_rows, config.patch_cols, config.remove_patch_mean);
            for (l, out) in outs.into_iter().enumerate() {
                let mut t = tag.clone();
                t.push(l);
                next_lineage.push(t);
                next_maps.push(out);
            }
        }
        maps = next_maps;
        lineage = next_lineage;
    }
    StageOutput {
        source_index: 0,
        maps,
        lineage,
    }
}

/// Pooled features for every image, in input order.
pub fn extract_features(images: &[&GrayImage], stage_bases: &[KpcaBasis], config: &NetConfig) -> Result<Vec<FeatureVector>> {
    check_bases(stage_bases, config)?;
    let banks: Vec<FilterBank<'_>> = stage_bases.iter().map(|b| b.filter_bank()).collect();
    images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let mut out = forward_with_banks(img, &banks, config);
            out.source_index = i;
            pool(&out, config)
        })
        .collect()
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.config.validate_for_image(self.image_rows, self.image_cols)?;
        check_bases(&self.stage_bases, &self.config)?;
        let dim = crate::pooling::feature_len(&self.config, self.image_rows, self.image_cols)?;
        if self.classifier.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.classifier.dim(),
                context: "classifier feature dimension",
            });
        }
        if self.classifier.class_count() != self.class_count {
            return Err(Error::Config("classifier class count disagrees with model".into()));
        }
        Ok(())
    }

    fn check_shape(&self, image: &GrayImage) -> Result<()> {
        if image.shape() != (self.image_rows, self.image_cols) {
            return Err(Error::ShapeMismatch {
                expected_rows: self.image_rows,
                expected_cols: self.image_cols,
                rows: image.rows(),
                cols: image.cols(),
                file: None,
            });
        }
        Ok(())
    }

    pub fn features(&self, images: &[&GrayImage]) -> Result<Vec<FeatureVector>> {
        for img in images {
            self.check_shape(img)?;
        }
        extract_features(images, &self.stage_bases, &self.config)
    }

    pub fn predict(&self, images: &[&GrayImage]) -> Result<Vec<usize>> {
        self.features(images)?
            .iter()
            .map(|f| self.classifier.predict(f))
            .collect()
    }
}
