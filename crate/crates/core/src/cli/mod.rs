//! Command implementations behind the `kpcanet` binary.
//!
//! Every command writes its outputs to files and returns a summary, so the
//! same code paths serve the binary and the test suites.

pub mod report;
pub mod run_config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use run_config::{RunConfig, Split};

use crate::classifier::{train_linear_ovr_with_telemetry, Evaluation, SolverOptions};
use crate::dataset::{class_counts, Dataset};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::ingest::write_pgm;
use crate::kernels::KernelKind;
use crate::model_file::{load_model, save_model};
use crate::network::{extract_features, train_network, Model};
use crate::patches::PatchMatrix;
use report::Report;

pub const MODEL_FILE: &str = "model.kpcn";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn images(ds: &Dataset) -> Vec<&GrayImage> {
    ds.samples.iter().map(|s| &s.image).collect()
}

fn labels(ds: &Dataset) -> Vec<usize> {
    ds.samples.iter().map(|s| s.label).collect()
}

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub train_error: f64,
    /// `None` when the held-out side is empty.
    pub test_error: Option<f64>,
}

/// Loads data, learns the stages and the classifier, writes the model file
/// and the training report into `out_dir`.
pub fn train(cfg: &RunConfig, out_dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    let manifest = cfg.data_manifest()?;
    let started = Instant::now();
    let (train_set, test_set) = cfg.load_split()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let load_s = started.elapsed().as_secs_f64();
    log::info!("loaded {}: {} train, {} held out", manifest.name, train_set.len(), test_set.len());

    let t = Instant::now();
    let bases = train_network(&train_set.samples, &cfg.net, &mut run_config::network_rng(cfg.net.seed))?;
    let filters_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let train_imgs = images(&train_set);
    let train_feats = extract_features(&train_imgs, &bases, &cfg.net)?;
    let features_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let train_labels = labels(&train_set);
    let opts = SolverOptions {
        lambda: cfg.lambda,
        ..Default::default()
    };
    let (classifier, telemetry) =
        train_linear_ovr_with_telemetry(&train_feats, &train_labels, manifest.class_count, &opts)?;
    let classifier_s = t.elapsed().as_secs_f64();

    let model = Model {
        config: cfg.net.clone(),
        image_rows: manifest.rows,
        image_cols: manifest.cols,
        stage_bases: bases,
        classifier,
        class_count: manifest.class_count,
    };
    model.validate()?;

    let train_pred = train_feats
        .iter()
        .map(|f| model.classifier.predict(f))
        .collect::<Result<Vec<_>>>()?;
    let train_eval = Evaluation::from_predictions(&train_pred, &train_labels, model.class_count)?;
    let t = Instant::now();
    let test_eval = if test_set.is_empty() {
        None
    } else {
        let pred = model.predict(&images(&test_set))?;
        Some(Evaluation::from_predictions(&pred, &labels(&test_set), model.class_count)?)
    };
    let test_s = t.elapsed().as_secs_f64();

    create_dir(out_dir)?;
    let model_path = out_dir.join(MODEL_FILE);
    save_model(&model_path, &model)?;

    let mut r = Report::new("training report");
    r.field("model", model_path.display());
    r.field("dataset", &manifest.name);
    r.field("train_samples", train_set.len());
    r.field("test_samples", test_set.len());
    r.field("image_shape", format!("{}x{}", manifest.rows, manifest.cols));
    describe_model(&mut r, &model);
    r.field("classifier.lambda", cfg.lambda);
    r.field("classifier.epochs", join(telemetry.iter().map(|t| t.epochs)));
    r.field(
        "classifier.max_duality_gap",
        format!("{:e}", telemetry.iter().map(|t| t.duality_gap).fold(0.0, f64::max)),
    );
    r.field("classifier.converged", telemetry.iter().all(|t| t.converged));
    r.field("time.load_s", format!("{load_s:.3}"));
    r.field("time.filters_s", format!("{filters_s:.3}"));
    r.field("time.features_s", format!("{features_s:.3}"));
    r.field("time.classifier_s", format!("{classifier_s:.3}"));
    r.field("time.test_s", format!("{test_s:.3}"));
    r.field("time.total_s", format!("{:.3}", started.elapsed().as_secs_f64()));
    r.field("train_class_counts", join(class_counts(&train_set.samples, model.class_count)));
    r.field("test_class_counts", join(class_counts(&test_set.samples, model.class_count)));
    r.field("train_error", train_eval.error_rate);
    if let Some(e) = &test_eval {
        r.field("test_error", e.error_rate);
        r.confusion("test_confusion", &e.confusion);
    }
    r.write(out_dir, "train_report")?;

    Ok(TrainOutcome {
        model_path,
        train_error: train_eval.error_rate,
        test_error: test_eval.map(|e| e.error_rate),
    })
}

fn describe_model(r: &mut Report, model: &Model) {
    let c = &model.config;
    r.field("kernel", c.kernel);
    r.field("stages", c.stages);
    r.field("filters", join(&c.filters_per_stage));
    r.field("patch", format!("{}x{}", c.patch_rows, c.patch_cols));
    r.field("blocks", format!("{}x{}", c.block_rows, c.block_cols));
    r.field("overlap", c.overlap_ratio);
    r.field("patch_budget", c.train_patch_budget);
    r.field("seed", c.seed);
    r.field("remove_patch_mean", c.remove_patch_mean);
    r.field("share_stage_filters", c.share_stage_filters);
    r.field("feature_dim", model.classifier.dim());
    r.field("classes", model.class_count);
    for (s, b) in model.stage_bases.iter().enumerate() {
        r.field(format!("stage.{}.basis_patches", s + 1), b.basis_patches().count());
        r.field(format!("stage.{}.eigenvalues", s + 1), join(b.eigenvalues().iter().map(|v| format!("{v:.6e}"))));
    }
}

/// Which part of a configured dataset a command reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    All,
    Train,
    Test,
}

/// Loads the `data` manifest of a config file, optionally reproducing the
/// train/test split it describes.
pub fn load_subset(cfg: &RunConfig, subset: Subset) -> Result<Dataset> {
    match subset {
        Subset::All => cfg.data_manifest()?.load(),
        Subset::Train => Ok(cfg.load_split()?.0),
        Subset::Test => Ok(cfg.load_split()?.1),
    }
}

fn check_dataset(model: &Model, ds: &Dataset) -> Result<()> {
    if (ds.rows, ds.cols) != (model.image_rows, model.image_cols) {
        return Err(Error::ShapeMismatch {
            expected_rows: model.image_rows,
            expected_cols: model.image_cols,
            rows: ds.rows,
            cols: ds.cols,
            file: None,
        });
    }
    if ds.class_count > model.class_count {
        return Err(Error::Config(format!(
            "dataset has {} classes, model was trained on {}",
            ds.class_count, model.class_count
        )));
    }
    Ok(())
}

/// Evaluates a stored model and writes `eval_report.{txt,kv}` into `out_dir`.
pub fn eval(model_path: &Path, data: &Dataset, out_dir: &Path) -> Result<Evaluation> {
    let model = load_model(model_path)?;
    check_dataset(&model, data)?;
    if data.is_empty() {
        return Err(Error::NoSamples);
    }
    let t = Instant::now();
    let predicted = model.predict(&images(data))?;
    let evaluation = Evaluation::from_predictions(&predicted, &labels(data), model.class_count)?;

    let mut r = Report::new("evaluation report");
    r.field("model", model_path.display());
    r.field("dataset", &data.name);
    r.field("samples", data.len());
    r.field("errors", evaluation.total() - evaluation.correct());
    r.field("error_rate", evaluation.error_rate);
    r.field("time.eval_s", format!("{:.3}", t.elapsed().as_secs_f64()));
    r.confusion("confusion", &evaluation.confusion);
    create_dir(out_dir)?;
    r.write(out_dir, "eval_report")?;
    Ok(evaluation)
}

/// Writes pooled features as `u64 count, u64 dim` followed by `count * dim`
/// `u32` bin counts, row by row, all little-endian. Returns `(count, dim)`.
pub fn extract(model_path: &Path, data: &Dataset, out_path: &Path) -> Result<(usize, usize)> {
    let model = load_model(model_path)?;
    check_dataset(&model, data)?;
    let dim = model.classifier.dim();
    let features = model.features(&images(data))?;
    let file = fs::File::create(out_path).map_err(|e| Error::io(out_path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(out_path, e);
    w.write_all(&(features.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(dim as u64).to_le_bytes()).map_err(io)?;
    for f in &features {
        for v in f.to_dense() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    Ok((features.len(), dim))
}

/// Reads a feature file written by [`extract`] back as dense rows.
pub fn read_feature_file(path: &Path) -> Result<(usize, Vec<Vec<u32>>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let short = || Error::Format(format!("{}: truncated feature file", path.display()));
    let header = |i: usize| {
        bytes
            .get(i * 8..i * 8 + 8)
            .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")) as usize)
            .ok_or_else(short)
    };
    let (count, dim) = (header(0)?, header(1)?);
    let body = &bytes[16..];
    if body.len() != count * dim * 4 {
        return Err(short());
    }
    let values: Vec<u32> = body.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let rows = if dim == 0 { vec![Vec::new(); count] } else { values.chunks(dim).map(<[u32]>::to_vec).collect() };
    Ok((dim, rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InspectOutcome {
    pub text: String,
    /// Filter images written; empty for nonlinear kernels.
    pub filter_images: Vec<PathBuf>,
}

/// Describes a stored model. For a linear kernel each stage's filters are
/// also rendered to `out_dir` as min-max scaled PGM images named
/// `stage{s}_filter{l}.pgm`.
pub fn inspect(model_path: &Path, out_dir: Option<&Path>) -> Result<InspectOutcome> {
    let model = load_model(model_path)?;
    let mut r = Report::new("model");
    r.field("file", model_path.display());
    r.field("image_shape", format!("{}x{}", model.image_rows, model.image_cols));
    describe_model(&mut r, &model);
    let mut filter_images = Vec::new();
    if model.config.kernel.kind() == KernelKind::Linear {
        if let Some(dir) = out_dir {
            create_dir(dir)?;
            for (s, basis) in model.stage_bases.iter().enumerate() {
                let filters = basis.reconstruct_linear_filters()?;
                for (l, img) in filter_images_of(&filters, model.config.patch_rows, model.config.patch_cols)
                    .into_iter()
                    .enumerate()
                {
                    let path = dir.join(format!("stage{}_filter{}.pgm", s + 1, l + 1));
                    write_pgm(&path, &img)?;
                    filter_images.push(path);
                }
            }
            r.field("filter_images", filter_images.len());
        }
    } else {
        r.note(format!(
            "no input-space filters exist for the {} kernel; spectra only",
            model.config.kernel.kind()
        ));
    }
    Ok(InspectOutcome {
        text: r.text(),
        filter_images,
    })
}

fn filter_images_of(filters: &PatchMatrix, rows: usize, cols: usize) -> Vec<GrayImage> {
    filters
        .columns()
        .map(|w| {
            let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let px = w
                .iter()
                .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 })
                .collect();
            GrayImage::new(rows, cols, px).expect("filter values are finite")
        })
        .collect()
}
