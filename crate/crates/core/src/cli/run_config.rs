//! Run configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment. Keys are strict:
//! an unknown or repeated key is an error. Relative paths resolve against
//! the directory holding the file.
//!
//! | key | value |
//! |---|---|
//! | `stages` | 1 to 3 (defaults to the length of `filters`) |
//! | `filters` | comma list, one count per stage, e.g. `8,8` |
//! | `patch` | `RxC` or a single size, e.g. `8x8` |
//! | `kernel` | kernel name, e.g. `gaussian` |
//! | `kernel.<param>` | kernel parameter, e.g. `kernel.sigma = 0.5` |
//! | `blocks` | `RxC` or a single size |
//! | `overlap` | block overlap ratio in `[0, 1)` |
//! | `patch_budget` | patches kept per stage |
//! | `seed` | unsigned integer |
//! | `remove_patch_mean`, `share_stage_filters` | `true` / `false` |
//! | `lambda` | classifier regularization |
//! | `data.*`, `test.*` | dataset manifests, see below |
//! | `train_count` or `train_fraction` | split of `data` when `test` is absent |
//! | `test_count` | cap on the held-out side of the split |
//! | `out_dir` | output directory for `train` |
//!
//! A manifest under prefix `p` takes `p.name`, `p.classes`, `p.rows`,
//! `p.cols` and either `p.images` plus `p.labels` (IDX files, optionally
//! gzipped) or `p.root` (one PGM subdirectory per class).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::NetConfig;
use crate::dataset::{split_by_count, Dataset};
use crate::error::{Error, Result};
use crate::ingest::{DataSource, DatasetManifest};
use crate::kernels::{KernelKind, KernelSpec};
use crate::rng::Rng;

pub const DEFAULT_LAMBDA: f64 = 1e-3;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Split {
    Count(usize),
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub net: NetConfig,
    pub lambda: f64,
    pub data: Option<DatasetManifest>,
    /// Separate evaluation set; when absent `data` is split.
    pub test: Option<DatasetManifest>,
    pub split: Split,
    pub test_count: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            net: NetConfig::default(),
            lambda: DEFAULT_LAMBDA,
            data: None,
            test: None,
            split: Split::Fraction(DEFAULT_TRAIN_FRACTION),
            test_count: None,
            out_dir: None,
        }
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
    base: PathBuf,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| bad(line, format!("cannot parse '{v}' for {key}"))),
        }
    }

    fn flag(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some((_, v)) if v == "true" => Ok(Some(true)),
            Some((_, v)) if v == "false" => Ok(Some(false)),
            Some((line, v)) => Err(bad(line, format!("{key} must be true or false, got '{v}'"))),
        }
    }

    fn size(&mut self, key: &str) -> Result<Option<(usize, usize)>> {
        let Some((line, v)) = self.take(key) else {
            return Ok(None);
        };
        let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(line, format!("bad size '{v}' for {key}")));
        match v.split_once(['x', 'X']) {
            Some((r, c)) => Ok(Some((parse(r)?, parse(c)?))),
            None => {
                let n = parse(&v)?;
                Ok(Some((n, n)))
            }
        }
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        self.take(key).map(|(_, v)| self.base.join(v))
    }

    fn manifest(&mut self, prefix: &str) -> Result<Option<DatasetManifest>> {
        let dotted = format!("{prefix}.");
        if !self.map.keys().any(|k| k.starts_with(&dotted)) {
            return Ok(None);
        }
        let k = |name: &str| format!("{prefix}.{name}");
        let require = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("{prefix}.{name} is required")))
        };
        let name = self.take(&k("name")).map(|(_, v)| v).unwrap_or_else(|| prefix.to_string());
        let class_count = require(self.parsed(&k("classes"))?, "classes")?;
        let rows = require(self.parsed(&k("rows"))?, "rows")?;
        let cols = require(self.parsed(&k("cols"))?, "cols")?;
        let images = self.path(&k("images"));
        let labels = self.path(&k("labels"));
        let root = self.path(&k("root"));
        let source = match (images, labels, root) {
            (Some(images), Some(labels), None) => DataSource::IdxPair { images, labels },
            (None, None, Some(root)) => DataSource::ImageDir { root },
            _ => {
                return Err(Error::Config(format!(
                    "{prefix} needs either {prefix}.images and {prefix}.labels, or {prefix}.root"
                )))
            }
        };
        if class_count < 2 || rows == 0 || cols == 0 {
            return Err(Error::Config(format!("{prefix} needs at least 2 classes and a positive shape")));
        }
        Ok(Some(DatasetManifest {
            name,
            source,
            class_count,
            rows,
            cols,
        }))
    }
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let cfg = RunConfig::from_file_unvalidated(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a file for its dataset keys only; the network settings are
    /// parsed but not checked against each other.
    pub fn from_file_unvalidated(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::parse_unvalidated(&text, &base)
    }

    /// Parses config text, resolving relative paths against `base`, and
    /// validates the result.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let cfg = RunConfig::parse_unvalidated(text, base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn parse_unvalidated(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Entries {
            map: BTreeMap::new(),
            base: base.to_path_buf(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| bad(line, format!("expected 'key = value', got '{content}'")))?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if key.is_empty() || value.is_empty() {
                return Err(bad(line, "empty key or value"));
            }
            if let Some((first, _)) = entries.map.get(&key) {
                return Err(bad(line, format!("duplicate key '{key}' (first set on line {first})")));
            }
            entries.map.insert(key, (line, value));
        }

        let mut cfg = RunConfig::default();
        let net = &mut cfg.net;
        let filters_given = entries.map.contains_key("filters");
        if let Some((line, v)) = entries.take("filters") {
            net.filters_per_stage = v
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| bad(line, format!("bad filter list '{v}'"))))
                .collect::<Result<_>>()?;
            net.stages = net.filters_per_stage.len();
        }
        if let Some(s) = entries.parsed::<usize>("stages")? {
            if !filters_given {
                net.filters_per_stage = vec![net.filters_per_stage[0]; s];
            }
            net.stages = s;
        }
        if let Some((r, c)) = entries.size("patch")? {
            (net.patch_rows, net.patch_cols) = (r, c);
        }
        if let Some((r, c)) = entries.size("blocks")? {
            (net.block_rows, net.block_cols) = (r, c);
        }
        if let Some(v) = entries.parsed("overlap")? {
            net.overlap_ratio = v;
        }
        if let Some(v) = entries.parsed("patch_budget")? {
            net.train_patch_budget = v;
        }
        if let Some(v) = entries.parsed("seed")? {
            net.seed = v;
        }
        if let Some(v) = entries.flag("remove_patch_mean")? {
            net.remove_patch_mean = v;
        }
        if let Some(v) = entries.flag("share_stage_filters")? {
            net.share_stage_filters = v;
        }

        let kind = match entries.take("kernel") {
            Some((line, v)) => KernelKind::from_name(&v).ok_or_else(|| bad(line, format!("unknown kernel '{v}'")))?,
            None => KernelKind::Linear,
        };
        let mut overrides = Vec::new();
        for name in kind.param_names() {
            if let Some(v) = entries.parsed::<f64>(&format!("kernel.{name}"))? {
                overrides.push((*name, v));
            }
        }
        net.kernel = KernelSpec::with_params(kind, &overrides)?;

        if let Some(v) = entries.parsed("lambda")? {
            cfg.lambda = v;
        }
        match (entries.parsed::<usize>("train_count")?, entries.parsed::<f64>("train_fraction")?) {
            (Some(_), Some(_)) => return Err(Error::Config("set train_count or train_fraction, not both".into())),
            (Some(n), None) => cfg.split = Split::Count(n),
            (None, Some(f)) => cfg.split = Split::Fraction(f),
            (None, None) => {}
        }
        cfg.test_count = entries.parsed("test_count")?;
        cfg.out_dir = entries.path("out_dir");
        cfg.data = entries.manifest("data")?;
        cfg.test = entries.manifest("test")?;

        if let Some((key, (line, _))) = entries.map.iter().min_by_key(|(_, (l, _))| *l) {
            return Err(bad(*line, format!("unknown key '{key}'")));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if let Split::Fraction(f) = self.split {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("train_fraction must lie in (0, 1), got {f}")));
            }
        }
        for m in self.data.iter().chain(&self.test) {
            self.net.validate_for_image(m.rows, m.cols)?;
        }
        if let (Some(d), Some(t)) = (&self.data, &self.test) {
            if (d.rows, d.cols, d.class_count) != (t.rows, t.cols, t.class_count) {
                return Err(Error::Config("data and test manifests disagree on shape or classes".into()));
            }
        }
        Ok(())
    }

    pub fn data_manifest(&self) -> Result<&DatasetManifest> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::Config("no dataset configured (data.* keys)".into()))
    }

    /// Loads the training and held-out sets. Without a `test` manifest,
    /// `data` is shuffled with a generator derived from the seed and split.
    pub fn load_split(&self) -> Result<(Dataset, Dataset)> {
        let data = self.data_manifest()?.load()?;
        let (train, mut test) = match &self.test {
            Some(t) => (data, t.load()?),
            None => {
                let n = data.len();
                let count = match self.split {
                    Split::Count(c) => c,
                    Split::Fraction(f) => (f * n as f64).round() as usize,
                };
                let (a, b) = split_by_count(data.samples.clone(), count, &mut split_rng(self.net.seed))?;
                (data.with_samples(a), data.with_samples(b))
            }
        };
        if let Some(cap) = self.test_count {
            test.samples.truncate(cap);
        }
        Ok((train, test))
    }
}

/// Generator for dataset splitting; independent of the one used for
/// training the network.
pub fn split_rng(seed: u64) -> Rng {
    Rng::from_seed(seed).child()
}

/// Generator for filter learning.
pub fn network_rng(seed: u64) -> Rng {
    let mut root = Rng::from_seed(seed);
    root.child();
    root.child()
}
