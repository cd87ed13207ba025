use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kpcanet::cli::read_feature_file;
use kpcanet::cli::report::parse_key_values;
use kpcanet::ingest::idx::{encode_idx_images, encode_idx_labels, write_bytes};
use kpcanet::synthetic::stripes;
use kpcanet::{GrayImage, Rng};

fn kpcanet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpcanet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn kv(path: &Path) -> Vec<(String, String)> {
    parse_key_values(&fs::read_to_string(path).unwrap())
}

fn value(pairs: &[(String, String)], key: &str) -> String {
    pairs.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("missing {key}")).1.clone()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// 60 stripe images (16x16) as IDX files and a small linear config.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let data = stripes(30, 16, 16, &mut Rng::from_seed(11));
        write_idx(dir.path(), "stripes", &data.iter().map(|s| s.image.clone()).collect::<Vec<_>>(), &data.iter().map(|s| s.label).collect::<Vec<_>>());
        let fx = Fixture { dir };
        fx.config("run.cfg", "kernel = linear\n");
        fx
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    /// Writes a config for the stripe data with `extra` lines appended.
    fn config(&self, name: &str, extra: &str) -> String {
        let text = format!(
            "# stripe test run\nfilters = 3,3\npatch = 5x5\nblocks = 8x8\noverlap = 0.5\npatch_budget = 200\n\
             seed = 4\nlambda = 0.001\ndata.name = stripes\ndata.images = stripes-images.idx\n\
             data.labels = stripes-labels.idx\ndata.classes = 2\ndata.rows = 16\ndata.cols = 16\n\
             train_count = 40\n{extra}"
        );
        fs::write(self.path(name), text).unwrap();
        self.s(name)
    }

    fn train(&self, config: &str, out: &str) -> Output {
        let o = kpcanet(&["train", "--config", config, "--out", &self.s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        o
    }
}

fn write_idx(dir: &Path, stem: &str, images: &[GrayImage], labels: &[usize]) {
    write_bytes(dir.join(format!("{stem}-images.idx")), &encode_idx_images(images).unwrap()).unwrap();
    write_bytes(dir.join(format!("{stem}-labels.idx")), &encode_idx_labels(labels).unwrap()).unwrap();
}

#[test]
fn help_documents_exit_codes() {
    let o = kpcanet(&["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for word in ["train", "eval", "extract", "inspect", "numeric failure", "configuration error"] {
        assert!(text.contains(word), "{word}");
    }
}

#[test]
fn train_then_eval_agree() {
    let fx = Fixture::new();
    let cfg = fx.s("run.cfg");
    fx.train(&cfg, "out");
    assert!(fx.path("out/model.kpcn").exists());
    let report = kv(&fx.path("out/train_report.kv"));
    assert_eq!(value(&report, "train_samples"), "40");
    assert_eq!(value(&report, "test_samples"), "20");
    assert_eq!(value(&report, "feature_dim"), (9 * 3 * 8).to_string());
    assert_eq!(value(&report, "stage.1.eigenvalues").split(',').count(), 3);
    assert!(fs::read_to_string(fx.path("out/train_report.txt")).unwrap().contains("test_confusion"));

    let o = kpcanet(&["eval", "--model", &fx.s("out/model.kpcn"), "--data", &cfg, "--split", "test", "--out", &fx.s("eval")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let eval = kv(&fx.path("eval/eval_report.kv"));
    assert_eq!(value(&eval, "samples"), "20");
    // the stored model reproduces the in-memory test error
    assert_eq!(value(&eval, "error_rate"), value(&report, "test_error"));
    let confusion: usize = ["confusion.0", "confusion.1"]
        .iter()
        .flat_map(|k| value(&eval, k).split(',').map(|v| v.parse::<usize>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(confusion, 20);
}

#[test]
fn training_is_reproducible_and_seed_overrides() {
    let fx = Fixture::new();
    let cfg = fx.s("run.cfg");
    fx.train(&cfg, "a");
    fx.train(&cfg, "b");
    let a = fs::read(fx.path("a/model.kpcn")).unwrap();
    assert_eq!(a, fs::read(fx.path("b/model.kpcn")).unwrap());

    let o = kpcanet(&["train", "--config", &cfg, "--out", &fx.s("c"), "--seed", "99"]);
    assert!(o.status.success());
    let c = kv(&fx.path("c/train_report.kv"));
    assert_eq!(value(&c, "seed"), "99");
    assert_ne!(a, fs::read(fx.path("c/model.kpcn")).unwrap());
}

#[test]
fn config_errors_abort_before_work() {
    let fx = Fixture::new();
    let cfg = fx.config("wide.cfg", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("filters = 3,3", "filters = 8,20");
    fs::write(&cfg, text).unwrap();
    let o = kpcanet(&["train", "--config", &cfg, "--out", &fx.s("never")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bin count exceeds 2^16"), "{}", stderr(&o));
    assert!(!fx.path("never").exists());

    let bad = fx.config("typo.cfg", "lamda = 0.1\n");
    let o = kpcanet(&["train", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown key 'lamda'"));
}

#[test]
fn insufficient_spectrum_is_a_numeric_failure() {
    let fx = Fixture::new();
    // blank images have an all-zero linear Gram matrix
    let blank: Vec<GrayImage> = (0..10).map(|_| GrayImage::from_fn(16, 16, |_, _| 0.0)).collect();
    write_idx(fx.dir.path(), "blank", &blank, &[0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
    let text = fs::read_to_string(fx.path("run.cfg")).unwrap().replace("stripes-", "blank-").replace("train_count = 40", "train_count = 6");
    fs::write(fx.path("blank.cfg"), text).unwrap();
    let o = kpcanet(&["train", "--config", &fx.s("blank.cfg"), "--out", &fx.s("o")]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("stage 1"), "{}", stderr(&o));
}

#[test]
fn eval_data_errors() {
    let fx = Fixture::new();
    fx.train(&fx.s("run.cfg"), "out");
    let model = fx.s("out/model.kpcn");

    let small: Vec<GrayImage> = (0..4).map(|_| GrayImage::from_fn(12, 12, |r, _| r as f64 / 12.0)).collect();
    write_idx(fx.dir.path(), "small", &small, &[0, 1, 0, 1]);
    fs::write(
        fx.path("small.cfg"),
        "data.images = small-images.idx\ndata.labels = small-labels.idx\ndata.classes = 2\ndata.rows = 12\ndata.cols = 12\n",
    )
    .unwrap();
    let o = kpcanet(&["eval", "--model", &model, "--data", &fx.s("small.cfg"), "--out", &fx.s("e")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("shape mismatch"), "{}", stderr(&o));

    write_idx(fx.dir.path(), "empty", &[], &[]);
    fs::write(
        fx.path("empty.cfg"),
        "data.images = empty-images.idx\ndata.labels = empty-labels.idx\ndata.classes = 2\ndata.rows = 16\ndata.cols = 16\n",
    )
    .unwrap();
    let o = kpcanet(&["eval", "--model", &model, "--data", &fx.s("empty.cfg"), "--out", &fx.s("e")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no samples"), "{}", stderr(&o));

    // zero images extract to a header-only file
    let o = kpcanet(&["extract", "--model", &model, "--data", &fx.s("empty.cfg"), "--out", &fx.s("empty.feat")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = fs::read(fx.path("empty.feat")).unwrap();
    assert_eq!(bytes.len(), 16);
    assert_eq!(&bytes[..8], &0u64.to_le_bytes());
    assert_eq!(&bytes[8..], &216u64.to_le_bytes());
}

#[test]
fn extract_layout_and_repeatability() {
    let fx = Fixture::new();
    let cfg = fx.s("run.cfg");
    fx.train(&cfg, "out");
    let model = fx.s("out/model.kpcn");
    for name in ["f1", "f2"] {
        let o = kpcanet(&["extract", "--model", &model, "--data", &cfg, "--out", &fx.s(name)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let bytes = fs::read(fx.path("f1")).unwrap();
    assert_eq!(bytes, fs::read(fx.path("f2")).unwrap());
    assert_eq!(bytes.len(), 16 + 60 * 216 * 4);
    let (dim, rows) = read_feature_file(&fx.path("f1")).unwrap();
    assert_eq!((dim, rows.len()), (216, 60));
    // 3 groups x 9 blocks x 64 pixels per block
    for r in &rows {
        assert_eq!(r.iter().map(|&v| v as usize).sum::<usize>(), 3 * 9 * 64);
    }
}

#[test]
fn inspect_linear_and_gaussian() {
    let fx = Fixture::new();
    fx.train(&fx.s("run.cfg"), "lin");
    let o = kpcanet(&["inspect", "--model", &fx.s("lin/model.kpcn"), "--out", &fx.s("filters")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("stage.2.eigenvalues"));
    for s in 1..=2 {
        for l in 1..=3 {
            let img = kpcanet::ingest::read_pgm(fx.path(&format!("filters/stage{s}_filter{l}.pgm"))).unwrap();
            assert_eq!(img.shape(), (5, 5));
            let px = img.pixels();
            assert_eq!(px.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(px.iter().copied().fold(0.0, f64::max), 1.0);
        }
    }

    let gcfg = fx.config("gauss.cfg", "kernel = gaussian\nkernel.sigma = 1.5\n");
    fx.train(&gcfg, "gauss");
    let o = kpcanet(&["inspect", "--model", &fx.s("gauss/model.kpcn"), "--out", &fx.s("gfilters")]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("gaussian(sigma=1.5)"), "{text}");
    assert!(text.contains("no input-space filters exist"), "{text}");
    assert!(!fx.path("gfilters").exists());

    let mut bytes = fs::read(fx.path("gauss/model.kpcn")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(fx.path("corrupt.kpcn"), bytes).unwrap();
    let o = kpcanet(&["inspect", "--model", &fx.s("corrupt.kpcn")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));
}

#[test]
fn image_directory_dataset() {
    let fx = Fixture::new();
    let data = stripes(10, 16, 16, &mut Rng::from_seed(2));
    for s in &data {
        let dir = fx.path(&format!("pgm/{}", ["horizontal", "vertical"][s.label]));
        fs::create_dir_all(&dir).unwrap();
        let n = fs::read_dir(&dir).unwrap().count();
        kpcanet::ingest::write_pgm(dir.join(format!("{n:03}.pgm")), &s.image).unwrap();
    }
    let cfg = fx.path("dir.cfg");
    fs::write(
        &cfg,
        "filters = 3,3\npatch = 5x5\npatch_budget = 200\ndata.root = pgm\ndata.classes = 2\ndata.rows = 16\ndata.cols = 16\ntrain_fraction = 0.5\n",
    )
    .unwrap();
    fx.train(&cfg.display().to_string(), "dir_out");
    let report = kv(&fx.path("dir_out/train_report.kv"));
    assert_eq!(value(&report, "train_samples"), "10");
    assert_eq!(value(&report, "test_samples"), "10");
}
