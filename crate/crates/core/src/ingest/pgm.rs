//! Binary 8-bit PGM (`P5`) images and per-class image directories.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::{GrayImage, LabeledSample};
use crate::ingest::idx::{quantize, write_bytes};

/// Parses a `P5` image, dividing each sample by the header's maxval.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::Format("not a binary PGM (P5) image".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed PGM header".into()))?;
    }
    let [cols, rows, maxval] = fields;
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("malformed PGM header".into()));
    }
    pos += 1;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    let data = bytes
        .get(pos..pos + rows * cols)
        .ok_or_else(|| Error::Format("truncated PGM pixel data".into()))?;
    let scale = maxval as f64;
    GrayImage::new(rows, cols, data.iter().map(|&b| b as f64 / scale).collect())
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Encodes with maxval 255; pixels are clamped to `[0, 1]` and rounded.
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    out.extend(image.pixels().iter().map(|&v| quantize(v)));
    out
}

pub fn write_pgm(path: impl AsRef<Path>, image: &GrayImage) -> Result<()> {
    write_bytes(path, &encode_pgm(image))
}

/// Samples from a directory holding one subdirectory per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDirContents {
    pub samples: Vec<LabeledSample>,
    /// Subdirectory names in label order.
    pub class_names: Vec<String>,
    /// Files that were not binary PGM images.
    pub skipped: usize,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .and_then(|it| it.map(|e| e.map(|e| e.path())).collect::<std::io::Result<Vec<_>>>())
        .map_err(|e| Error::io(dir, e))?;
    entries.sort();
    Ok(entries)
}

/// Labels follow sorted subdirectory names and files within a class are
/// read in sorted name order. Every image must be `rows x cols`.
pub fn read_image_dir(root: impl AsRef<Path>, rows: usize, cols: usize) -> Result<ImageDirContents> {
    let root = root.as_ref();
    let mut out = ImageDirContents {
        samples: Vec::new(),
        class_names: Vec::new(),
        skipped: 0,
    };
    for class_dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let label = out.class_names.len();
        let name = class_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let before = out.samples.len();
        for file in sorted_entries(&class_dir)?.into_iter().filter(|p| p.is_file()) {
            let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
            if !bytes.starts_with(b"P5") {
                out.skipped += 1;
                continue;
            }
            let image = parse_pgm(&bytes).map_err(|e| match e {
                Error::Format(msg) => Error::Format(format!("{}: {msg}", file.display())),
                other => other,
            })?;
            if image.shape() != (rows, cols) {
                return Err(Error::ShapeMismatch {
                    expected_rows: rows,
                    expected_cols: cols,
                    rows: image.rows(),
                    cols: image.cols(),
                    file: Some(file),
                });
            }
            out.samples.push(LabeledSample::new(image, label));
        }
        if out.samples.len() == before {
            return Err(Error::EmptyClass(class_dir.display().to_string()));
        }
        out.class_names.push(name);
    }
    if out.skipped > 0 {
        log::warn!("{}: skipped {} non-PGM files", root.display(), out.skipped);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        bytes.extend([0, 128, 255, 1, 2, 3]);
        let img = parse_pgm(&bytes).unwrap();
        assert_eq!(img.shape(), (2, 3));
        assert_eq!(img.get(0, 1), 128.0 / 255.0);
        assert_eq!(img.get(0, 2), 1.0);
        let mut low = b"P5 1 1 15 ".to_vec();
        low.push(3);
        assert_eq!(parse_pgm(&low).unwrap().get(0, 0), 0.2);
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(parse_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(parse_pgm(b"P5\n1 1\n65535\n\0\0").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\0").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_quantization(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let mut rng = crate::rng::Rng::from_seed(seed);
            let img = GrayImage::from_fn(rows, cols, |_, _| rng.uniform());
            let back = parse_pgm(&encode_pgm(&img)).unwrap();
            prop_assert_eq!(back.shape(), img.shape());
            for (a, b) in img.pixels().iter().zip(back.pixels()) {
                prop_assert!((a - b).abs() <= 1.0 / 255.0);
            }
        }
    }

    fn tree(classes: &[(&str, usize)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, n) in classes {
            let d = dir.path().join(name);
            fs::create_dir(&d).unwrap();
            for i in 0..*n {
                write_pgm(d.join(format!("{i:02}.pgm")), &GrayImage::from_fn(4, 4, |r, _| r as f64 / 4.0)).unwrap();
            }
        }
        dir
    }

    #[test]
    fn directory_labels_and_order() {
        let dir = tree(&[("b_second", 3), ("a_first", 3)]);
        fs::write(dir.path().join("a_first/readme.txt"), "notes").unwrap();
        let got = read_image_dir(dir.path(), 4, 4).unwrap();
        let labels: Vec<usize> = got.samples.iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(got.class_names, vec!["a_first", "b_second"]);
        assert_eq!(got.skipped, 1);
        assert_eq!(read_image_dir(dir.path(), 4, 4).unwrap(), got);
    }

    #[test]
    fn directory_errors() {
        let dir = tree(&[("a", 2), ("b", 0)]);
        let err = read_image_dir(dir.path(), 4, 4).unwrap_err();
        assert!(err.to_string().starts_with("class with no samples"), "{err}");
        let dir = tree(&[("a", 2)]);
        let err = read_image_dir(dir.path(), 5, 4).unwrap_err();
        assert!(err.to_string().contains("00.pgm"), "{err}");
    }
}
