//! Versioned binary model files.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! "KPCN"  u16 version
//! config:     u8 stages, u32 patch_rows, u32 patch_cols,
//!             u32 filters[stages], kernel, u32 block_rows, u32 block_cols,
//!             f64 overlap, u64 patch_budget, u64 seed,
//!             u8 remove_patch_mean, u8 share_stage_filters
//! geometry:   u32 image_rows, u32 image_cols, u32 class_count
//! stages:     u32 count, then per stage
//!             kernel, u32 patch_dim, u32 M, f64 patches[M * patch_dim] (column-major),
//!             u32 L, f64 eigenvalues[L], f64 alphas[L * M] (row-major),
//!             f64 col_means[M], f64 total_mean
//! classifier: u32 c, u64 D, f64 weights[c * D] (row-major), f64 bias[c],
//!             f64 feature_scale[D]
//! SHA-256 of every preceding byte (32 bytes)
//! ```
//!
//! where `kernel` is `u8 kind code, u32 n, f64 params[n]`.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::classifier::LinearModel;
use crate::config::NetConfig;
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::kpca::KpcaBasis;
use crate::matrix::Matrix;
use crate::network::Model;
use crate::patches::PatchMatrix;

pub const MAGIC: &[u8; 4] = b"KPCN";
pub const VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        self.0.reserve(vs.len() * 8);
        vs.iter().for_each(|&v| self.f64(v));
    }
    fn kernel(&mut self, k: &KernelSpec) {
        self.u8(k.kind().code());
        let p = k.params();
        self.u32(p.len());
        self.f64s(&p);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated model file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("array length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Format(format!("invalid flag byte {v}"))),
        }
    }
    fn kernel(&mut self) -> Result<KernelSpec> {
        let code = self.u8()?;
        let kind = KernelKind::from_code(code).ok_or_else(|| Error::Format(format!("unknown kernel code {code}")))?;
        let n = self.u32()?;
        let p = self.f64s(n)?;
        KernelSpec::from_params(kind, &p)
    }
}

/// Serializes a model, checksum included.
pub fn encode_model(model: &Model) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(MAGIC);
    w.u16(VERSION);

    let c = &model.config;
    w.u8(c.stages as u8);
    w.u32(c.patch_rows);
    w.u32(c.patch_cols);
    c.filters_per_stage.iter().for_each(|&l| w.u32(l));
    w.kernel(&c.kernel);
    w.u32(c.block_rows);
    w.u32(c.block_cols);
    w.f64(c.overlap_ratio);
    w.u64(c.train_patch_budget as u64);
    w.u64(c.seed);
    w.u8(c.remove_patch_mean as u8);
    w.u8(c.share_stage_filters as u8);

    w.u32(model.image_rows);
    w.u32(model.image_cols);
    w.u32(model.class_count);

    w.u32(model.stage_bases.len());
    for b in &model.stage_bases {
        w.kernel(b.kernel());
        w.u32(b.patch_dim());
        w.u32(b.basis_patches().count());
        w.f64s(b.basis_patches().data());
        w.u32(b.num_components());
        w.f64s(b.eigenvalues());
        w.f64s(b.alphas().data());
        w.f64s(b.basis_col_means());
        w.f64(b.basis_total_mean());
    }

    let clf = &model.classifier;
    w.u32(clf.class_count());
    w.u64(clf.dim() as u64);
    w.f64s(clf.weights.data());
    w.f64s(&clf.bias);
    w.f64s(&clf.feature_scale);

    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

/// Parses and validates a model; rejects bad checksums and other versions.
pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < MAGIC.len() + 2 + DIGEST_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checksum);
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }

    let stages = r.u8()? as usize;
    let patch_rows = r.u32()?;
    let patch_cols = r.u32()?;
    let filters_per_stage = (0..stages).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let config = NetConfig {
        stages,
        patch_rows,
        patch_cols,
        filters_per_stage,
        kernel: r.kernel()?,
        block_rows: r.u32()?,
        block_cols: r.u32()?,
        overlap_ratio: r.f64()?,
        train_patch_budget: r.u64()? as usize,
        seed: r.u64()?,
        remove_patch_mean: r.flag()?,
        share_stage_filters: r.flag()?,
    };

    let image_rows = r.u32()?;
    let image_cols = r.u32()?;
    let class_count = r.u32()?;

    let n_bases = r.u32()?;
    let mut stage_bases = Vec::with_capacity(n_bases.min(3));
    for _ in 0..n_bases {
        let kernel = r.kernel()?;
        let d = r.u32()?;
        let m = r.u32()?;
        let patches = PatchMatrix::new(d, r.f64s(d.saturating_mul(m))?)?;
        let l = r.u32()?;
        let eigenvalues = r.f64s(l)?;
        let alphas = Matrix::from_vec(l, m, r.f64s(l.saturating_mul(m))?);
        let col_means = r.f64s(m)?;
        let total_mean = r.f64()?;
        stage_bases.push(KpcaBasis::from_parts(kernel, patches, alphas, eigenvalues, col_means, total_mean)?);
    }

    let c = r.u32()?;
    let d = r.u64()? as usize;
    let weights = Matrix::from_vec(c, d, r.f64s(c.saturating_mul(d))?);
    let bias = r.f64s(c)?;
    let feature_scale = r.f64s(d)?;
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes in model file".into()));
    }
    let model = Model {
        config,
        image_rows,
        image_cols,
        stage_bases,
        classifier: LinearModel {
            weights,
            bias,
            feature_scale,
        },
        class_count,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &Model) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
