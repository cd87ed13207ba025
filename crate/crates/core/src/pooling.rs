//! Binary hashing and block-histogram pooling.
//!
//! The last stage's `L_S` maps of each group are binarized with a strict
//! Heaviside step (`H(0) = 0`) and packed into one code per pixel, with the
//! first map as the least significant bit. Each code image is cut into
//! (possibly overlapping) blocks and the per-block code histograms are
//! concatenated group-major, then block, then bin.
//!
//! A one-stage network hashes its own `L_1` maps as a single group.

use crate::config::{NetConfig, MAX_HASH_BITS};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::network::StageOutput;

#[inline]
pub fn heaviside(x: f64) -> u8 {
    u8::from(x > 0.0)
}

/// Per-pixel hash codes of one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedMap {
    rows: usize,
    cols: usize,
    bits: usize,
    codes: Vec<u32>,
}

impl HashedMap {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of maps hashed, i.e. `log2` of the bin count.
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    #[inline]
    pub fn code(&self, row: usize, col: usize) -> u32 {
        self.codes[row * self.cols + col]
    }
}

/// `code = sum_s 2^s * H(map_s)` over the maps in order (0-based `s`).
pub fn hash_maps(maps: &[GrayImage]) -> Result<HashedMap> {
    let first = maps.first().ok_or(Error::Config("no maps to hash".into()))?;
    if maps.len() > MAX_HASH_BITS {
        return Err(Error::Config(format!(
            "cannot hash {} maps; at most {MAX_HASH_BITS}",
            maps.len()
        )));
    }
    let (rows, cols) = first.shape();
    let mut codes = vec![0u32; rows * cols];
    for (bit, map) in maps.iter().enumerate() {
        if map.shape() != (rows, cols) {
            return Err(Error::ShapeMismatch {
                expected_rows: rows,
                expected_cols: cols,
                rows: map.rows(),
                cols: map.cols(),
                file: None,
            });
        }
        for (c, &v) in codes.iter_mut().zip(map.pixels()) {
            *c |= u32::from(heaviside(v)) << bit;
        }
    }
    Ok(HashedMap {
        rows,
        cols,
        bits: maps.len(),
        codes,
    })
}

/// Axis-aligned block, half-open on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub top: usize,
    pub left: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn area(&self) -> usize {
        self.rows * self.cols
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.top && row < self.top + self.rows && col >= self.left && col < self.left + self.cols
    }
}

fn block_starts(extent: usize, size: usize, overlap: f64) -> Vec<usize> {
    let stride = ((size as f64 * (1.0 - overlap)).round() as usize).max(1);
    let last = extent - size;
    let mut starts: Vec<usize> = (0..=last).step_by(stride).collect();
    if *starts.last().unwrap() != last {
        starts.push(last);
    }
    starts
}

/// Block layout: stride `max(1, round(b * (1 - overlap)))` per axis, plus
/// one block flush with the far edge when the stride does not land there.
/// Blocks are listed row-major by top-left corner.
pub fn partition_blocks(rows: usize, cols: usize, b1: usize, b2: usize, overlap: f64) -> Result<Vec<Block>> {
    if b1 == 0 || b2 == 0 || b1 > rows || b2 > cols {
        return Err(Error::Config(format!(
            "block {b1}x{b2} does not fit image {rows}x{cols}"
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Config(format!("overlap must lie in [0, 1), got {overlap}")));
    }
    let tops = block_starts(rows, b1, overlap);
    let lefts = block_starts(cols, b2, overlap);
    let mut blocks = Vec::with_capacity(tops.len() * lefts.len());
    for &top in &tops {
        for &left in &lefts {
            blocks.push(Block {
                top,
                left,
                rows: b1,
                cols: b2,
            });
        }
    }
    Ok(blocks)
}

/// Code counts inside `block`; `bins` must exceed every code present.
pub fn block_histogram(hashed: &HashedMap, block: &Block, bins: usize) -> Vec<u32> {
    let mut counts = vec![0u32; bins];
    for r in block.top..block.top + block.rows {
        let row = &hashed.codes[r * hashed.cols + block.left..r * hashed.cols + block.left + block.cols];
        for &code in row {
            counts[code as usize] += 1;
        }
    }
    counts
}

/// Pooled output: block histograms stored sparsely in the
/// group/block/bin layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    dim: usize,
    indices: Vec<u32>,
    counts: Vec<u32>,
}

impl FeatureVector {
    pub fn from_dense(values: &[u32]) -> Self {
        let mut fv = FeatureVector {
            dim: values.len(),
            indices: Vec::new(),
            counts: Vec::new(),
        };
        for (i, &v) in values.iter().enumerate() {
            if v != 0 {
                fv.indices.push(i as u32);
                fv.counts.push(v);
            }
        }
        fv
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Nonzero `(index, count)` pairs in ascending index order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.indices.iter().zip(&self.counts).map(|(&i, &c)| (i as usize, c))
    }

    pub fn to_dense(&self) -> Vec<u32> {
        let mut out = vec![0; self.dim];
        for (i, c) in self.nonzeros() {
            out[i] = c;
        }
        out
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Length of the pooled feature for an `rows x cols` input.
pub fn feature_len(config: &NetConfig, rows: usize, cols: usize) -> Result<usize> {
    let blocks = partition_blocks(rows, cols, config.block_rows, config.block_cols, config.overlap_ratio)?;
    Ok(config.hash_groups() * blocks.len() * (1usize << config.last_stage_filters()))
}

/// Hashes each group of last-stage maps and concatenates its block
/// histograms.
pub fn pool(stage_output: &StageOutput, config: &NetConfig) -> Result<FeatureVector> {
    let groups = config.hash_groups();
    let bits = config.last_stage_filters();
    if stage_output.maps.len() != groups * bits || stage_output.lineage.len() != stage_output.maps.len() {
        return Err(Error::Config(format!(
            "incomplete lineage grouping: {} maps for {groups} groups of {bits}",
            stage_output.maps.len()
        )));
    }
    let (rows, cols) = stage_output.maps[0].shape();
    let blocks = partition_blocks(rows, cols, config.block_rows, config.block_cols, config.overlap_ratio)?;
    let bins = 1usize << bits;
    let segment = blocks.len() * bins;

    let mut fv = FeatureVector {
        dim: groups * segment,
        indices: Vec::new(),
        counts: Vec::new(),
    };
    for (g, chunk) in stage_output.maps.chunks_exact(bits).enumerate() {
        let prefix = &stage_output.lineage[g * bits][..config.stages - 1];
        if stage_output.lineage[g * bits..(g + 1) * bits]
            .iter()
            .enumerate()
            .any(|(s, tuple)| &tuple[..config.stages - 1] != prefix || tuple[config.stages - 1] != s)
        {
            return Err(Error::Config(format!("lineage group {g} is out of order")));
        }
        let hashed = hash_maps(chunk)?;
        for (b, block) in blocks.iter().enumerate() {
            let base = g * segment + b * bins;
            for (bin, count) in block_histogram(&hashed, block, bins).into_iter().enumerate() {
                if count != 0 {
                    fv.indices.push((base + bin) as u32);
                    fv.counts.push(count);
                }
            }
        }
    }
    Ok(fv)
}
