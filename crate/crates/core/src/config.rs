use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Largest last-stage filter count; codes must fit `2^L` histogram bins.
pub const MAX_HASH_BITS: usize = 16;

/// Network hyperparameters. Defaults are the 8x8 patch, 8 filters per
/// stage, 8x8 block with 0.5 overlap setup.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Number of KPCA stages, 1 to 3.
    pub stages: usize,
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub filters_per_stage: Vec<usize>,
    /// Shared by every stage.
    pub kernel: KernelSpec,
    pub block_rows: usize,
    pub block_cols: usize,
    pub overlap_ratio: f64,
    /// Patches retained per stage for the Gram matrix and projection basis.
    pub train_patch_budget: usize,
    pub seed: u64,
    pub remove_patch_mean: bool,
    /// Reuse the first stage's filters at every later stage.
    pub share_stage_filters: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            stages: 2,
            patch_rows: 8,
            patch_cols: 8,
            filters_per_stage: vec![8, 8],
            kernel: KernelSpec::default(),
            block_rows: 8,
            block_cols: 8,
            overlap_ratio: 0.5,
            train_patch_budget: 3000,
            seed: 0,
            remove_patch_mean: false,
            share_stage_filters: false,
        }
    }
}

impl NetConfig {
    pub fn patch_dim(&self) -> usize {
        self.patch_rows * self.patch_cols
    }

    pub fn last_stage_filters(&self) -> usize {
        *self.filters_per_stage.last().expect("validated config has stages")
    }

    /// Number of hashed groups: product of all but the last stage's filter
    /// counts (1 for a single stage).
    pub fn hash_groups(&self) -> usize {
        self.filters_per_stage[..self.stages - 1].iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(1..=3).contains(&self.stages) {
            return fail(format!("stages must be 1, 2 or 3, got {}", self.stages));
        }
        if self.filters_per_stage.len() != self.stages {
            return fail(format!(
                "filters lists {} stages but stages = {}",
                self.filters_per_stage.len(),
                self.stages
            ));
        }
        if self.patch_rows == 0 || self.patch_cols == 0 {
            return fail("patch size must be positive".into());
        }
        if self.block_rows == 0 || self.block_cols == 0 {
            return fail("block size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.overlap_ratio) {
            return fail(format!("overlap must lie in [0, 1), got {}", self.overlap_ratio));
        }
        if self.train_patch_budget == 0 {
            return fail("patch budget must be positive".into());
        }
        for (s, &l) in self.filters_per_stage.iter().enumerate() {
            if l == 0 {
                return fail(format!("stage {} has zero filters", s + 1));
            }
            if l > self.train_patch_budget {
                return fail(format!(
                    "stage {} asks for {l} filters but the patch budget is {}",
                    s + 1,
                    self.train_patch_budget
                ));
            }
        }
        if self.last_stage_filters() > MAX_HASH_BITS {
            return fail(format!(
                "bin count exceeds 2^{MAX_HASH_BITS} (last stage has {} filters)",
                self.last_stage_filters()
            ));
        }
        if self.share_stage_filters && self.filters_per_stage.iter().any(|&l| l != self.filters_per_stage[0]) {
            return fail("share_stage_filters requires the same filter count at every stage".into());
        }
        self.kernel.validate()
    }

    /// Checks that the pooling blocks fit an `rows x cols` input.
    pub fn validate_for_image(&self, rows: usize, cols: usize) -> Result<()> {
        if self.block_rows > rows || self.block_cols > cols {
            return Err(Error::Config(format!(
                "block {}x{} larger than image {rows}x{cols}",
                self.block_rows, self.block_cols
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        let c = NetConfig::default();
        c.validate().unwrap();
        assert_eq!(c.hash_groups(), 8);
        assert_eq!(c.patch_dim(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            NetConfig { stages: 4, filters_per_stage: vec![2; 4], ..Default::default() },
            NetConfig { filters_per_stage: vec![8], ..Default::default() },
            NetConfig { filters_per_stage: vec![8, 20], ..Default::default() },
            NetConfig { overlap_ratio: 1.0, ..Default::default() },
            NetConfig { train_patch_budget: 4, ..Default::default() },
            NetConfig { share_stage_filters: true, filters_per_stage: vec![8, 4], ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
        let err = NetConfig { filters_per_stage: vec![8, 20], ..Default::default() }
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("bin count exceeds 2^16"));
        assert!(NetConfig::default().validate_for_image(4, 28).is_err());
    }
}
