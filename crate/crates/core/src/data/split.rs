use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::robust::fisher_yates_permutation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.70, val: 0.15, test: 0.15, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|f| !(*f > 0.0)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::domain("split fractions must be positive and sum to 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded partition of `0..n`; validation and test get `⌊f·n⌋` indices each and
/// the remainder goes to training.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    if n < 3 {
        return Err(Error::domain(format!("need at least 3 samples to split, got {n}")));
    }
    let n_val = ((spec.val * n as f64).floor() as usize).max(1);
    let n_test = ((spec.test * n as f64).floor() as usize).max(1);
    if n_val + n_test >= n {
        return Err(Error::domain(format!("{n} samples are too few for the requested split")));
    }
    let perm = fisher_yates_permutation(n, &mut rng_from_seed(spec.seed))?;
    let n_train = n - n_val - n_test;
    Ok(SplitIndices {
        train: perm[..n_train].to_vec(),
        val: perm[n_train..n_train + n_val].to_vec(),
        test: perm[n_train + n_val..].to_vec(),
    })
}

pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let idx = split_indices(dataset.n_samples(), spec)?;
    Ok((dataset.subset(&idx.train), dataset.subset(&idx.val), dataset.subset(&idx.test)))
}
