//! Median-of-means.

use super::select::{median_unchecked, shuffle};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A random partition of `0..n` into `K` blocks of nearly equal size.
///
/// The first `n mod K` blocks hold `⌈n/K⌉` indices and the rest `⌊n/K⌋`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    pub permutation: Vec<usize>,
    pub boundaries: Vec<usize>,
}

impl BlockPartition {
    pub fn new(permutation: Vec<usize>, blocks: usize) -> Result<Self> {
        let n = permutation.len();
        check_blocks(n, blocks)?;
        Ok(BlockPartition { boundaries: block_boundaries(n, blocks), permutation })
    }

    pub fn random(n: usize, blocks: usize, rng: &mut Rng) -> Result<Self> {
        check_blocks(n, blocks)?;
        let mut permutation: Vec<usize> = (0..n).collect();
        shuffle(&mut permutation, rng);
        Self::new(permutation, blocks)
    }

    pub fn n_blocks(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.boundaries.windows(2).map(|w| &self.permutation[w[0]..w[1]])
    }
}

pub(crate) fn check_blocks(n: usize, blocks: usize) -> Result<()> {
    if blocks == 0 || blocks > n {
        return Err(Error::domain(format!("block count must be in [1, {n}], got {blocks}")));
    }
    Ok(())
}

pub(crate) fn block_boundaries(n: usize, blocks: usize) -> Vec<usize> {
    let base = n / blocks;
    let extra = n % blocks;
    let mut cuts = Vec::with_capacity(blocks + 1);
    let mut pos = 0;
    cuts.push(0);
    for b in 0..blocks {
        pos += base + usize::from(b < extra);
        cuts.push(pos);
    }
    cuts
}

/// Median-of-means over a fresh random partition into `blocks` blocks.
pub fn estimate_mom(values: &[f64], blocks: usize, rng: &mut Rng) -> Result<f64> {
    check_blocks(values.len(), blocks)?;
    let mut perm: Vec<usize> = (0..values.len()).collect();
    shuffle(&mut perm, rng);
    let mut means = Vec::with_capacity(blocks);
    Ok(mom_with_permutation(values, &perm, blocks, &mut means))
}

/// Median-of-means over the partition induced by a given permutation (no
/// randomness). `means` is scratch space.
pub fn mom_with_permutation(values: &[f64], perm: &[usize], blocks: usize, means: &mut Vec<f64>) -> f64 {
    debug_assert_eq!(values.len(), perm.len());
    let n = values.len();
    let base = n / blocks;
    let extra = n % blocks;
    means.clear();
    let mut start = 0;
    for b in 0..blocks {
        let len = base + usize::from(b < extra);
        let sum: f64 = perm[start..start + len].iter().map(|&i| values[i]).sum();
        means.push(sum / len as f64);
        start += len;
    }
    median_unchecked(means)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn partition_sizes_differ_by_at_most_one() {
        for n in 1..40 {
            for k in 1..=n {
                let p = BlockPartition::random(n, k, &mut rng_from_seed(n as u64)).unwrap();
                let sizes: Vec<usize> = p.blocks().map(<[usize]>::len).collect();
                assert_eq!(sizes.len(), k);
                assert_eq!(sizes.iter().sum::<usize>(), n);
                let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
                assert!(hi - lo <= 1);
                assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
                let mut seen: Vec<usize> = p.blocks().flatten().copied().collect();
                seen.sort();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn limit_cases() {
        let mut rng = rng_from_seed(3);
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(estimate_mom(&v, 1, &mut rng).unwrap(), 3.5);
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 1000.0];
        assert_eq!(estimate_mom(&w, 6, &mut rng).unwrap(), 3.5);
        assert!(estimate_mom(&v, 7, &mut rng).is_err());
        assert!(estimate_mom(&v, 0, &mut rng).is_err());
    }

    #[test]
    fn pinned_permutation_hand_trace() {
        // blocks {1,2},{3,4},{5,6} -> means {1.5,3.5,5.5} -> 3.5
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let perm: Vec<usize> = (0..6).collect();
        assert_eq!(mom_with_permutation(&v, &perm, 3, &mut Vec::new()), 3.5);
        // blocks {1,2,3},{4,5},{6,1000} with n=7, K=3 -> means {2, 4.5, 503} -> 4.5
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 1000.0];
        let perm: Vec<usize> = (0..7).collect();
        assert_eq!(mom_with_permutation(&v, &perm, 3, &mut Vec::new()), 4.5);
    }
}
