use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sim::{student_t, STUDENT_DF};
use crate::data::{ColumnKind, Dataset, Task};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};
use crate::robust::fisher_yates_permutation;

/// How a corrupted row's continuous part is replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// One of the three below, chosen uniformly per row.
    #[default]
    Mixed,
    /// `r_j + 5σ̂_j·ν` with `r_j` a random entry of column `j` and `ν ~ t(2.1)`.
    HeavyTail,
    /// `μ̂_j + 5σ̂_j·u_j + z` along a unit direction `u` shared by all rows.
    Direction,
    /// `μ̂ + 5σ̂ ⊗ w` with `w` uniform on the unit sphere.
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub mechanism: Mechanism,
}

impl CorruptionSpec {
    pub fn new(rate: f64, seed: u64) -> Self {
        CorruptionSpec { rate, seed, mechanism: Mechanism::Mixed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted {
    pub dataset: Dataset,
    /// Sorted indices of the replaced rows.
    pub outliers: Vec<usize>,
}

fn unit(d: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Replaces exactly `⌊rate·n⌋` uniformly chosen rows with uninformative values.
/// Column statistics are taken from the uncorrupted data; regression labels are
/// treated as one more continuous column and class labels as a categorical one.
pub fn corrupt_dataset(dataset: &Dataset, spec: &CorruptionSpec) -> Result<Corrupted> {
    if !(0.0..0.5).contains(&spec.rate) {
        return Err(Error::domain(format!("corruption rate must be in [0, 0.5), got {}", spec.rate)));
    }
    let n = dataset.n_samples();
    let n_out = (spec.rate * n as f64).floor() as usize;
    if n_out == 0 {
        return Ok(Corrupted { dataset: dataset.clone(), outliers: Vec::new() });
    }
    let mut rng = rng_from_seed(spec.seed);
    let mut outliers = fisher_yates_permutation(n, &mut rng)?[..n_out].to_vec();
    outliers.sort_unstable();

    // continuous targets: feature columns, then the label for regression
    let mut continuous: Vec<Option<usize>> = Vec::new();
    let mut categorical = Vec::new();
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (j, c) in dataset.columns.iter().enumerate() {
        match &c.kind {
            ColumnKind::Continuous => continuous.push(Some(j)),
            ColumnKind::Categorical { modalities } => categorical.push((j, modalities.len())),
            ColumnKind::OneHot { source, .. } => groups.entry(source.as_str()).or_default().push(j),
        }
    }
    if dataset.task == Task::Regression {
        continuous.push(None);
    }
    let source = |c: Option<usize>| -> &[f64] {
        match c {
            Some(j) => dataset.features.col(j),
            None => &dataset.labels,
        }
    };
    let stats: Vec<(f64, f64)> = continuous
        .iter()
        .map(|&c| {
            let v = source(c);
            let m = v.iter().sum::<f64>() / n as f64;
            let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
            (m, var.sqrt())
        })
        .collect();
    let direction = unit(continuous.len().max(1), &mut rng);

    let mut out = dataset.clone();
    let mut row = vec![0.0; continuous.len()];
    for &i in &outliers {
        let mechanism = match spec.mechanism {
            Mechanism::Mixed => [Mechanism::HeavyTail, Mechanism::Direction, Mechanism::Sphere][rng.random_range(0..3)],
            m => m,
        };
        match mechanism {
            Mechanism::HeavyTail => {
                for ((r, &c), &(_, s)) in row.iter_mut().zip(&continuous).zip(&stats) {
                    let pick = source(c)[rng.random_range(0..n)];
                    *r = pick + 5.0 * s * student_t(STUDENT_DF, &mut rng);
                }
            }
            Mechanism::Direction => {
                for ((r, &(m, s)), &u) in row.iter_mut().zip(&stats).zip(&direction) {
                    let z: f64 = rng.sample(StandardNormal);
                    *r = m + 5.0 * s * u + z;
                }
            }
            Mechanism::Sphere | Mechanism::Mixed => {
                let w = unit(continuous.len().max(1), &mut rng);
                for ((r, &(m, s)), &wj) in row.iter_mut().zip(&stats).zip(&w) {
                    *r = m + 5.0 * s * wj;
                }
            }
        }
        for (&c, &v) in continuous.iter().zip(&row) {
            match c {
                Some(j) => out.features.set(i, j, v),
                None => out.labels[i] = v,
            }
        }
        for &(j, m) in &categorical {
            out.features.set(i, j, rng.random_range(0..m) as f64);
        }
        for cols in groups.values() {
            let hot = rng.random_range(0..cols.len());
            for (q, &j) in cols.iter().enumerate() {
                out.features.set(i, j, if q == hot { 1.0 } else { 0.0 });
            }
        }
        match dataset.task {
            Task::Regression => {}
            Task::Binary => out.labels[i] = if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            Task::Multiclass { k } => out.labels[i] = rng.random_range(0..k) as f64,
        }
    }
    out.validate()?;
    Ok(Corrupted { dataset: out, outliers })
}
