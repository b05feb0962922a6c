use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{ColMatrix, Dataset};
use crate::error::{Error, Result};
use crate::rng::{substream, Rng};
use crate::robust::fisher_yates_permutation;

pub const STUDENT_DF: f64 = 2.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// Gaussian noise.
    A,
    /// Student noise.
    B,
    /// Student noise; outliers at the constant point `λ_max·1` with label `2·y_max`.
    C,
    /// As `C` with labels flipped with probability 1/2.
    D,
    /// Student noise; outliers `10·λ_max·v + Z` along one random direction with
    /// Bernoulli(1/2) labels.
    E,
    /// Student noise; outliers `10·λ_max·V` with `V` uniform on the sphere and
    /// labels `y_max·(ε + U)`.
    F,
}

impl Setting {
    pub fn has_outliers(&self) -> bool {
        !matches!(self, Setting::A | Setting::B)
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Setting::A),
            "b" => Ok(Setting::B),
            "c" => Ok(Setting::C),
            "d" => Ok(Setting::D),
            "e" => Ok(Setting::E),
            "f" => Ok(Setting::F),
            _ => Err(Error::config(format!("unknown setting '{s}', expected one of a..f"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    Gaussian { sigma: f64 },
    StudentT { nu: f64, scale: f64 },
}

impl Noise {
    pub fn variance(&self) -> Option<f64> {
        match *self {
            Noise::Gaussian { sigma } => Some(sigma * sigma),
            Noise::StudentT { nu, scale } => (nu > 2.0).then(|| scale * scale * nu / (nu - 2.0)),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            Noise::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            Noise::StudentT { nu, scale } => scale * student_t(nu, rng),
        }
    }
}

/// `Z/√(χ²_ν/ν)`.
pub fn student_t(nu: f64, rng: &mut Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let chi = ChiSquared::new(nu).map(|c| c.sample(rng)).unwrap_or(f64::NAN);
    z / (chi / nu).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub setting: Setting,
    pub n: usize,
    pub d: usize,
    /// Covariance of the inlier features, row-major; diagonal with entries
    /// geometrically spaced in `[1, 10]` when absent.
    pub sigma: Option<Vec<Vec<f64>>>,
    /// Defaults to `(1, −1, 1, …)/√d`.
    pub theta_star: Option<Vec<f64>>,
    /// Defaults to standard Gaussian noise in setting `A` and `t(2.1)` otherwise.
    pub noise: Option<Noise>,
    /// Fraction of outliers for settings `C`–`F`.
    #[serde(default = "default_corruption_rate")]
    pub corruption_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_corruption_rate() -> f64 {
    0.01
}

impl SimSpec {
    pub fn new(setting: Setting, n: usize, d: usize, seed: u64) -> Self {
        SimSpec { setting, n, d, sigma: None, theta_star: None, noise: None, corruption_rate: default_corruption_rate(), seed }
    }

    pub fn sigma(&self) -> Vec<Vec<f64>> {
        self.sigma.clone().unwrap_or_else(|| default_sigma(self.d))
    }

    pub fn theta_star(&self) -> Vec<f64> {
        self.theta_star.clone().unwrap_or_else(|| default_theta_star(self.d))
    }

    pub fn noise(&self) -> Noise {
        self.noise.unwrap_or(match self.setting {
            Setting::A => Noise::Gaussian { sigma: 1.0 },
            _ => Noise::StudentT { nu: STUDENT_DF, scale: 1.0 },
        })
    }
}

pub fn default_sigma(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            let mut row = vec![0.0; d];
            row[i] = if d == 1 { 1.0 } else { 10f64.powf(i as f64 / (d - 1) as f64) };
            row
        })
        .collect()
}

pub fn default_theta_star(d: usize) -> Vec<f64> {
    let s = 1.0 / (d as f64).sqrt();
    (0..d).map(|i| if i % 2 == 0 { s } else { -s }).collect()
}

/// Population quantities of a simulated least-squares problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInfo {
    pub setting: Setting,
    pub sigma: Vec<Vec<f64>>,
    pub theta_star: Vec<f64>,
    /// `None` when the noise has infinite variance.
    pub noise_variance: Option<f64>,
    pub outliers: Vec<usize>,
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::domain("covariance must be square"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub(crate) fn cholesky(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = to_matrix(rows)?;
    let scale = m.amax().max(1.0);
    if (&m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::domain("covariance is not symmetric"));
    }
    m.cholesky().map(|c| c.l()).ok_or_else(|| Error::domain("covariance is not positive definite"))
}

pub fn largest_eigenvalue(rows: &[Vec<f64>]) -> Result<f64> {
    let m = to_matrix(rows)?;
    Ok(m.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn unit_vector(d: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Draws a dataset for `spec`. Features, noise and outliers use separate RNG
/// substreams, so settings sharing a seed share their inlier features.
pub fn simulate(spec: &SimSpec) -> Result<(Dataset, OracleInfo)> {
    let (n, d) = (spec.n, spec.d);
    if n == 0 || d == 0 {
        return Err(Error::domain("simulation needs n >= 1 and d >= 1"));
    }
    if !(0.0..0.5).contains(&spec.corruption_rate) {
        return Err(Error::domain(format!("corruption rate must be in [0, 0.5), got {}", spec.corruption_rate)));
    }
    let sigma = spec.sigma();
    let theta_star = spec.theta_star();
    let noise = spec.noise();
    if sigma.len() != d || theta_star.len() != d {
        return Err(Error::domain("covariance and theta_star must match d"));
    }
    if spec.setting != Setting::A && !matches!(noise, Noise::StudentT { .. }) {
        return Err(Error::domain("settings b-f use Student noise"));
    }
    match noise {
        Noise::Gaussian { sigma } if !(sigma >= 0.0) => return Err(Error::domain("noise sigma must be >= 0")),
        Noise::StudentT { nu, scale } if !(nu > 0.0 && scale >= 0.0) => {
            return Err(Error::domain("Student noise needs nu > 0 and scale >= 0"))
        }
        _ => {}
    }
    let l = cholesky(&sigma)?;

    let mut feat_rng = substream(spec.seed, 0);
    let mut noise_rng = substream(spec.seed, 1);
    let mut out_rng = substream(spec.seed, 2);

    let mut x = ColMatrix::zeros(n, d);
    let mut y = vec![0.0; n];
    for (i, yi) in y.iter_mut().enumerate() {
        let z = DVector::from_fn(d, |_, _| feat_rng.sample::<f64, _>(StandardNormal));
        let row = &l * z;
        let mut dot = 0.0;
        for j in 0..d {
            x.set(i, j, row[j]);
            dot += row[j] * theta_star[j];
        }
        *yi = dot + noise.sample(&mut noise_rng);
    }

    let mut outliers = Vec::new();
    if spec.setting.has_outliers() {
        let n_out = (spec.corruption_rate * n as f64).floor() as usize;
        let perm = fisher_yates_permutation(n, &mut out_rng)?;
        outliers = perm[..n_out].to_vec();
        outliers.sort_unstable();
        let mut is_out = vec![false; n];
        for &i in &outliers {
            is_out[i] = true;
        }
        let y_max = (0..n).filter(|&i| !is_out[i]).fold(0.0, |m: f64, i| m.max(y[i].abs()));
        let lambda = largest_eigenvalue(&sigma)?;
        let direction = unit_vector(d, &mut out_rng);
        for &i in &outliers {
            match spec.setting {
                Setting::C | Setting::D => {
                    for j in 0..d {
                        x.set(i, j, lambda);
                    }
                    y[i] = 2.0 * y_max;
                    if spec.setting == Setting::D && out_rng.random_bool(0.5) {
                        y[i] = -y[i];
                    }
                }
                Setting::E => {
                    for (j, &v) in direction.iter().enumerate() {
                        let z: f64 = out_rng.sample(StandardNormal);
                        x.set(i, j, 10.0 * lambda * v + z);
                    }
                    y[i] = if out_rng.random_bool(0.5) { 1.0 } else { 0.0 };
                }
                Setting::F => {
                    let v = unit_vector(d, &mut out_rng);
                    for (j, &vj) in v.iter().enumerate() {
                        x.set(i, j, 10.0 * lambda * vj);
                    }
                    let sign = if out_rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    y[i] = y_max * (sign + out_rng.random_range(-0.2..=0.2));
                }
                Setting::A | Setting::B => unreachable!(),
            }
        }
    }
    let dataset = Dataset::regression(x, y)?;
    let info = OracleInfo { setting: spec.setting, sigma, theta_star, noise_variance: noise.variance(), outliers };
    Ok((dataset, info))
}

/// `½(θ − θ*)ᵀΣ(θ − θ*)`, the excess of the population least-squares risk.
pub fn oracle_excess_risk(info: &OracleInfo, theta: &[f64]) -> Result<f64> {
    let d = info.theta_star.len();
    if theta.len() != d {
        return Err(Error::domain(format!("theta has length {}, expected {d}", theta.len())));
    }
    let e: Vec<f64> = theta.iter().zip(&info.theta_star).map(|(a, b)| a - b).collect();
    let mut q = 0.0;
    for (i, row) in info.sigma.iter().enumerate() {
        q += e[i] * row.iter().zip(&e).map(|(s, v)| s * v).sum::<f64>();
    }
    Ok((0.5 * q).max(0.0))
}
