use serde::{Deserialize, Serialize};

use crate::data::{ColMatrix, Task};
use crate::error::{Error, Result};
use crate::grad::scores;
use crate::losses::Loss;

/// A fitted linear model. `theta` holds `n_features` blocks of `k` weights
/// (`k = loss.n_outputs()`), followed by one intercept block if `fit_intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub loss: Loss,
    pub n_features: usize,
    pub fit_intercept: bool,
    pub theta: Vec<f64>,
    /// Feature names in training order; used to check prediction inputs.
    #[serde(default)]
    pub feature_names: Vec<String>,
    /// Class names for classification tasks.
    #[serde(default)]
    pub classes: Vec<String>,
}

impl LinearModel {
    pub fn coefficients(&self) -> &[f64] {
        &self.theta[..self.n_features * self.loss.n_outputs()]
    }

    pub fn intercept(&self) -> Option<&[f64]> {
        self.fit_intercept.then(|| &self.theta[self.n_features * self.loss.n_outputs()..])
    }

    /// Linear scores (`n×k` row-major for the multiclass loss).
    pub fn scores(&self, x: &ColMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::domain(format!("model expects {} features, got {}", self.n_features, x.n_cols())));
        }
        let k = self.loss.n_outputs();
        let mut s = scores(x, self.coefficients(), k);
        if let Some(b) = self.intercept() {
            for row in s.chunks_exact_mut(k) {
                for (v, bv) in row.iter_mut().zip(b) {
                    *v += bv;
                }
            }
        }
        Ok(s)
    }

    /// Point predictions: the score for regression, ±1 for binary losses and the
    /// argmax class index for the multiclass loss.
    pub fn predict(&self, x: &ColMatrix) -> Result<Vec<f64>> {
        let s = self.scores(x)?;
        Ok(match self.loss {
            Loss::Logistic => s.iter().map(|&z| if z >= 0.0 { 1.0 } else { -1.0 }).collect(),
            Loss::MulticlassLogistic { k } => s
                .chunks_exact(k)
                .map(|row| {
                    let mut best = 0;
                    for (c, &v) in row.iter().enumerate() {
                        if v > row[best] {
                            best = c;
                        }
                    }
                    best as f64
                })
                .collect(),
            _ => s,
        })
    }

    pub fn task(&self) -> Task {
        match self.loss {
            Loss::Logistic => Task::Binary,
            Loss::MulticlassLogistic { k } => Task::Multiclass { k },
            _ => Task::Regression,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictions() {
        let x = ColMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let m = LinearModel {
            loss: Loss::Square,
            n_features: 2,
            fit_intercept: true,
            theta: vec![2.0, -1.0, 0.5],
            feature_names: vec![],
            classes: vec![],
        };
        assert_eq!(m.predict(&x).unwrap(), vec![2.5, -0.5]);
        let m = LinearModel { loss: Loss::Logistic, ..m };
        assert_eq!(m.predict(&x).unwrap(), vec![1.0, -1.0]);
        let m = LinearModel {
            loss: Loss::MulticlassLogistic { k: 2 },
            n_features: 2,
            fit_intercept: false,
            theta: vec![0.0, 1.0, 1.0, 0.0],
            feature_names: vec![],
            classes: vec![],
        };
        assert_eq!(m.predict(&x).unwrap(), vec![1.0, 0.0]);
        assert!(m.predict(&ColMatrix::zeros(1, 3)).is_err());
    }
}
