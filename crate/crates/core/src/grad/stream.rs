use crate::data::ColMatrix;
use crate::error::{Error, Result};
use crate::losses::{softmax_xent_into, Loss};
use crate::rng::Rng;
use crate::robust::{EstimatorSpec, Workspace};

/// Per-sample partial derivatives `ℓ'(Xᵢᵀθ, Yᵢ)·Xᵢʲ` computed from cached scores.
///
/// The stream owns the scores `I = Xθ` (an `n×k` row-major matrix for the
/// multiclass loss, where `θ` is stored as `θ[j·k + c]`). Callers keep the
/// scores in sync by reporting every coordinate move through [`DerivStream::apply`].
#[derive(Debug, Clone)]
pub struct DerivStream<'a> {
    x: &'a ColMatrix,
    y: &'a [f64],
    loss: Loss,
    k: usize,
    inner: Vec<f64>,
    scratch: Vec<f64>,
    residuals: Vec<f64>,
}

impl<'a> DerivStream<'a> {
    pub fn new(x: &'a ColMatrix, y: &'a [f64], loss: Loss, theta: &[f64]) -> Result<Self> {
        let k = loss.n_outputs();
        if y.len() != x.n_rows() {
            return Err(Error::domain(format!("{} labels for {} rows", y.len(), x.n_rows())));
        }
        if x.n_rows() == 0 {
            return Err(Error::domain("empty dataset"));
        }
        if theta.len() != x.n_cols() * k {
            return Err(Error::domain(format!(
                "parameter has length {}, expected {}",
                theta.len(),
                x.n_cols() * k
            )));
        }
        for &yi in y {
            loss.check_label(yi)?;
        }
        let mut s = DerivStream {
            x,
            y,
            loss,
            k,
            inner: Vec::new(),
            scratch: vec![0.0; x.n_rows()],
            residuals: Vec::new(),
        };
        s.resync(theta);
        Ok(s)
    }

    pub fn n_samples(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    /// Number of parameters per feature (`k` for the multiclass loss, else 1).
    pub fn block_size(&self) -> usize {
        self.k
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn inner(&self) -> &[f64] {
        &self.inner
    }

    /// Recomputes the scores from scratch.
    pub fn resync(&mut self, theta: &[f64]) {
        self.inner = scores(self.x, theta, self.k);
    }

    /// Largest absolute gap between the cached and the exact scores.
    pub fn drift(&self, theta: &[f64]) -> f64 {
        scores(self.x, theta, self.k)
            .iter()
            .zip(&self.inner)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Records `θ_{j·k + c} += delta[c]`.
    pub fn apply(&mut self, j: usize, delta: &[f64]) {
        let col = self.x.col(j);
        if self.k == 1 {
            let d = delta[0];
            for (s, &x) in self.inner.iter_mut().zip(col) {
                *s += x * d;
            }
        } else {
            for (row, &x) in self.inner.chunks_exact_mut(self.k).zip(col) {
                for (s, &d) in row.iter_mut().zip(delta) {
                    *s += x * d;
                }
            }
        }
    }

    /// Mean training loss at the cached scores.
    pub fn objective(&self) -> f64 {
        mean_loss(self.loss, &self.inner, self.y)
    }

    /// Fills and returns the per-sample derivatives along feature `j` (class `c`
    /// for the multiclass loss; `c` is ignored otherwise).
    pub fn samples(&mut self, j: usize, c: usize) -> &mut [f64] {
        if self.k == 1 {
            self.fill_scalar(j);
        } else {
            self.refresh_residuals();
            self.fill_class(j, c);
        }
        &mut self.scratch
    }

    fn fill_scalar(&mut self, j: usize) {
        let col = self.x.col(j);
        let loss = self.loss;
        for ((g, &x), (&z, &y)) in self.scratch.iter_mut().zip(col).zip(self.inner.iter().zip(self.y)) {
            *g = loss.derivative_unchecked(z, y) * x;
        }
    }

    fn refresh_residuals(&mut self) {
        let k = self.k;
        self.residuals.resize(self.inner.len(), 0.0);
        for ((out, s), &y) in self.residuals.chunks_exact_mut(k).zip(self.inner.chunks_exact(k)).zip(self.y) {
            softmax_xent_into(s, y as usize, out);
        }
    }

    fn fill_class(&mut self, j: usize, c: usize) {
        let col = self.x.col(j);
        for ((g, &x), r) in self.scratch.iter_mut().zip(col).zip(self.residuals.chunks_exact(self.k)) {
            *g = r[c] * x;
        }
    }

    /// Robust estimate of `∂R/∂θ_j` (written to `out[0]`) or, for the multiclass
    /// loss, of the `k` partial derivatives of feature `j` (written to `out[..k]`,
    /// each class estimated independently).
    pub fn partial_derivative_into(
        &mut self,
        j: usize,
        spec: &EstimatorSpec,
        ws: &mut Workspace,
        rng: &mut Rng,
        out: &mut [f64],
    ) -> Result<()> {
        spec.validate(self.n_samples())?;
        if j >= self.n_features() || out.len() < self.k {
            return Err(Error::domain(format!("coordinate {j} or output buffer out of range")));
        }
        self.partial_derivative_unchecked(j, spec, ws, rng, out);
        Ok(())
    }

    pub(crate) fn partial_derivative_unchecked(
        &mut self,
        j: usize,
        spec: &EstimatorSpec,
        ws: &mut Workspace,
        rng: &mut Rng,
        out: &mut [f64],
    ) {
        if self.k == 1 {
            self.fill_scalar(j);
            out[0] = spec.estimate_unchecked(&mut self.scratch, ws, rng);
        } else {
            self.refresh_residuals();
            for (c, o) in out.iter_mut().enumerate().take(self.k) {
                self.fill_class(j, c);
                *o = spec.estimate_unchecked(&mut self.scratch, ws, rng);
            }
        }
    }

    /// Scalar-loss convenience wrapper around [`DerivStream::partial_derivative_into`].
    pub fn partial_derivative(&mut self, j: usize, spec: &EstimatorSpec, rng: &mut Rng) -> Result<f64> {
        if self.k != 1 {
            return Err(Error::domain("use partial_derivative_into for the multiclass loss"));
        }
        let mut out = [0.0];
        self.partial_derivative_into(j, spec, &mut Workspace::new(), rng, &mut out)?;
        Ok(out[0])
    }

    /// Per-sample derivatives of the loss in the scores, `n×k` row-major.
    pub(crate) fn score_derivatives(&mut self) -> Vec<f64> {
        if self.k == 1 {
            self.inner.iter().zip(self.y).map(|(&z, &y)| self.loss.derivative_unchecked(z, y)).collect()
        } else {
            self.refresh_residuals();
            self.residuals.clone()
        }
    }
}

/// `Xθ`, or the `n×k` row-major score matrix when `k > 1`.
pub(crate) fn scores(x: &ColMatrix, theta: &[f64], k: usize) -> Vec<f64> {
    if k == 1 {
        return x.matvec(theta);
    }
    let n = x.n_rows();
    let mut out = vec![0.0; n * k];
    for j in 0..x.n_cols() {
        let t = &theta[j * k..(j + 1) * k];
        if t.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (row, &xv) in out.chunks_exact_mut(k).zip(x.col(j)) {
            for (s, &tv) in row.iter_mut().zip(t) {
                *s += xv * tv;
            }
        }
    }
    out
}

/// Mean loss over samples given their scores.
pub fn mean_loss(loss: Loss, scores: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    match loss {
        Loss::MulticlassLogistic { k } => {
            let mut grad = vec![0.0; k];
            scores.chunks_exact(k).zip(y).map(|(s, &yi)| softmax_xent_into(s, yi as usize, &mut grad)).sum::<f64>()
                / n
        }
        _ => scores.iter().zip(y).map(|(&z, &yi)| loss.value_unchecked(z, yi)).sum::<f64>() / n,
    }
}

/// Empirical risk of `theta` on `(x, y)`.
pub fn empirical_risk(x: &ColMatrix, y: &[f64], loss: Loss, theta: &[f64]) -> Result<f64> {
    let k = loss.n_outputs();
    if theta.len() != x.n_cols() * k || y.len() != x.n_rows() {
        return Err(Error::domain("dimension mismatch in empirical_risk"));
    }
    for &yi in y {
        loss.check_label(yi)?;
    }
    Ok(mean_loss(loss, &scores(x, theta, k), y))
}
