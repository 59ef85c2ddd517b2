use super::Real;
use crate::error::{Error, Result};

pub const DEFAULT_MOMENTUM: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchNormMode {
    Train,
    Eval,
}

/// Per-feature batch normalization parameters and running statistics.
///
/// Inputs are flat slices whose innermost axis is the feature axis, so the
/// same state serves `[batch, features]` matrices and NHWC tensors (where
/// statistics are pooled over batch and space).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T = f32> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: f64,
    pub epsilon: f64,
}

/// Values saved by a train-mode forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T = f32> {
    xhat: Vec<T>,
    inv_std: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl<T> BatchNormCache<T> {
    /// Biased batch variance per feature.
    pub fn batch_var(&self) -> &[f64] {
        &self.var
    }

    pub fn batch_mean(&self) -> &[f64] {
        &self.mean
    }
}

impl<T: Real> BatchNormState<T> {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: vec![T::one(); features],
            beta: vec![T::zero(); features],
            running_mean: vec![T::zero(); features],
            running_var: vec![T::one(); features],
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    fn rows_of(&self, len: usize) -> Result<usize> {
        let f = self.features();
        if f == 0 || len == 0 || !len.is_multiple_of(f) {
            return Err(Error::shape(
                "batchnorm",
                format!("a multiple of {f} features"),
                format!("{len} elements"),
            ));
        }
        Ok(len / f)
    }

    /// Normalizes with batch statistics without touching the running stats.
    pub fn normalize_batch(&self, input: &[T]) -> Result<(Vec<T>, BatchNormCache<T>)> {
        let f = self.features();
        let rows = self.rows_of(input.len())? as f64;
        let mut mean = vec![0.0f64; f];
        for row in input.chunks_exact(f) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows);
        let mut var = vec![0.0f64; f];
        for row in input.chunks_exact(f) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v.as_f64() - m;
                *s += d * d;
            }
        }
        var.iter_mut().for_each(|s| *s /= rows);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut xhat = Vec::with_capacity(input.len());
        let mut out = Vec::with_capacity(input.len());
        for row in input.chunks_exact(f) {
            for (j, v) in row.iter().enumerate() {
                let xh = T::from_f64_lossy((v.as_f64() - mean[j]) * inv_std[j]);
                xhat.push(xh);
                out.push(xh * self.gamma[j] + self.beta[j]);
            }
        }
        Ok((
            out,
            BatchNormCache {
                xhat,
                inv_std,
                mean,
                var,
            },
        ))
    }

    /// Folds batch statistics into the running estimates.
    ///
    /// The running variance uses the unbiased batch variance.
    pub fn update_running(&mut self, cache: &BatchNormCache<T>, rows: usize) {
        let m = self.momentum;
        let correction = if rows > 1 {
            rows as f64 / (rows as f64 - 1.0)
        } else {
            1.0
        };
        for j in 0..self.features() {
            let rm = self.running_mean[j].as_f64();
            let rv = self.running_var[j].as_f64();
            self.running_mean[j] = T::from_f64_lossy((1.0 - m) * rm + m * cache.mean[j]);
            self.running_var[j] = T::from_f64_lossy(((1.0 - m) * rv + m * cache.var[j] * correction).max(0.0));
        }
    }

    /// Train-mode forward: batch statistics, then running-stat update.
    pub fn forward_train(&mut self, input: &[T]) -> Result<(Vec<T>, BatchNormCache<T>)> {
        let rows = self.rows_of(input.len())?;
        let (out, cache) = self.normalize_batch(input)?;
        self.update_running(&cache, rows);
        Ok((out, cache))
    }

    /// Eval-mode forward using the running statistics only.
    pub fn forward_eval(&self, input: &[T]) -> Result<Vec<T>> {
        let f = self.features();
        self.rows_of(input.len())?;
        let (scale, shift) = self.eval_affine();
        let mut out = Vec::with_capacity(input.len());
        for row in input.chunks_exact(f) {
            out.extend(row.iter().zip(&scale).zip(&shift).map(|((v, a), b)| *v * *a + *b));
        }
        Ok(out)
    }

    /// Eval mode is the affine map `x * scale + shift` per feature.
    fn eval_affine(&self) -> (Vec<T>, Vec<T>) {
        let mut scale = Vec::with_capacity(self.features());
        let mut shift = Vec::with_capacity(self.features());
        for j in 0..self.features() {
            let inv = 1.0 / (self.running_var[j].as_f64() + self.epsilon).sqrt();
            let a = self.gamma[j].as_f64() * inv;
            scale.push(T::from_f64_lossy(a));
            shift.push(T::from_f64_lossy(
                self.beta[j].as_f64() - self.running_mean[j].as_f64() * a,
            ));
        }
        (scale, shift)
    }
}

/// Batch normalization forward in the given mode.
///
/// Train mode mutates the running statistics; eval mode leaves `state`
/// untouched.
pub fn batchnorm_forward<T: Real>(input: &[T], state: &mut BatchNormState<T>, mode: BatchNormMode) -> Result<Vec<T>> {
    match mode {
        BatchNormMode::Train => state.forward_train(input).map(|(out, _)| out),
        BatchNormMode::Eval => state.forward_eval(input),
    }
}

/// Gradients `(input, gamma, beta)` of a train-mode forward pass.
pub fn batchnorm_backward<T: Real>(
    grad_out: &[T],
    state: &BatchNormState<T>,
    cache: &BatchNormCache<T>,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let f = state.features();
    if grad_out.len() != cache.xhat.len() {
        return Err(Error::shape("batchnorm_backward", cache.xhat.len(), grad_out.len()));
    }
    let rows = (grad_out.len() / f) as f64;
    let mut sum_dy = vec![0.0f64; f];
    let mut sum_dy_xhat = vec![0.0f64; f];
    for (g, xh) in grad_out.chunks_exact(f).zip(cache.xhat.chunks_exact(f)) {
        for j in 0..f {
            let gj = g[j].as_f64();
            sum_dy[j] += gj;
            sum_dy_xhat[j] += gj * xh[j].as_f64();
        }
    }
    let mut grad_in = Vec::with_capacity(grad_out.len());
    for (g, xh) in grad_out.chunks_exact(f).zip(cache.xhat.chunks_exact(f)) {
        for j in 0..f {
            let k = state.gamma[j].as_f64() * cache.inv_std[j] / rows;
            let v = k * (rows * g[j].as_f64() - sum_dy[j] - xh[j].as_f64() * sum_dy_xhat[j]);
            grad_in.push(T::from_f64_lossy(v));
        }
    }
    Ok((
        grad_in,
        sum_dy_xhat.into_iter().map(T::from_f64_lossy).collect(),
        sum_dy.into_iter().map(T::from_f64_lossy).collect(),
    ))
}

/// Gradients `(input, gamma, beta)` of an eval-mode forward pass.
pub fn batchnorm_eval_backward<T: Real>(
    grad_out: &[T],
    input: &[T],
    state: &BatchNormState<T>,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let f = state.features();
    if grad_out.len() != input.len() {
        return Err(Error::shape("batchnorm_backward", input.len(), grad_out.len()));
    }
    state.rows_of(input.len())?;
    let inv: Vec<f64> = state
        .running_var
        .iter()
        .map(|v| 1.0 / (v.as_f64() + state.epsilon).sqrt())
        .collect();
    let mut dgamma = vec![0.0f64; f];
    let mut dbeta = vec![0.0f64; f];
    let mut grad_in = Vec::with_capacity(input.len());
    for (g, x) in grad_out.chunks_exact(f).zip(input.chunks_exact(f)) {
        for j in 0..f {
            let gj = g[j].as_f64();
            let xhat = (x[j].as_f64() - state.running_mean[j].as_f64()) * inv[j];
            dgamma[j] += gj * xhat;
            dbeta[j] += gj;
            grad_in.push(T::from_f64_lossy(gj * state.gamma[j].as_f64() * inv[j]));
        }
    }
    Ok((
        grad_in,
        dgamma.into_iter().map(T::from_f64_lossy).collect(),
        dbeta.into_iter().map(T::from_f64_lossy).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::testutil::{central_diff, random_vec, rel_err};

    #[test]
    fn eval_with_unit_stats_is_identity() {
        let mut s = BatchNormState::<f64>::new(3);
        let x = random_vec(1, 12);
        let before = s.clone();
        let y = batchnorm_forward(&x, &mut s, BatchNormMode::Eval).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-5 * a.abs().max(1.0));
        }
        assert_eq!(s, before, "eval mode must not mutate state");
    }

    #[test]
    fn train_output_is_standardized() {
        let mut s = BatchNormState::<f64>::new(4);
        let x: Vec<f64> = random_vec(2, 4 * 50).iter().map(|v| 3.0 * v + 1.5).collect();
        let y = batchnorm_forward(&x, &mut s, BatchNormMode::Train).unwrap();
        for j in 0..4 {
            let col: Vec<f64> = y.iter().skip(j).step_by(4).copied().collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-5);
            // epsilon shrinks the variance by var/(var+eps)
            assert!((var - 1.0).abs() < 1e-5, "var {var}");
        }
        assert!(s.running_var.iter().all(|&v| v >= 0.0));
        assert!(s.running_mean.iter().any(|&m| m != 0.0));
    }

    #[test]
    fn single_row_zero_variance_is_guarded() {
        let mut s = BatchNormState::<f32>::new(2);
        let y = batchnorm_forward(&[1.0f32, -2.0], &mut s, BatchNormMode::Train).unwrap();
        assert!(y.iter().all(|v| v.is_finite() && *v == 0.0));
    }

    #[test]
    fn feature_mismatch_is_a_shape_error() {
        let mut s = BatchNormState::<f32>::new(3);
        assert!(matches!(
            batchnorm_forward(&[1.0f32; 4], &mut s, BatchNormMode::Train),
            Err(Error::Shape { .. })
        ));
    }

    fn perturbed_state(f: usize) -> BatchNormState<f64> {
        let mut s = BatchNormState::<f64>::new(f);
        s.gamma = random_vec(7, f).iter().map(|v| 1.0 + 0.5 * v).collect();
        s.beta = random_vec(8, f);
        s.running_mean = random_vec(9, f);
        s.running_var = random_vec(10, f).iter().map(|v| 1.0 + 0.5 * v).collect();
        s
    }

    #[test]
    fn train_backward_matches_finite_differences() {
        let f = 3;
        let mut state = perturbed_state(f);
        let mut x = random_vec(3, f * 6);
        let w = random_vec(4, f * 6);
        let (_, cache) = state.normalize_batch(&x).unwrap();
        let (gx, gg, gb) = batchnorm_backward(&w, &state, &cache).unwrap();
        let loss = |x: &[f64], s: &BatchNormState<f64>| -> f64 {
            let (y, _) = s.normalize_batch(x).unwrap();
            y.iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        for i in 0..x.len() {
            let fd = central_diff(&mut x, i, 1e-3, |xs| loss(xs, &state));
            assert!(rel_err(gx[i], fd) < 1e-4, "x{i}: {} vs {fd}", gx[i]);
        }
        let mut gamma = state.gamma.clone();
        for j in 0..f {
            let fd = central_diff(&mut gamma, j, 1e-3, |g| {
                let mut s = state.clone();
                s.gamma = g.to_vec();
                loss(&x, &s)
            });
            assert!(rel_err(gg[j], fd) < 1e-4);
        }
        let mut beta = state.beta.clone();
        for j in 0..f {
            let fd = central_diff(&mut beta, j, 1e-3, |b| {
                state.beta = b.to_vec();
                loss(&x, &state)
            });
            assert!(rel_err(gb[j], fd) < 1e-4);
        }
    }

    #[test]
    fn eval_backward_matches_finite_differences() {
        let f = 2;
        let state = perturbed_state(f);
        let mut x = random_vec(5, f * 4);
        let w = random_vec(6, f * 4);
        let (gx, gg, _) = batchnorm_eval_backward(&w, &x, &state).unwrap();
        let loss = |x: &[f64], s: &BatchNormState<f64>| -> f64 {
            let y = s.forward_eval(x).unwrap();
            y.iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        for i in 0..x.len() {
            let fd = central_diff(&mut x, i, 1e-3, |xs| loss(xs, &state));
            assert!(rel_err(gx[i], fd) < 1e-4);
        }
        let mut gamma = state.gamma.clone();
        for j in 0..f {
            let fd = central_diff(&mut gamma, j, 1e-3, |g| {
                let mut s = state.clone();
                s.gamma = g.to_vec();
                loss(&x, &s)
            });
            assert!(rel_err(gg[j], fd) < 1e-4);
        }
    }
}
