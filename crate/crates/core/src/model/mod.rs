//! The tile classifier.
//!
//! ```text
//! input  H x W x 1
//!   conv 4x4/2, 32  -> batchnorm -> relu      (125x125 -> 63x63x32)
//!   conv 4x4/2, 64  -> batchnorm -> relu      (-> 32x32x64)
//!   conv 4x4/2, 128 -> batchnorm -> relu      (-> 16x16x128)
//!   global average pool                       (-> 128)
//!   fc 128 -> 100   -> batchnorm -> relu
//!   fc 100 -> classes                         (logits)
//! ```
//!
//! Training minimizes the mean softmax cross-entropy over a batch.

mod checkpoint;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{
    batchnorm_backward, batchnorm_eval_backward, conv::conv2d_backward_impl, conv2d_forward, fc_backward, fc_forward,
    gap_backward, gap_forward, relu_backward, relu_inplace, softmax_cross_entropy, BatchNormCache, BatchNormMode,
    BatchNormState, ConvLayerState, Linear, Matrix, Real, Tensor4, CONV_KERNEL,
};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};

/// Filters of the three convolution blocks.
pub const CONV_FILTERS: [usize; 3] = [32, 64, 128];
/// Width of the hidden fully connected layer.
pub const HIDDEN_UNITS: usize = 100;
/// Smallest accepted tile height/width.
pub const MIN_SPATIAL: usize = 8;

/// Every learnable parameter and batchnorm running statistic of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T = f32> {
    pub conv: [ConvLayerState<T>; 3],
    pub bn2d: [BatchNormState<T>; 3],
    pub fc1: Linear<T>,
    pub bn1d: BatchNormState<T>,
    pub fc2: Linear<T>,
}

/// Gradients laid out like [`NetworkParams::trainable`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(params: &NetworkParams<T>) -> Self {
        Self {
            tensors: params
                .trainable()
                .into_iter()
                .map(|(_, t)| vec![T::zero(); t.len()])
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.tensors.iter().flatten()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// Output shape of one stage of the network, batch axis omitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub layer: &'static str,
    pub dims: Vec<usize>,
}

/// Mean loss, gradients and logits of one batch.
#[derive(Debug, Clone)]
pub struct BatchLoss<T = f32> {
    pub loss: f64,
    pub grads: Gradients<T>,
    pub logits: Matrix<T>,
}

enum BnSaved<T> {
    Train(BatchNormCache<T>),
    Eval(Vec<T>),
}

struct Forward<T> {
    logits: Matrix<T>,
    shapes: Vec<LayerShape>,
    /// Post-activation output of each conv block.
    outputs: Vec<Tensor4<T>>,
    conv_bn: Vec<BnSaved<T>>,
    pooled: Matrix<T>,
    bn1d: BnSaved<T>,
    hidden: Matrix<T>,
}

impl<T: Real> Forward<T> {
    /// Batch statistics for the running-stat update, in layer order.
    fn batch_stats(&self) -> Vec<(usize, &BatchNormCache<T>)> {
        let mut stats = Vec::with_capacity(4);
        for (bn, out) in self.conv_bn.iter().zip(&self.outputs) {
            if let BnSaved::Train(c) = bn {
                let d = out.dims();
                stats.push((d.batch * d.height * d.width, c));
            }
        }
        if let BnSaved::Train(c) = &self.bn1d {
            stats.push((self.hidden.rows(), c));
        }
        stats
    }
}

const CONV_NAMES: [&str; 3] = ["conv1", "conv2", "conv3"];
const BN_NAMES: [&str; 3] = ["bn2d1", "bn2d2", "bn2d3"];

impl NetworkParams<f32> {
    /// He-normal initialization: weights ~ N(0, 2 / fan_in), biases zero,
    /// batchnorm at identity. Fully determined by `seed`.
    pub fn init_he(seed: u64, classes: usize, input_channels: usize) -> Result<Self> {
        NetworkParams::<f32>::init_he_generic(seed, classes, input_channels)
    }
}

impl<T: Real> NetworkParams<T> {
    pub fn init_he_generic(seed: u64, classes: usize, input_channels: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        if input_channels == 0 {
            return Err(Error::InvalidArgument("input_channels must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut he = |fan_in: usize, len: usize| -> Vec<T> {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
            (0..len).map(|_| T::from_f64_lossy(normal.sample(&mut rng))).collect()
        };
        let mut in_ch = input_channels;
        let mut conv = Vec::with_capacity(3);
        for &out_ch in &CONV_FILTERS {
            let fan_in = CONV_KERNEL * CONV_KERNEL * in_ch;
            let k = he(fan_in, fan_in * out_ch);
            conv.push(ConvLayerState::from_parts(in_ch, out_ch, k, vec![T::zero(); out_ch])?);
            in_ch = out_ch;
        }
        let fc1 = Linear::from_parts(
            in_ch,
            HIDDEN_UNITS,
            he(in_ch, in_ch * HIDDEN_UNITS),
            vec![T::zero(); HIDDEN_UNITS],
        )?;
        let fc2 = Linear::from_parts(
            HIDDEN_UNITS,
            classes,
            he(HIDDEN_UNITS, HIDDEN_UNITS * classes),
            vec![T::zero(); classes],
        )?;
        let conv: [ConvLayerState<T>; 3] = conv.try_into().expect("three conv layers");
        Ok(Self {
            bn2d: CONV_FILTERS.map(BatchNormState::new),
            conv,
            fc1,
            bn1d: BatchNormState::new(HIDDEN_UNITS),
            fc2,
        })
    }

    pub fn classes(&self) -> usize {
        self.fc2.outputs()
    }

    pub fn input_channels(&self) -> usize {
        self.conv[0].in_ch()
    }

    /// Named views of every trainable tensor, in a fixed order.
    pub fn trainable(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = Vec::with_capacity(14);
        for l in 0..3 {
            out.push((format!("{}.kernels", CONV_NAMES[l]), self.conv[l].kernels()));
            out.push((format!("{}.bias", CONV_NAMES[l]), self.conv[l].bias()));
            out.push((format!("{}.gamma", BN_NAMES[l]), &self.bn2d[l].gamma));
            out.push((format!("{}.beta", BN_NAMES[l]), &self.bn2d[l].beta));
        }
        out.push(("fc1.weights".into(), &self.fc1.weights));
        out.push(("fc1.bias".into(), &self.fc1.bias));
        out.push(("bn1d.gamma".into(), &self.bn1d.gamma));
        out.push(("bn1d.beta".into(), &self.bn1d.beta));
        out.push(("fc2.weights".into(), &self.fc2.weights));
        out.push(("fc2.bias".into(), &self.fc2.bias));
        out
    }

    /// Mutable views in the same order as [`Self::trainable`].
    pub fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        let Self {
            conv,
            bn2d,
            fc1,
            bn1d,
            fc2,
        } = self;
        let mut out: Vec<&mut [T]> = Vec::with_capacity(14);
        for (c, b) in conv.iter_mut().zip(bn2d.iter_mut()) {
            let (k, bias) = c.params_mut();
            out.push(k);
            out.push(bias);
            out.push(&mut b.gamma);
            out.push(&mut b.beta);
        }
        out.push(&mut fc1.weights);
        out.push(&mut fc1.bias);
        out.push(&mut bn1d.gamma);
        out.push(&mut bn1d.beta);
        out.push(&mut fc2.weights);
        out.push(&mut fc2.bias);
        out
    }

    /// Number of trainable scalars; running statistics are not counted.
    pub fn count_params(&self) -> usize {
        self.trainable().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.trainable().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
            && self
                .bn2d
                .iter()
                .chain(std::iter::once(&self.bn1d))
                .all(|b| b.running_mean.iter().chain(&b.running_var).all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> NetworkParams<U> {
        let cv = |v: &[T]| -> Vec<U> { v.iter().map(|x| U::from_f64_lossy(x.as_f64())).collect() };
        let conv = |c: &ConvLayerState<T>| {
            ConvLayerState::from_parts(c.in_ch(), c.out_ch(), cv(c.kernels()), cv(c.bias())).expect("same shape")
        };
        let bn = |b: &BatchNormState<T>| BatchNormState {
            gamma: cv(&b.gamma),
            beta: cv(&b.beta),
            running_mean: cv(&b.running_mean),
            running_var: cv(&b.running_var),
            momentum: b.momentum,
            epsilon: b.epsilon,
        };
        let lin = |l: &Linear<T>| {
            Linear::from_parts(l.inputs(), l.outputs(), cv(&l.weights), cv(&l.bias)).expect("same shape")
        };
        NetworkParams {
            conv: [conv(&self.conv[0]), conv(&self.conv[1]), conv(&self.conv[2])],
            bn2d: [bn(&self.bn2d[0]), bn(&self.bn2d[1]), bn(&self.bn2d[2])],
            fc1: lin(&self.fc1),
            bn1d: bn(&self.bn1d),
            fc2: lin(&self.fc2),
        }
    }

    fn check_input(&self, batch: &Tensor4<T>) -> Result<()> {
        let d = batch.dims();
        if d.height < MIN_SPATIAL || d.width < MIN_SPATIAL || d.channels != self.input_channels() {
            return Err(Error::shape(
                "network forward",
                format!(
                    "tiles of at least {MIN_SPATIAL}x{MIN_SPATIAL}x{}",
                    self.input_channels()
                ),
                d,
            ));
        }
        Ok(())
    }

    fn run(&self, batch: &Tensor4<T>, mode: BatchNormMode, keep: bool) -> Result<Forward<T>> {
        self.check_input(batch)?;
        let mut shapes = Vec::with_capacity(6);
        let mut outputs: Vec<Tensor4<T>> = Vec::with_capacity(3);
        let mut conv_bn = Vec::with_capacity(3);
        for l in 0..3 {
            let input = if l == 0 { batch } else { &outputs[l - 1] };
            let z = conv2d_forward(input, &self.conv[l])?;
            let dims = z.dims();
            shapes.push(LayerShape {
                layer: CONV_NAMES[l],
                dims: vec![dims.height, dims.width, dims.channels],
            });
            let (mut y, saved) = self.normalize(&self.bn2d[l], z.into_vec(), mode, keep)?;
            relu_inplace(&mut y);
            outputs.push(Tensor4::from_vec(dims, y)?);
            conv_bn.push(saved);
        }
        let pooled = gap_forward(&outputs[2]);
        shapes.push(LayerShape {
            layer: "gap",
            dims: vec![pooled.cols()],
        });
        let z1 = fc_forward(&pooled, &self.fc1)?;
        let (mut h, bn1d) = self.normalize(&self.bn1d, z1.into_vec(), mode, keep)?;
        relu_inplace(&mut h);
        let hidden = Matrix::from_vec(pooled.rows(), HIDDEN_UNITS, h)?;
        shapes.push(LayerShape {
            layer: "fc1",
            dims: vec![hidden.cols()],
        });
        let logits = fc_forward(&hidden, &self.fc2)?;
        shapes.push(LayerShape {
            layer: "fc2",
            dims: vec![logits.cols()],
        });
        Ok(Forward {
            logits,
            shapes,
            outputs,
            conv_bn,
            pooled,
            bn1d,
            hidden,
        })
    }

    fn normalize(
        &self,
        bn: &BatchNormState<T>,
        z: Vec<T>,
        mode: BatchNormMode,
        keep: bool,
    ) -> Result<(Vec<T>, BnSaved<T>)> {
        Ok(match mode {
            BatchNormMode::Train => {
                let (y, cache) = bn.normalize_batch(&z)?;
                (y, BnSaved::Train(cache))
            }
            BatchNormMode::Eval => {
                let y = bn.forward_eval(&z)?;
                (y, BnSaved::Eval(if keep { z } else { Vec::new() }))
            }
        })
    }

    fn apply_batch_stats(&mut self, stats: &[(usize, &BatchNormCache<T>)]) {
        for (l, (rows, cache)) in stats.iter().enumerate() {
            match l {
                0..=2 => self.bn2d[l].update_running(cache, *rows),
                _ => self.bn1d.update_running(cache, *rows),
            }
        }
    }

    /// Logits for a batch. Train mode normalizes with batch statistics and
    /// updates the running statistics.
    pub fn forward(&mut self, batch: &Tensor4<T>, mode: BatchNormMode) -> Result<Matrix<T>> {
        let fwd = self.run(batch, mode, false)?;
        self.apply_batch_stats(&fwd.batch_stats());
        Ok(fwd.logits)
    }

    /// Eval-mode logits; never mutates the parameters.
    pub fn forward_eval(&self, batch: &Tensor4<T>) -> Result<Matrix<T>> {
        Ok(self.run(batch, BatchNormMode::Eval, false)?.logits)
    }

    /// Output shape of every stage for an eval-mode pass over `batch`.
    pub fn trace_shapes(&self, batch: &Tensor4<T>) -> Result<Vec<LayerShape>> {
        Ok(self.run(batch, BatchNormMode::Eval, false)?.shapes)
    }

    /// Mean cross-entropy over the batch and its gradient with respect to
    /// every trainable parameter.
    ///
    /// In train mode the running statistics are updated once, after the
    /// loss is computed.
    pub fn loss_batch(&mut self, batch: &Tensor4<T>, labels: &[usize], mode: BatchNormMode) -> Result<BatchLoss<T>> {
        let fwd = self.run(batch, mode, true)?;
        let out = self.backward(batch, labels, &fwd)?;
        self.apply_batch_stats(&fwd.batch_stats());
        Ok(BatchLoss {
            loss: out.0,
            grads: out.1,
            logits: fwd.logits,
        })
    }

    fn backward(&self, batch: &Tensor4<T>, labels: &[usize], fwd: &Forward<T>) -> Result<(f64, Gradients<T>)> {
        let n = batch.dims().batch;
        if labels.len() != n {
            return Err(Error::shape("loss_batch", format!("{n} labels"), labels.len()));
        }
        let classes = self.classes();
        let inv_n = 1.0 / n as f64;
        let mut loss = 0.0f64;
        let mut dlogits = Vec::with_capacity(n * classes);
        for (r, &y) in labels.iter().enumerate() {
            let (l, g) = softmax_cross_entropy(fwd.logits.row(r), y)?;
            loss += l.as_f64();
            dlogits.extend(g.into_iter().map(|v| T::from_f64_lossy(v.as_f64() * inv_n)));
        }
        loss *= inv_n;
        let dlogits = Matrix::from_vec(n, classes, dlogits)?;

        let fc2 = fc_backward(&fwd.hidden, &self.fc2, &dlogits)?;
        let dh = relu_backward(fc2.input.data(), fwd.hidden.data())?;
        let (dz1, bn1d_gamma, bn1d_beta) = match &fwd.bn1d {
            BnSaved::Train(cache) => batchnorm_backward(&dh, &self.bn1d, cache)?,
            BnSaved::Eval(z) => batchnorm_eval_backward(&dh, z, &self.bn1d)?,
        };
        let fc1 = fc_backward(&fwd.pooled, &self.fc1, &Matrix::from_vec(n, HIDDEN_UNITS, dz1)?)?;

        let mut conv_grads: Vec<[Vec<T>; 4]> = Vec::with_capacity(3);
        let mut upstream = gap_backward(&fc1.input, fwd.outputs[2].dims())?;
        for l in (0..3).rev() {
            let output = &fwd.outputs[l];
            let dy = relu_backward(upstream.data(), output.data())?;
            let (dz, dgamma, dbeta) = match &fwd.conv_bn[l] {
                BnSaved::Train(cache) => batchnorm_backward(&dy, &self.bn2d[l], cache)?,
                BnSaved::Eval(z) => batchnorm_eval_backward(&dy, z, &self.bn2d[l])?,
            };
            let dz = Tensor4::from_vec(output.dims(), dz)?;
            let input = if l == 0 { batch } else { &fwd.outputs[l - 1] };
            let (din, dk, db) = conv2d_backward_impl(input, &self.conv[l], &dz, l > 0)?;
            conv_grads.push([dk, db, dgamma, dbeta]);
            if let Some(din) = din {
                upstream = din;
            }
        }
        conv_grads.reverse();
        let mut tensors: Vec<Vec<T>> = conv_grads.into_iter().flatten().collect();
        tensors.extend([fc1.weights, fc1.bias, bn1d_gamma, bn1d_beta, fc2.weights, fc2.bias]);
        Ok((loss, Gradients { tensors }))
    }
}
