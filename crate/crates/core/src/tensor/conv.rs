use super::{Dims4, Real, Tensor4};
use crate::error::{Error, Result};

/// Spatial kernel size of every convolution in the network.
pub const CONV_KERNEL: usize = 4;
/// Stride of every convolution in the network.
pub const CONV_STRIDE: usize = 2;

/// SAME-style zero padding along one spatial axis.
///
/// The output length is `ceil(input / stride)`; the total padding
/// `max((output - 1) * stride + kernel - input, 0)` is split with the smaller
/// half before the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamePadding {
    pub output: usize,
    pub begin: usize,
    pub end: usize,
}

pub fn same_padding(input: usize, kernel: usize, stride: usize) -> SamePadding {
    assert!(input > 0 && kernel > 0 && stride > 0);
    let output = input.div_ceil(stride);
    let total = ((output - 1) * stride + kernel).saturating_sub(input);
    SamePadding {
        output,
        begin: total / 2,
        end: total - total / 2,
    }
}

/// Weights of one 4x4, stride-2 convolution.
///
/// Kernels are stored as `[kh][kw][in_ch][out_ch]`, which makes the kernel
/// a row-major `(16 * in_ch) x out_ch` matrix for the lowered convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerState<T = f32> {
    in_ch: usize,
    out_ch: usize,
    kernels: Vec<T>,
    bias: Vec<T>,
}

impl<T: Real> ConvLayerState<T> {
    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            kernels: vec![T::zero(); CONV_KERNEL * CONV_KERNEL * in_ch * out_ch],
            bias: vec![T::zero(); out_ch],
        }
    }

    pub fn from_parts(in_ch: usize, out_ch: usize, kernels: Vec<T>, bias: Vec<T>) -> Result<Self> {
        let want = CONV_KERNEL * CONV_KERNEL * in_ch * out_ch;
        if kernels.len() != want || bias.len() != out_ch || in_ch == 0 || out_ch == 0 {
            return Err(Error::shape(
                "conv layer",
                format!("kernels {want}, bias {out_ch}"),
                format!("kernels {}, bias {}", kernels.len(), bias.len()),
            ));
        }
        Ok(Self {
            in_ch,
            out_ch,
            kernels,
            bias,
        })
    }

    pub fn in_ch(&self) -> usize {
        self.in_ch
    }

    pub fn out_ch(&self) -> usize {
        self.out_ch
    }

    pub fn kernel_size(&self) -> usize {
        CONV_KERNEL
    }

    pub fn stride(&self) -> usize {
        CONV_STRIDE
    }

    pub fn kernels(&self) -> &[T] {
        &self.kernels
    }

    pub fn kernels_mut(&mut self) -> &mut [T] {
        &mut self.kernels
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.kernels, &mut self.bias)
    }

    #[inline]
    fn kernel_index(&self, ky: usize, kx: usize, ci: usize, co: usize) -> usize {
        ((ky * CONV_KERNEL + kx) * self.in_ch + ci) * self.out_ch + co
    }

    pub fn output_dims(&self, input: Dims4) -> Result<Dims4> {
        if input.channels != self.in_ch {
            return Err(Error::shape(
                "conv2d",
                format!("input with {} channels", self.in_ch),
                input,
            ));
        }
        let h = same_padding(input.height, CONV_KERNEL, CONV_STRIDE);
        let w = same_padding(input.width, CONV_KERNEL, CONV_STRIDE);
        Ok(Dims4::new(input.batch, h.output, w.output, self.out_ch))
    }
}

/// Gradients of a scalar loss with respect to a convolution's input and
/// parameters.
#[derive(Debug, Clone)]
pub struct ConvGrads<T = f32> {
    pub input: Tensor4<T>,
    pub kernels: Vec<T>,
    pub bias: Vec<T>,
}

struct Geometry {
    h: SamePadding,
    w: SamePadding,
    in_h: usize,
    in_w: usize,
    in_ch: usize,
}

impl Geometry {
    fn new(input: Dims4) -> Self {
        Self {
            h: same_padding(input.height, CONV_KERNEL, CONV_STRIDE),
            w: same_padding(input.width, CONV_KERNEL, CONV_STRIDE),
            in_h: input.height,
            in_w: input.width,
            in_ch: input.channels,
        }
    }

    fn patch_len(&self) -> usize {
        CONV_KERNEL * CONV_KERNEL * self.in_ch
    }

    fn positions(&self) -> usize {
        self.h.output * self.w.output
    }

    /// Input coordinate for output `o` and kernel tap `k`, if inside the data.
    #[inline]
    fn source(o: usize, k: usize, pad: &SamePadding, len: usize) -> Option<usize> {
        (o * CONV_STRIDE + k).checked_sub(pad.begin).filter(|&i| i < len)
    }

    /// Lowers one batch item to a `positions x patch_len` matrix.
    fn im2col<T: Real>(&self, item: &[T], cols: &mut [T]) {
        let c = self.in_ch;
        let patch = self.patch_len();
        for oy in 0..self.h.output {
            for ox in 0..self.w.output {
                let row = &mut cols[(oy * self.w.output + ox) * patch..][..patch];
                for ky in 0..CONV_KERNEL {
                    let seg = &mut row[ky * CONV_KERNEL * c..(ky + 1) * CONV_KERNEL * c];
                    let Some(iy) = Self::source(oy, ky, &self.h, self.in_h) else {
                        seg.fill(T::zero());
                        continue;
                    };
                    for kx in 0..CONV_KERNEL {
                        let dst = &mut seg[kx * c..(kx + 1) * c];
                        match Self::source(ox, kx, &self.w, self.in_w) {
                            Some(ix) => {
                                let src = (iy * self.in_w + ix) * c;
                                dst.copy_from_slice(&item[src..src + c]);
                            }
                            None => dst.fill(T::zero()),
                        }
                    }
                }
            }
        }
    }

    /// Scatter-adds a lowered gradient back onto one input item.
    fn col2im<T: Real>(&self, cols: &[T], item: &mut [T]) {
        let c = self.in_ch;
        let patch = self.patch_len();
        for oy in 0..self.h.output {
            for ky in 0..CONV_KERNEL {
                let Some(iy) = Self::source(oy, ky, &self.h, self.in_h) else {
                    continue;
                };
                for ox in 0..self.w.output {
                    let row = &cols[(oy * self.w.output + ox) * patch..][..patch];
                    for kx in 0..CONV_KERNEL {
                        if let Some(ix) = Self::source(ox, kx, &self.w, self.in_w) {
                            let dst = &mut item[(iy * self.in_w + ix) * c..][..c];
                            let src = &row[(ky * CONV_KERNEL + kx) * c..][..c];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += *s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Strided SAME convolution, lowered to one GEMM per batch item.
///
/// Agrees with [`conv2d_forward_reference`] up to floating point
/// reassociation.
pub fn conv2d_forward<T: Real>(input: &Tensor4<T>, layer: &ConvLayerState<T>) -> Result<Tensor4<T>> {
    let out_dims = layer.output_dims(input.dims())?;
    let geo = Geometry::new(input.dims());
    let (positions, patch) = (geo.positions(), geo.patch_len());
    let mut cols = vec![T::zero(); positions * patch];
    let mut out = vec![T::zero(); out_dims.len()];
    let co = layer.out_ch;
    for (n, dst) in out.chunks_exact_mut(out_dims.item_len()).enumerate() {
        geo.im2col(input.item(n), &mut cols);
        for px in dst.chunks_exact_mut(co) {
            px.copy_from_slice(&layer.bias);
        }
        T::gemm(
            positions,
            patch,
            co,
            T::one(),
            &cols,
            (patch, 1),
            &layer.kernels,
            (co, 1),
            T::one(),
            dst,
            (co, 1),
        );
    }
    Tensor4::from_vec(out_dims, out)
}

fn check_grad_out<T: Real>(input: &Tensor4<T>, layer: &ConvLayerState<T>, grad_out: &Tensor4<T>) -> Result<Dims4> {
    let want = layer.output_dims(input.dims())?;
    if grad_out.dims() != want {
        return Err(Error::shape("conv2d_backward", want, grad_out.dims()));
    }
    Ok(want)
}

/// Parameter (and optionally input) gradients of the lowered convolution.
pub(crate) fn conv2d_backward_impl<T: Real>(
    input: &Tensor4<T>,
    layer: &ConvLayerState<T>,
    grad_out: &Tensor4<T>,
    want_input: bool,
) -> Result<(Option<Tensor4<T>>, Vec<T>, Vec<T>)> {
    let out_dims = check_grad_out(input, layer, grad_out)?;
    let geo = Geometry::new(input.dims());
    let (positions, patch) = (geo.positions(), geo.patch_len());
    let co = layer.out_ch;
    let mut cols = vec![T::zero(); positions * patch];
    let mut grad_cols = if want_input {
        vec![T::zero(); positions * patch]
    } else {
        Vec::new()
    };
    let mut grad_k = vec![T::zero(); layer.kernels.len()];
    let mut grad_b = vec![T::zero(); co];
    let mut grad_in = if want_input {
        vec![T::zero(); input.dims().len()]
    } else {
        Vec::new()
    };

    for n in 0..input.dims().batch {
        let g = grad_out.item(n);
        for px in g.chunks_exact(co) {
            for (b, v) in grad_b.iter_mut().zip(px) {
                *b += *v;
            }
        }
        geo.im2col(input.item(n), &mut cols);
        // dK += cols^T * G
        T::gemm(
            patch,
            positions,
            co,
            T::one(),
            &cols,
            (1, patch),
            g,
            (co, 1),
            T::one(),
            &mut grad_k,
            (co, 1),
        );
        if want_input {
            // dcols = G * K^T
            T::gemm(
                positions,
                co,
                patch,
                T::one(),
                g,
                (co, 1),
                &layer.kernels,
                (1, co),
                T::zero(),
                &mut grad_cols,
                (patch, 1),
            );
            let item_len = input.dims().item_len();
            geo.col2im(&grad_cols, &mut grad_in[n * item_len..(n + 1) * item_len]);
        }
    }
    debug_assert_eq!(out_dims.channels, co);
    let grad_in = if want_input {
        Some(Tensor4::from_vec(input.dims(), grad_in)?)
    } else {
        None
    };
    Ok((grad_in, grad_k, grad_b))
}

/// Gradients of a scalar loss given `grad_out`, its gradient with respect to
/// the convolution output.
pub fn conv2d_backward<T: Real>(
    input: &Tensor4<T>,
    layer: &ConvLayerState<T>,
    grad_out: &Tensor4<T>,
) -> Result<ConvGrads<T>> {
    let (grad_in, kernels, bias) = conv2d_backward_impl(input, layer, grad_out, true)?;
    Ok(ConvGrads {
        input: grad_in.expect("input gradient requested"),
        kernels,
        bias,
    })
}

/// Direct nested-loop convolution.
///
/// Each output is accumulated over `(ky, kx, ci)` in that order starting
/// from zero, then the bias is added.
pub fn conv2d_forward_reference<T: Real>(input: &Tensor4<T>, layer: &ConvLayerState<T>) -> Result<Tensor4<T>> {
    let out_dims = layer.output_dims(input.dims())?;
    let geo = Geometry::new(input.dims());
    let mut out = Tensor4::zeros(out_dims)?;
    for n in 0..out_dims.batch {
        for oy in 0..out_dims.height {
            for ox in 0..out_dims.width {
                for co in 0..out_dims.channels {
                    let mut acc = T::zero();
                    for ky in 0..CONV_KERNEL {
                        let Some(iy) = Geometry::source(oy, ky, &geo.h, geo.in_h) else {
                            continue;
                        };
                        for kx in 0..CONV_KERNEL {
                            let Some(ix) = Geometry::source(ox, kx, &geo.w, geo.in_w) else {
                                continue;
                            };
                            for ci in 0..layer.in_ch {
                                acc += input.at(n, iy, ix, ci) * layer.kernels[layer.kernel_index(ky, kx, ci, co)];
                            }
                        }
                    }
                    let i = out.index(n, oy, ox, co);
                    out.data_mut()[i] = acc + layer.bias[co];
                }
            }
        }
    }
    Ok(out)
}

/// Direct nested-loop backward pass, kept as a cross-check for the lowered
/// path.
pub fn conv2d_backward_reference<T: Real>(
    input: &Tensor4<T>,
    layer: &ConvLayerState<T>,
    grad_out: &Tensor4<T>,
) -> Result<ConvGrads<T>> {
    let out_dims = check_grad_out(input, layer, grad_out)?;
    let geo = Geometry::new(input.dims());
    let mut grad_in = Tensor4::zeros(input.dims())?;
    let mut kernels = vec![T::zero(); layer.kernels.len()];
    let mut bias = vec![T::zero(); layer.out_ch];
    for n in 0..out_dims.batch {
        for oy in 0..out_dims.height {
            for ox in 0..out_dims.width {
                for co in 0..out_dims.channels {
                    let g = grad_out.at(n, oy, ox, co);
                    bias[co] += g;
                    for ky in 0..CONV_KERNEL {
                        let Some(iy) = Geometry::source(oy, ky, &geo.h, geo.in_h) else {
                            continue;
                        };
                        for kx in 0..CONV_KERNEL {
                            let Some(ix) = Geometry::source(ox, kx, &geo.w, geo.in_w) else {
                                continue;
                            };
                            for ci in 0..layer.in_ch {
                                let k = layer.kernel_index(ky, kx, ci, co);
                                kernels[k] += g * input.at(n, iy, ix, ci);
                                let i = grad_in.index(n, iy, ix, ci);
                                grad_in.data_mut()[i] += g * layer.kernels[k];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: grad_in,
        kernels,
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::testutil::{central_diff, random_vec, rel_err};
    use proptest::prelude::*;

    fn layer_from(seed: u64, in_ch: usize, out_ch: usize) -> ConvLayerState<f64> {
        let k = random_vec(seed, CONV_KERNEL * CONV_KERNEL * in_ch * out_ch);
        let b = random_vec(seed + 1, out_ch);
        ConvLayerState::from_parts(in_ch, out_ch, k, b).unwrap()
    }

    /// Independent direct convolution with explicit zero padding.
    fn oracle(input: &Tensor4<f64>, layer: &ConvLayerState<f64>) -> Vec<f64> {
        let d = input.dims();
        let (ph, pw) = (same_padding(d.height, 4, 2), same_padding(d.width, 4, 2));
        let (hp, wp) = (d.height + ph.begin + ph.end, d.width + pw.begin + pw.end);
        let mut padded = vec![0.0; d.batch * hp * wp * d.channels];
        for n in 0..d.batch {
            for y in 0..d.height {
                for x in 0..d.width {
                    for c in 0..d.channels {
                        padded[((n * hp + y + ph.begin) * wp + x + pw.begin) * d.channels + c] = input.at(n, y, x, c);
                    }
                }
            }
        }
        let mut out = Vec::new();
        for n in 0..d.batch {
            for oy in 0..ph.output {
                for ox in 0..pw.output {
                    for co in 0..layer.out_ch() {
                        let mut acc = 0.0;
                        for ky in 0..4 {
                            for kx in 0..4 {
                                for ci in 0..d.channels {
                                    let v = padded[((n * hp + oy * 2 + ky) * wp + ox * 2 + kx) * d.channels + ci];
                                    let w = layer.kernels()[((ky * 4 + kx) * d.channels + ci) * layer.out_ch() + co];
                                    acc += v * w;
                                }
                            }
                        }
                        out.push(acc + layer.bias()[co]);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn table_shapes() {
        let l1 = ConvLayerState::<f32>::zeros(1, 32);
        let x = Tensor4::<f32>::zeros(Dims4::new(1, 125, 125, 1)).unwrap();
        let y = conv2d_forward(&x, &l1).unwrap();
        assert_eq!(y.dims(), Dims4::new(1, 63, 63, 32));
        let l2 = ConvLayerState::<f32>::zeros(32, 64);
        assert_eq!(l2.output_dims(y.dims()).unwrap(), Dims4::new(1, 32, 32, 64));
        let l3 = ConvLayerState::<f32>::zeros(64, 128);
        assert_eq!(
            l3.output_dims(Dims4::new(1, 32, 32, 64)).unwrap(),
            Dims4::new(1, 16, 16, 128)
        );
    }

    #[test]
    fn padding_split_is_floor_begin() {
        assert_eq!(
            same_padding(125, 4, 2),
            SamePadding {
                output: 63,
                begin: 1,
                end: 2
            }
        );
        assert_eq!(
            same_padding(32, 4, 2),
            SamePadding {
                output: 16,
                begin: 1,
                end: 1
            }
        );
        assert_eq!(
            same_padding(1, 4, 2),
            SamePadding {
                output: 1,
                begin: 1,
                end: 2
            }
        );
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let mut l = ConvLayerState::<f32>::zeros(2, 3);
        l.kernels_mut().iter_mut().for_each(|k| *k = 0.7);
        let x = Tensor4::<f32>::zeros(Dims4::new(2, 9, 7, 2)).unwrap();
        assert!(conv2d_forward(&x, &l).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ones_kernel_sums_receptive_field() {
        let mut l = ConvLayerState::<f64>::zeros(1, 1);
        l.kernels_mut().iter_mut().for_each(|k| *k = 1.0);
        let data = random_vec(3, 36);
        let x = Tensor4::from_vec(Dims4::new(1, 6, 6, 1), data.clone()).unwrap();
        let y = conv2d_forward_reference(&x, &l).unwrap();
        // 6 -> 3 with total pad 2: one row/col of zeros on each side.
        assert_eq!(y.dims(), Dims4::new(1, 3, 3, 1));
        for oy in 0..3 {
            for ox in 0..3 {
                let mut want = 0.0;
                for ky in 0..4 {
                    for kx in 0..4 {
                        let (iy, ix) = ((oy * 2 + ky) as isize - 1, (ox * 2 + kx) as isize - 1);
                        if (0..6).contains(&iy) && (0..6).contains(&ix) {
                            want += data[iy as usize * 6 + ix as usize];
                        }
                    }
                }
                assert!((y.at(0, oy, ox, 0) - want).abs() < 1e-12);
            }
        }
        assert_eq!(conv2d_forward(&x, &l).unwrap().data().len(), 9);
    }

    #[test]
    fn channel_mismatch_names_both_shapes() {
        let l = ConvLayerState::<f32>::zeros(3, 4);
        let x = Tensor4::<f32>::zeros(Dims4::new(1, 8, 8, 2)).unwrap();
        let err = conv2d_forward(&x, &l).unwrap_err().to_string();
        assert!(err.contains("3 channels") && err.contains("8x8x2"), "{err}");
    }

    #[test]
    fn reference_matches_oracle_exactly() {
        for (seed, (h, w, ci, co)) in [(5, 3, 2, 3), (16, 16, 1, 2), (9, 12, 3, 4), (1, 1, 1, 1)]
            .into_iter()
            .enumerate()
        {
            let layer = layer_from(seed as u64 * 10, ci, co);
            let x = Tensor4::from_vec(
                Dims4::new(2, h, w, ci),
                random_vec(seed as u64 * 10 + 5, 2 * h * w * ci),
            )
            .unwrap();
            let got = conv2d_forward_reference(&x, &layer).unwrap();
            let want = oracle(&x, &layer);
            // The oracle sums padded zeros too; adding exact zeros does not
            // change an f64 sum, so this comparison is exact.
            assert_eq!(got.data(), &want[..]);
        }
    }

    #[test]
    fn lowered_matches_reference_within_reassociation() {
        let mut rng_seed = 100;
        for (h, w, ci, co) in [(16, 16, 3, 5), (13, 7, 2, 4), (125, 9, 1, 8)] {
            rng_seed += 1;
            let layer = layer_from(rng_seed, ci, co);
            let layer32 = ConvLayerState::<f32>::from_parts(
                ci,
                co,
                layer.kernels().iter().map(|&v| v as f32).collect(),
                layer.bias().iter().map(|&v| v as f32).collect(),
            )
            .unwrap();
            let x = Tensor4::from_vec(Dims4::new(2, h, w, ci), random_vec(rng_seed + 50, 2 * h * w * ci))
                .unwrap()
                .cast::<f32>();
            let fast = conv2d_forward(&x, &layer32).unwrap();
            let slow = conv2d_forward_reference(&x, &layer32).unwrap();
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let layer = layer_from(1, 2, 3);
        let x = Tensor4::from_vec(Dims4::new(1, 8, 8, 2), random_vec(2, 128)).unwrap();
        let g = Tensor4::zeros(Dims4::new(1, 4, 4, 3)).unwrap();
        let grads = conv2d_backward(&x, &layer, &g).unwrap();
        assert!(grads.input.data().iter().all(|&v| v == 0.0));
        assert!(grads.kernels.iter().chain(&grads.bias).all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_wrong_grad_shape() {
        let layer = layer_from(1, 2, 3);
        let x = Tensor4::from_vec(Dims4::new(1, 8, 8, 2), random_vec(2, 128)).unwrap();
        let g = Tensor4::zeros(Dims4::new(1, 4, 4, 2)).unwrap();
        assert!(matches!(conv2d_backward(&x, &layer, &g), Err(Error::Shape { .. })));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (ci, co) = (2, 3);
        let mut layer = layer_from(11, ci, co);
        let dims = Dims4::new(1, 8, 8, ci);
        let mut x = random_vec(12, dims.len());
        let out_dims = layer.output_dims(dims).unwrap();
        let weights = random_vec(13, out_dims.len());
        let g = Tensor4::from_vec(out_dims, weights.clone()).unwrap();
        let input = Tensor4::from_vec(dims, x.clone()).unwrap();
        let grads = conv2d_backward(&input, &layer, &g).unwrap();
        let reference = conv2d_backward_reference(&input, &layer, &g).unwrap();

        let loss = |x: &[f64], l: &ConvLayerState<f64>| -> f64 {
            let t = Tensor4::from_vec(dims, x.to_vec()).unwrap();
            let y = conv2d_forward(&t, l).unwrap();
            y.data().iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        let h = 1e-3;
        for i in 0..x.len() {
            let fd = central_diff(&mut x, i, h, |xs| loss(xs, &layer));
            assert!(rel_err(grads.input.data()[i], fd) < 1e-4);
            assert!(rel_err(reference.input.data()[i], fd) < 1e-4);
        }
        let mut k = layer.kernels().to_vec();
        for i in 0..k.len() {
            let fd = central_diff(&mut k, i, h, |ks| {
                let mut l = layer.clone();
                l.kernels_mut().copy_from_slice(ks);
                loss(&x, &l)
            });
            assert!(rel_err(grads.kernels[i], fd) < 1e-4, "kernel {i}");
            assert!(rel_err(reference.kernels[i], fd) < 1e-4);
        }
        let mut b = layer.bias().to_vec();
        for i in 0..b.len() {
            let fd = central_diff(&mut b, i, h, |bs| {
                layer.bias_mut().copy_from_slice(bs);
                loss(&x, &layer)
            });
            assert!(rel_err(grads.bias[i], fd) < 1e-4);
        }
        // grad_bias is the spatial/batch sum of grad_out per channel
        for c in 0..co {
            let s: f64 = weights.iter().skip(c).step_by(co).sum();
            assert!((grads.bias[c] - s).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn same_padding_output_is_ceil_half(n in 1usize..=200) {
            let p = same_padding(n, CONV_KERNEL, CONV_STRIDE);
            prop_assert_eq!(p.output, n.div_ceil(2));
            prop_assert!(p.end - p.begin <= 1);
            // last window ends exactly at the padded extent
            prop_assert!((p.output - 1) * 2 + 4 <= n + p.begin + p.end);
        }
    }
}
