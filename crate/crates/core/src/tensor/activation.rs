use super::{Dims4, Matrix, Real, Tensor4};
use crate::error::{Error, Result};

pub fn relu_forward<T: Real>(input: &Tensor4<T>) -> Tensor4<T> {
    let mut out = input.clone();
    relu_inplace(out.data_mut());
    out
}

pub fn relu_inplace<T: Real>(values: &mut [T]) {
    for v in values {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
}

/// Gradient through ReLU, using the forward *output* as the mask.
pub fn relu_backward<T: Real>(grad_out: &[T], output: &[T]) -> Result<Vec<T>> {
    if grad_out.len() != output.len() {
        return Err(Error::shape("relu_backward", output.len(), grad_out.len()));
    }
    Ok(grad_out
        .iter()
        .zip(output)
        .map(|(&g, &y)| if y > T::zero() { g } else { T::zero() })
        .collect())
}

/// Global average pooling: per-channel spatial mean, `[B,H,W,C] -> [B,C]`.
pub fn gap_forward<T: Real>(input: &Tensor4<T>) -> Matrix<T> {
    let d = input.dims();
    let area = (d.height * d.width) as f64;
    let mut out = Vec::with_capacity(d.batch * d.channels);
    for n in 0..d.batch {
        let mut acc = vec![0.0f64; d.channels];
        for px in input.item(n).chunks_exact(d.channels) {
            for (a, v) in acc.iter_mut().zip(px) {
                *a += v.as_f64();
            }
        }
        out.extend(acc.into_iter().map(|a| T::from_f64_lossy(a / area)));
    }
    Matrix::from_vec(d.batch, d.channels, out).expect("gap output sized from dims")
}

pub fn gap_backward<T: Real>(grad_out: &Matrix<T>, input_dims: Dims4) -> Result<Tensor4<T>> {
    if grad_out.rows() != input_dims.batch || grad_out.cols() != input_dims.channels {
        return Err(Error::shape(
            "gap_backward",
            format!("{}x{}", input_dims.batch, input_dims.channels),
            format!("{}x{}", grad_out.rows(), grad_out.cols()),
        ));
    }
    let scale = T::one() / T::from_usize(input_dims.height * input_dims.width).unwrap();
    let mut data = Vec::with_capacity(input_dims.len());
    for n in 0..input_dims.batch {
        let g: Vec<T> = grad_out.row(n).iter().map(|&v| v * scale).collect();
        for _ in 0..input_dims.height * input_dims.width {
            data.extend_from_slice(&g);
        }
    }
    Tensor4::from_vec(input_dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::testutil::{central_diff, random_vec, rel_err};

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor4::from_vec(Dims4::new(1, 1, 2, 2), vec![-1.0f32, 0.0, 2.0, -0.5]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.0, 0.0]);
        let g = relu_backward(&[1.0f32; 4], relu_forward(&x).data()).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn gap_of_constant_channels() {
        let d = Dims4::new(2, 3, 4, 3);
        let vals = [1.5f64, -2.0, 7.0];
        let data: Vec<f64> = (0..d.len()).map(|i| vals[i % 3]).collect();
        let g = gap_forward(&Tensor4::from_vec(d, data).unwrap());
        assert_eq!(g.row(0), &vals);
        assert_eq!(g.row(1), &vals);
    }

    #[test]
    fn gap_table_shape() {
        let x = Tensor4::<f32>::zeros(Dims4::new(1, 16, 16, 128)).unwrap();
        let g = gap_forward(&x);
        assert_eq!((g.rows(), g.cols()), (1, 128));
    }

    #[test]
    fn gap_backward_matches_finite_differences() {
        let d = Dims4::new(2, 3, 3, 2);
        let mut x = random_vec(1, d.len());
        let w = random_vec(2, 4);
        let grad = gap_backward(&Matrix::from_vec(2, 2, w.clone()).unwrap(), d).unwrap();
        for i in 0..x.len() {
            let fd = central_diff(&mut x, i, 1e-3, |xs| {
                let g = gap_forward(&Tensor4::from_vec(d, xs.to_vec()).unwrap());
                g.data().iter().zip(&w).map(|(a, b)| a * b).sum()
            });
            assert!(rel_err(grad.data()[i], fd) < 1e-4);
        }
    }

    #[test]
    fn gap_backward_rejects_wrong_shape() {
        let g = Matrix::<f32>::zeros(1, 3);
        assert!(gap_backward(&g, Dims4::new(1, 2, 2, 4)).is_err());
    }
}
