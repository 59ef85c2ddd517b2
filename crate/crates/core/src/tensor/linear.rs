use super::{Matrix, Real};
use crate::error::{Error, Result};

/// Fully connected layer `y = x W + b` with `W` stored `[inputs x outputs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T = f32> {
    inputs: usize,
    outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct LinearGrads<T = f32> {
    pub input: Matrix<T>,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn from_parts(inputs: usize, outputs: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(Error::shape(
                "linear layer",
                format!("{inputs}x{outputs} weights, {outputs} bias"),
                format!("{} weights, {} bias", weights.len(), bias.len()),
            ));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }
}

pub fn fc_forward<T: Real>(input: &Matrix<T>, layer: &Linear<T>) -> Result<Matrix<T>> {
    if input.cols() != layer.inputs {
        return Err(Error::shape(
            "fc_forward",
            format!("{} input features", layer.inputs),
            format!("{}x{}", input.rows(), input.cols()),
        ));
    }
    let mut out = Matrix::zeros(input.rows(), layer.outputs);
    for r in 0..input.rows() {
        out.data_mut()[r * layer.outputs..(r + 1) * layer.outputs].copy_from_slice(&layer.bias);
    }
    T::gemm(
        input.rows(),
        layer.inputs,
        layer.outputs,
        T::one(),
        input.data(),
        (layer.inputs, 1),
        &layer.weights,
        (layer.outputs, 1),
        T::one(),
        out.data_mut(),
        (layer.outputs, 1),
    );
    Ok(out)
}

pub fn fc_backward<T: Real>(input: &Matrix<T>, layer: &Linear<T>, grad_out: &Matrix<T>) -> Result<LinearGrads<T>> {
    if grad_out.rows() != input.rows() || grad_out.cols() != layer.outputs {
        return Err(Error::shape(
            "fc_backward",
            format!("{}x{}", input.rows(), layer.outputs),
            format!("{}x{}", grad_out.rows(), grad_out.cols()),
        ));
    }
    if input.cols() != layer.inputs {
        return Err(Error::shape("fc_backward", layer.inputs, input.cols()));
    }
    let (rows, i, o) = (input.rows(), layer.inputs, layer.outputs);
    let mut weights = vec![T::zero(); i * o];
    T::gemm(
        i,
        rows,
        o,
        T::one(),
        input.data(),
        (1, i),
        grad_out.data(),
        (o, 1),
        T::zero(),
        &mut weights,
        (o, 1),
    );
    let mut bias = vec![T::zero(); o];
    for r in 0..rows {
        for (b, g) in bias.iter_mut().zip(grad_out.row(r)) {
            *b += *g;
        }
    }
    let mut grad_in = Matrix::zeros(rows, i);
    T::gemm(
        rows,
        o,
        i,
        T::one(),
        grad_out.data(),
        (o, 1),
        &layer.weights,
        (1, o),
        T::zero(),
        grad_in.data_mut(),
        (i, 1),
    );
    Ok(LinearGrads {
        input: grad_in,
        weights,
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::testutil::{central_diff, random_vec, rel_err};

    #[test]
    fn affine_map() {
        let l = Linear::from_parts(2, 1, vec![2.0f64, -1.0], vec![0.5]).unwrap();
        let x = Matrix::from_vec(2, 2, vec![1.0, 1.0, 3.0, 4.0]).unwrap();
        assert_eq!(fc_forward(&x, &l).unwrap().data(), &[1.5, 2.5]);
    }

    #[test]
    fn rejects_wrong_width() {
        let l = Linear::<f32>::zeros(3, 2);
        assert!(fc_forward(&Matrix::zeros(1, 4), &l).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (rows, i, o) = (3, 4, 5);
        let mut layer = Linear::from_parts(i, o, random_vec(1, i * o), random_vec(2, o)).unwrap();
        let mut x = random_vec(3, rows * i);
        let w = random_vec(4, rows * o);
        let input = Matrix::from_vec(rows, i, x.clone()).unwrap();
        let grads = fc_backward(&input, &layer, &Matrix::from_vec(rows, o, w.clone()).unwrap()).unwrap();
        let loss = |x: &[f64], l: &Linear<f64>| -> f64 {
            let y = fc_forward(&Matrix::from_vec(rows, i, x.to_vec()).unwrap(), l).unwrap();
            y.data().iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        for k in 0..x.len() {
            let fd = central_diff(&mut x, k, 1e-3, |xs| loss(xs, &layer));
            assert!(rel_err(grads.input.data()[k], fd) < 1e-4);
        }
        let mut wts = layer.weights.clone();
        for k in 0..wts.len() {
            let fd = central_diff(&mut wts, k, 1e-3, |ws| {
                let mut l = layer.clone();
                l.weights = ws.to_vec();
                loss(&x, &l)
            });
            assert!(rel_err(grads.weights[k], fd) < 1e-4);
        }
        let mut b = layer.bias.clone();
        for k in 0..o {
            let fd = central_diff(&mut b, k, 1e-3, |bs| {
                layer.bias = bs.to_vec();
                loss(&x, &layer)
            });
            assert!(rel_err(grads.bias[k], fd) < 1e-4);
        }
    }
}
