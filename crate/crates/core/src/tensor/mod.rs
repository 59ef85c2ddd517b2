//! Dense arrays and the layer primitives used by the network.
//!
//! There is no autodiff graph: every layer exposes a forward function and an
//! explicit backward function returning the gradients of a scalar loss given
//! the gradient flowing into the layer's output.
//!
//! All primitives are generic over [`Real`] so the same code runs in `f32`
//! for training and in `f64` for finite-difference gradient checks.

mod activation;
mod batchnorm;
pub(crate) mod conv;
mod linear;
mod loss;

use std::fmt;

use crate::error::{Error, Result};

pub use activation::{gap_backward, gap_forward, relu_backward, relu_forward, relu_inplace};
pub use batchnorm::{
    batchnorm_backward, batchnorm_eval_backward, batchnorm_forward, BatchNormCache, BatchNormMode, BatchNormState,
};
pub use conv::{
    conv2d_backward, conv2d_backward_reference, conv2d_forward, conv2d_forward_reference, same_padding, ConvGrads,
    ConvLayerState, SamePadding, CONV_KERNEL, CONV_STRIDE,
};
pub use linear::{fc_backward, fc_forward, Linear, LinearGrads};
pub use loss::softmax_cross_entropy;

/// Floating point element type of tensors and parameters.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + std::iter::Sum
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// `c = alpha * a * b + beta * c` for strided row/column-major operands.
    ///
    /// `a` is `m x k`, `b` is `k x n`, `c` is `m x n`; strides are in elements.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        beta: Self,
        c: &mut [Self],
        c_strides: (usize, usize),
    );

    fn from_f64_lossy(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("f64 converts to any Real")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("Real converts to f64")
    }
}

fn check_gemm_bounds(
    m: usize,
    k: usize,
    n: usize,
    a: usize,
    (rsa, csa): (usize, usize),
    b: usize,
    (rsb, csb): (usize, usize),
    c: usize,
    (rsc, csc): (usize, usize),
) {
    let extent = |rows: usize, cols: usize, rs: usize, cs: usize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs + (cols - 1) * cs + 1
        }
    };
    assert!(extent(m, k, rsa, csa) <= a, "gemm: lhs out of bounds");
    assert!(extent(k, n, rsb, csb) <= b, "gemm: rhs out of bounds");
    assert!(extent(m, n, rsc, csc) <= c, "gemm: output out of bounds");
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (usize, usize),
                b: &[Self],
                b_strides: (usize, usize),
                beta: Self,
                c: &mut [Self],
                c_strides: (usize, usize),
            ) {
                check_gemm_bounds(
                    m,
                    k,
                    n,
                    a.len(),
                    a_strides,
                    b.len(),
                    b_strides,
                    c.len(),
                    c_strides,
                );
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every operand extent was bounds-checked above and the
                // output does not alias the inputs (distinct borrows).
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0 as isize,
                        a_strides.1 as isize,
                        b.as_ptr(),
                        b_strides.0 as isize,
                        b_strides.1 as isize,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0 as isize,
                        c_strides.1 as isize,
                    );
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

/// Dimensions of a [`Tensor4`] in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Dims4 {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Dims4 {
    pub const fn new(batch: usize, height: usize, width: usize, channels: usize) -> Self {
        Self {
            batch,
            height,
            width,
            channels,
        }
    }

    pub const fn len(&self) -> usize {
        self.batch * self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements in one batch item.
    pub const fn item_len(&self) -> usize {
        self.height * self.width * self.channels
    }
}

impl fmt::Display for Dims4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}x{}x{})", self.batch, self.height, self.width, self.channels)
    }
}

/// Batch-height-width-channels tensor, row-major.
#[derive(Clone, PartialEq)]
pub struct Tensor4<T = f32> {
    dims: Dims4,
    data: Vec<T>,
}

impl<T: Real> Tensor4<T> {
    pub fn zeros(dims: Dims4) -> Result<Self> {
        Self::from_vec(dims, vec![T::zero(); dims.len()])
    }

    pub fn from_vec(dims: Dims4, data: Vec<T>) -> Result<Self> {
        if dims.batch == 0 || dims.height == 0 || dims.width == 0 || dims.channels == 0 {
            return Err(Error::shape("tensor", "all dims >= 1", dims));
        }
        if data.len() != dims.len() {
            return Err(Error::shape(
                "tensor",
                format!("{} elements for {dims}", dims.len()),
                data.len(),
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn filled(dims: Dims4, value: T) -> Result<Self> {
        Self::from_vec(dims, vec![value; dims.len()])
    }

    pub fn dims(&self) -> Dims4 {
        self.dims
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn item(&self, n: usize) -> &[T] {
        let len = self.dims.item_len();
        &self.data[n * len..(n + 1) * len]
    }

    #[inline]
    pub fn index(&self, n: usize, y: usize, x: usize, c: usize) -> usize {
        let d = self.dims;
        ((n * d.height + y) * d.width + x) * d.channels + c
    }

    #[inline]
    pub fn at(&self, n: usize, y: usize, x: usize, c: usize) -> T {
        self.data[self.index(n, y, x, c)]
    }

    pub fn cast<U: Real>(&self) -> Tensor4<U> {
        Tensor4 {
            dims: self.dims,
            data: self.data.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect(),
        }
    }
}

impl<T> fmt::Debug for Tensor4<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor4")
            .field("dims", &self.dims)
            .field("len", &self.data.len())
            .finish()
    }
}

/// Row-major `rows x cols` matrix; rows index batch items.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T = f32> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "matrix",
                format!("{rows}x{cols}"),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}
