//! Dense row-major tensors.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense N-dimensional array of scalars in row-major order.
///
/// A tensor with an empty shape is a scalar holding exactly one element.
/// `grad`, when present, always has the same length as `data`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F: Scalar> {
    shape: Vec<usize>,
    data: Vec<F>,
    requires_grad: bool,
    grad: Option<Vec<F>>,
}

impl<F: Scalar> Tensor<F> {
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::InvalidOperand {
                op: "tensor",
                msg: format!(
                    "shape {:?} implies {} elements but {} were given",
                    shape,
                    numel,
                    data.len()
                ),
            });
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidOperand {
                op: "tensor",
                msg: format!("shape {shape:?} has a zero dimension"),
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![F::zero(); numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn full(shape: Vec<usize>, value: F) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; numel],
            requires_grad: false,
            grad: None,
        }
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar(value: F) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
            requires_grad: false,
            grad: None,
        }
    }

    /// Standard-normal draws scaled by `std`, consumed in row-major order.
    pub fn randn(shape: Vec<usize>, std: f64, rng: &mut crate::rng::Rng) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel)
            .map(|_| F::from(rng.standard_normal() * std).unwrap())
            .collect();
        Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        }
    }

    pub fn with_requires_grad(mut self, requires_grad: bool) -> Self {
        self.requires_grad = requires_grad;
        self
    }

    pub fn set_requires_grad(&mut self, requires_grad: bool) {
        self.requires_grad = requires_grad;
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.iter().product::<usize>() == 1
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[F]> {
        self.grad.as_deref()
    }

    pub(crate) fn set_grad(&mut self, grad: Vec<F>) {
        debug_assert_eq!(grad.len(), self.data.len());
        self.grad = Some(grad);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Interpret as (rows, cols).
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            _ => Err(Error::InvalidOperand {
                op,
                msg: format!("expected a 2-d tensor, got shape {:?}", self.shape),
            }),
        }
    }

    /// Interpret as (batch, channels, height, width).
    pub fn dims4(&self, op: &'static str) -> Result<(usize, usize, usize, usize)> {
        match self.shape.as_slice() {
            &[n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::InvalidOperand {
                op,
                msg: format!("expected an NCHW tensor, got shape {:?}", self.shape),
            }),
        }
    }

    /// Element accessor for 2-d tensors; intended for tests and small code paths.
    pub fn at2(&self, r: usize, c: usize) -> F {
        let cols = self.shape[1];
        self.data[r * cols + c]
    }

    /// Element accessor for 4-d tensors; intended for tests and small code paths.
    pub fn at4(&self, n: usize, c: usize, h: usize, w: usize) -> F {
        let (cc, hh, ww) = (self.shape[1], self.shape[2], self.shape[3]);
        self.data[((n * cc + c) * hh + h) * ww + w]
    }
}

/// Convolution parameters: kernel, bias, and the sliding-window geometry.
#[derive(Clone, Debug)]
pub struct ConvParams<F: Scalar> {
    pub kernel: Tensor<F>,
    pub bias: Tensor<F>,
    pub stride: usize,
    pub padding: usize,
}

impl<F: Scalar> ConvParams<F> {
    pub fn new(kernel: Tensor<F>, bias: Tensor<F>, stride: usize, padding: usize) -> Result<Self> {
        let (c_out, _, _, _) = kernel.dims4("conv2d")?;
        if bias.shape() != [c_out] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: kernel.shape().to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        if stride == 0 {
            return Err(Error::InvalidOperand {
                op: "conv2d",
                msg: "stride must be positive".into(),
            });
        }
        Ok(ConvParams {
            kernel,
            bias,
            stride,
            padding,
        })
    }

    /// Output spatial size along one axis, or an error when it would be empty.
    pub fn out_size(&self, input: usize) -> Result<usize> {
        let k = self.kernel.shape()[2].max(self.kernel.shape()[3]);
        conv_out_size(input, k, self.stride, self.padding)
    }
}

/// floor((in + 2*padding - k)/stride) + 1, erroring when no window fits.
pub fn conv_out_size(input: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = input + 2 * padding;
    if padded < k {
        return Err(Error::InvalidOperand {
            op: "conv2d",
            msg: format!(
                "kernel size {k} does not fit input {input} with padding {padding}"
            ),
        });
    }
    Ok((padded - k) / stride + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_product_must_match_data_len() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f64>::new(vec![0, 3], vec![]).is_err());
    }

    #[test]
    fn scalar_has_one_element_and_empty_shape() {
        let s = Tensor::scalar(4.0f64);
        assert!(s.is_scalar());
        assert_eq!(s.numel(), 1);
        assert!(s.shape().is_empty());
    }

    #[test]
    fn conv_out_size_formula() {
        // floor((5 + 2*1 - 3)/2) + 1 = 3
        assert_eq!(conv_out_size(5, 3, 2, 1).unwrap(), 3);
        assert_eq!(conv_out_size(8, 3, 1, 1).unwrap(), 8);
        assert!(conv_out_size(1, 3, 1, 0).is_err());
    }
}
