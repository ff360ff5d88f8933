use crate::error::{Error, Result};
use crate::numerics::kernels::{self, gemm_nn, gemm_nt, gemm_tn, Mat};
use crate::numerics::{Rng, Tensor};

use super::glorot_uniform;

/// Affine output projection `[… × F] → [… × V]`, no activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub kernel: Tensor,
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            kernel: Tensor::zeros(&[input, output]),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn init(input: usize, output: usize, rng: &mut Rng) -> Self {
        let mut layer = Self::zeros(input, output);
        glorot_uniform(&mut layer.kernel, rng);
        layer
    }

    pub fn input_size(&self) -> usize {
        self.kernel.dims()[0]
    }

    pub fn output_size(&self) -> usize {
        self.kernel.dims()[1]
    }

    /// Applies the layer to the last axis of `x`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.input_size();
        let last = *x.dims().last().expect("tensor has rank >= 1");
        if last != f {
            return Err(Error::Shape(format!(
                "dense layer expects last dim {f}, got dims {:?}",
                x.dims()
            )));
        }
        let mut dims = x.dims().to_vec();
        *dims.last_mut().unwrap() = self.output_size();
        Tensor::from_vec(&dims, self.apply(x.data(), x.len() / f))
    }

    pub(crate) fn apply(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let (f, v) = (self.input_size(), self.output_size());
        let mut out = vec![0.0; rows * v];
        gemm_nn(rows, v, f, Mat::new(x, f), Mat::new(self.kernel.data(), v), &mut out, v, false);
        kernels::add_row_bias(&mut out, self.bias.data());
        out
    }

    pub(crate) fn backward(&self, x: &[f64], d_out: &[f64], grad: &mut DenseLayer) -> Vec<f64> {
        let (f, v) = (self.input_size(), self.output_size());
        let rows = d_out.len() / v;
        gemm_tn(f, v, rows, Mat::new(x, f), Mat::new(d_out, v), grad.kernel.data_mut(), v, true);
        kernels::accumulate_column_sums(d_out, grad.bias.data_mut());
        let mut d_x = vec![0.0; rows * f];
        gemm_nt(rows, f, v, Mat::new(d_out, v), Mat::new(self.kernel.data(), v), &mut d_x, f, false);
        d_x
    }
}
