use crate::error::{Error, Result};
use crate::numerics::kernels::{self, gemm_nn, gemm_nt, gemm_tn, Mat};
use crate::numerics::{Rng, Tensor};

use super::glorot_uniform;

/// GRU cell with gate blocks ordered (update, reset, candidate). The reset
/// gate scales the previous state before the candidate's recurrent product:
/// `h̃ = tanh(x·Wx + (r⊙h)·Wh + b)`, `h' = z⊙h + (1−z)⊙h̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub input_kernel: Tensor,
    pub recurrent_kernel: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct GruTape {
    pub(crate) len: usize,
    pub(crate) batch: usize,
    pub(crate) inputs: Vec<f64>,
    /// Activated (z, r, h̃) per position, `[L·B × 3H]`.
    pub(crate) gates: Vec<f64>,
    pub(crate) reset_hidden: Vec<f64>,
    pub(crate) hidden: Vec<f64>,
}

pub(crate) struct GruScan {
    pub hidden: Vec<f64>,
    pub last_h: Vec<f64>,
    pub tape: Option<GruTape>,
}

impl GruCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input_kernel: Tensor::zeros(&[input, 3 * hidden]),
            recurrent_kernel: Tensor::zeros(&[hidden, 3 * hidden]),
            bias: Tensor::zeros(&[3 * hidden]),
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut cell = Self::zeros(input, hidden);
        glorot_uniform(&mut cell.input_kernel, rng);
        glorot_uniform(&mut cell.recurrent_kernel, rng);
        cell
    }

    pub fn input_size(&self) -> usize {
        self.input_kernel.dims()[0]
    }

    pub fn hidden_size(&self) -> usize {
        self.recurrent_kernel.dims()[0]
    }

    pub fn param_count(&self) -> usize {
        self.input_kernel.len() + self.recurrent_kernel.len() + self.bias.len()
    }

    pub fn tensors(&self) -> [&Tensor; 3] {
        [&self.input_kernel, &self.recurrent_kernel, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 3] {
        [&mut self.input_kernel, &mut self.recurrent_kernel, &mut self.bias]
    }

    /// One timestep on `x: [batch × E_in]` with `h: [batch × H]`.
    pub fn step(&self, x: &Tensor, h: &Tensor) -> Result<Tensor> {
        let (e, hs) = (self.input_size(), self.hidden_size());
        let batch = x.dims()[0];
        if x.rank() != 2 || x.dims()[1] != e {
            return Err(Error::Shape(format!("gru input must be [batch × {e}], got {:?}", x.dims())));
        }
        if h.dims() != [batch, hs] {
            return Err(Error::Shape(format!("gru state must be [{batch} × {hs}], got {:?}", h.dims())));
        }
        let out = self.scan(x.data(), 1, batch, Some(h.data()), false);
        Tensor::from_vec(&[batch, hs], out.last_h)
    }

    pub(crate) fn scan(&self, inputs: &[f64], len: usize, batch: usize, initial: Option<&[f64]>, record: bool) -> GruScan {
        let (e, hs) = (self.input_size(), self.hidden_size());
        let g = 3 * hs;
        let rows = len * batch;
        let w_h = self.recurrent_kernel.data();
        let mut pre = vec![0.0; rows * g];
        gemm_nn(rows, g, e, Mat::new(inputs, e), Mat::new(self.input_kernel.data(), g), &mut pre, g, false);
        kernels::add_row_bias(&mut pre, self.bias.data());

        let mut h = initial.map_or_else(|| vec![0.0; batch * hs], <[f64]>::to_vec);
        let mut hidden = vec![0.0; rows * hs];
        let mut reset_hidden_all = if record { vec![0.0; rows * hs] } else { Vec::new() };
        let mut rh = vec![0.0; batch * hs];

        for t in 0..len {
            let a = &mut pre[t * batch * g..(t + 1) * batch * g];
            gemm_nn(batch, 2 * hs, hs, Mat::new(&h, hs), Mat::new(w_h, g), a, g, true);
            for b in 0..batch {
                for j in 0..hs {
                    let z = kernels::sigmoid(a[b * g + j]);
                    let r = kernels::sigmoid(a[b * g + hs + j]);
                    a[b * g + j] = z;
                    a[b * g + hs + j] = r;
                    rh[b * hs + j] = r * h[b * hs + j];
                }
            }
            gemm_nn(batch, hs, hs, Mat::new(&rh, hs), Mat::new(&w_h[2 * hs..], g), &mut a[2 * hs..], g, true);
            for b in 0..batch {
                for j in 0..hs {
                    let n = a[b * g + 2 * hs + j].tanh();
                    a[b * g + 2 * hs + j] = n;
                    let z = a[b * g + j];
                    let k = b * hs + j;
                    h[k] = z * h[k] + (1.0 - z) * n;
                }
            }
            hidden[t * batch * hs..(t + 1) * batch * hs].copy_from_slice(&h);
            if record {
                reset_hidden_all[t * batch * hs..(t + 1) * batch * hs].copy_from_slice(&rh);
            }
        }

        let tape = record.then(|| GruTape {
            len,
            batch,
            inputs: inputs.to_vec(),
            gates: pre,
            reset_hidden: reset_hidden_all,
            hidden: hidden.clone(),
        });
        GruScan {
            hidden,
            last_h: h,
            tape,
        }
    }

    pub(crate) fn backward(&self, tape: &GruTape, d_hidden: &[f64], grad: &mut GruCell) -> Vec<f64> {
        let (e, hs) = (self.input_size(), self.hidden_size());
        let g = 3 * hs;
        let (len, batch) = (tape.len, tape.batch);
        let rows = len * batch;
        let block = batch * hs;
        let w_h = self.recurrent_kernel.data();

        let mut d_pre = vec![0.0; rows * g];
        let mut h_prev_all = vec![0.0; rows * hs];
        let mut dh_next = vec![0.0; block];
        let mut d_rh = vec![0.0; block];
        let zeros = vec![0.0; block];

        for t in (0..len).rev() {
            let h_prev = if t == 0 {
                &zeros[..]
            } else {
                &tape.hidden[(t - 1) * block..t * block]
            };
            h_prev_all[t * block..(t + 1) * block].copy_from_slice(h_prev);
            let gates = &tape.gates[t * batch * g..(t + 1) * batch * g];
            let dh_out = &d_hidden[t * block..(t + 1) * block];
            let da = &mut d_pre[t * batch * g..(t + 1) * batch * g];

            // Candidate pre-activation and the direct path to h_prev.
            for b in 0..batch {
                for j in 0..hs {
                    let k = b * hs + j;
                    let (z, n) = (gates[b * g + j], gates[b * g + 2 * hs + j]);
                    let dh = dh_out[k] + dh_next[k];
                    da[b * g + j] = dh * (h_prev[k] - n) * z * (1.0 - z);
                    da[b * g + 2 * hs + j] = dh * (1.0 - z) * (1.0 - n * n);
                    dh_next[k] = dh * z;
                }
            }
            gemm_nt(batch, hs, hs, Mat::new(&da[2 * hs..], g), Mat::new(&w_h[2 * hs..], g), &mut d_rh, hs, false);
            for b in 0..batch {
                for j in 0..hs {
                    let k = b * hs + j;
                    let r = gates[b * g + hs + j];
                    da[b * g + hs + j] = d_rh[k] * h_prev[k] * r * (1.0 - r);
                    dh_next[k] += d_rh[k] * r;
                }
            }
            gemm_nt(batch, hs, 2 * hs, Mat::new(da, g), Mat::new(w_h, g), &mut dh_next, hs, true);
        }

        let dw_h = grad.recurrent_kernel.data_mut();
        gemm_tn(hs, 2 * hs, rows, Mat::new(&h_prev_all, hs), Mat::new(&d_pre, g), dw_h, g, true);
        gemm_tn(
            hs,
            hs,
            rows,
            Mat::new(&tape.reset_hidden, hs),
            Mat::new(&d_pre[2 * hs..], g),
            &mut dw_h[2 * hs..],
            g,
            true,
        );
        gemm_tn(e, g, rows, Mat::new(&tape.inputs, e), Mat::new(&d_pre, g), grad.input_kernel.data_mut(), g, true);
        kernels::accumulate_column_sums(&d_pre, grad.bias.data_mut());

        let mut d_inputs = vec![0.0; rows * e];
        gemm_nt(rows, e, g, Mat::new(&d_pre, g), Mat::new(self.input_kernel.data(), g), &mut d_inputs, e, false);
        d_inputs
    }
}
