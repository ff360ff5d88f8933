use crate::error::{Error, Result};
use crate::numerics::kernels::{self, gemm_nn, gemm_nt, gemm_tn, Mat};
use crate::numerics::{Rng, Tensor};

use super::glorot_uniform;

/// LSTM cell with gate blocks ordered (input, forget, candidate, output)
/// along the `4H` axis of every kernel and the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub input_kernel: Tensor,
    pub recurrent_kernel: Tensor,
    pub bias: Tensor,
}

/// Hidden and cell state, each `[batch × H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        Self {
            h: Tensor::zeros(&[batch, hidden]),
            c: Tensor::zeros(&[batch, hidden]),
        }
    }
}

/// Activations cached by a training-mode scan.
#[derive(Debug, Clone)]
pub struct LstmTape {
    pub(crate) len: usize,
    pub(crate) batch: usize,
    pub(crate) reverse: bool,
    pub(crate) inputs: Vec<f64>,
    /// Activated gates per position, `[L·B × 4H]`.
    pub(crate) gates: Vec<f64>,
    pub(crate) cells: Vec<f64>,
    pub(crate) hidden: Vec<f64>,
}

pub(crate) struct ScanOutput {
    pub hidden: Vec<f64>,
    pub last_h: Vec<f64>,
    pub last_c: Vec<f64>,
    pub tape: Option<LstmTape>,
}

impl LstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input_kernel: Tensor::zeros(&[input, 4 * hidden]),
            recurrent_kernel: Tensor::zeros(&[hidden, 4 * hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Glorot-uniform kernels, zero bias, optionally forget-gate bias 1.
    pub fn init(input: usize, hidden: usize, forget_bias_one: bool, rng: &mut Rng) -> Self {
        let mut cell = Self::zeros(input, hidden);
        glorot_uniform(&mut cell.input_kernel, rng);
        glorot_uniform(&mut cell.recurrent_kernel, rng);
        if forget_bias_one {
            cell.bias.data_mut()[hidden..2 * hidden].fill(1.0);
        }
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

    /// One timestep on `x: [batch × E_in]`.
    pub fn step(&self, x: &Tensor, state: &LstmState) -> Result<(Tensor, LstmState)> {
        let (e, h) = (self.input_size(), self.hidden_size());
        let batch = x.dims()[0];
        if x.rank() != 2 || x.dims()[1] != e {
            return Err(Error::Shape(format!("lstm input must be [batch × {e}], got {:?}", x.dims())));
        }
        for (name, t) in [("h", &state.h), ("c", &state.c)] {
            if t.dims() != [batch, h] {
                return Err(Error::Shape(format!(
                    "lstm state {name} must be [{batch} × {h}], got {:?}",
                    t.dims()
                )));
            }
        }
        let out = self.scan(x.data(), 1, batch, false, Some((state.h.data(), state.c.data())), false);
        let h_new = Tensor::from_vec(&[batch, h], out.last_h)?;
        let state = LstmState {
            h: h_new.clone(),
            c: Tensor::from_vec(&[batch, h], out.last_c)?,
        };
        Ok((h_new, state))
    }

    /// Scans a time-major `[L·B × E_in]` sequence. With `reverse` the scan runs
    /// from the last position to the first; outputs stay at their positions.
    pub(crate) fn scan(
        &self,
        inputs: &[f64],
        len: usize,
        batch: usize,
        reverse: bool,
        initial: Option<(&[f64], &[f64])>,
        record: bool,
    ) -> ScanOutput {
        let (e, hs) = (self.input_size(), self.hidden_size());
        let g = 4 * hs;
        let rows = len * batch;
        let mut pre = vec![0.0; rows * g];
        gemm_nn(rows, g, e, Mat::new(inputs, e), Mat::new(self.input_kernel.data(), g), &mut pre, g, false);
        kernels::add_row_bias(&mut pre, self.bias.data());

        let (mut h, mut c) = match initial {
            Some((h0, c0)) => (h0.to_vec(), c0.to_vec()),
            None => (vec![0.0; batch * hs], vec![0.0; batch * hs]),
        };
        let mut hidden = vec![0.0; rows * hs];
        let mut cells = if record { vec![0.0; rows * hs] } else { Vec::new() };

        for step in 0..len {
            let t = if reverse { len - 1 - step } else { step };
            let a = &mut pre[t * batch * g..(t + 1) * batch * g];
            gemm_nn(batch, g, hs, Mat::new(&h, hs), Mat::new(self.recurrent_kernel.data(), g), a, g, true);
            for b in 0..batch {
                let gate = &mut a[b * g..(b + 1) * g];
                let (c_row, h_row) = (&mut c[b * hs..(b + 1) * hs], &mut h[b * hs..(b + 1) * hs]);
                for j in 0..hs {
                    let i_g = kernels::sigmoid(gate[j]);
                    let f_g = kernels::sigmoid(gate[hs + j]);
                    let c_g = gate[2 * hs + j].tanh();
                    let o_g = kernels::sigmoid(gate[3 * hs + j]);
                    gate[j] = i_g;
                    gate[hs + j] = f_g;
                    gate[2 * hs + j] = c_g;
                    gate[3 * hs + j] = o_g;
                    c_row[j] = f_g * c_row[j] + i_g * c_g;
                    h_row[j] = o_g * c_row[j].tanh();
                }
            }
            hidden[t * batch * hs..(t + 1) * batch * hs].copy_from_slice(&h);
            if record {
                cells[t * batch * hs..(t + 1) * batch * hs].copy_from_slice(&c);
            }
        }

        let tape = record.then(|| LstmTape {
            len,
            batch,
            reverse,
            inputs: inputs.to_vec(),
            gates: pre,
            cells,
            hidden: hidden.clone(),
        });
        ScanOutput {
            hidden,
            last_h: h,
            last_c: c,
            tape,
        }
    }

    /// Backpropagates `d_hidden` (`[L·B × H]`, time-major) through a recorded
    /// scan. Parameter gradients accumulate into `grad`; returns the input
    /// gradient `[L·B × E_in]`.
    pub(crate) fn backward(&self, tape: &LstmTape, d_hidden: &[f64], grad: &mut LstmCell) -> Vec<f64> {
        let (e, hs) = (self.input_size(), self.hidden_size());
        let g = 4 * hs;
        let (len, batch) = (tape.len, tape.batch);
        let rows = len * batch;
        let block = batch * hs;

        // Position whose state feeds position t, in scan order.
        let prev = |t: usize| -> Option<usize> {
            if tape.reverse {
                (t + 1 < len).then_some(t + 1)
            } else {
                t.checked_sub(1)
            }
        };

        let mut d_pre = vec![0.0; rows * g];
        let mut h_prev_all = vec![0.0; rows * hs];
        let mut dh_next = vec![0.0; block];
        let mut dc_next = vec![0.0; block];
        let zeros = vec![0.0; block];

        for step in (0..len).rev() {
            let t = if tape.reverse { len - 1 - step } else { step };
            let c_prev = match prev(t) {
                Some(p) => &tape.cells[p * block..(p + 1) * block],
                None => &zeros[..],
            };
            if let Some(p) = prev(t) {
                h_prev_all[t * block..(t + 1) * block].copy_from_slice(&tape.hidden[p * block..(p + 1) * block]);
            }
            let gates = &tape.gates[t * batch * g..(t + 1) * batch * g];
            let cells = &tape.cells[t * block..(t + 1) * block];
            let dh_out = &d_hidden[t * block..(t + 1) * block];
            let da = &mut d_pre[t * batch * g..(t + 1) * batch * g];
            for b in 0..batch {
                for j in 0..hs {
                    let k = b * hs + j;
                    let gate = &gates[b * g..(b + 1) * g];
                    let (i_g, f_g, c_g, o_g) = (gate[j], gate[hs + j], gate[2 * hs + j], gate[3 * hs + j]);
                    let tanh_c = cells[k].tanh();
                    let dh = dh_out[k] + dh_next[k];
                    let dc = dc_next[k] + dh * o_g * (1.0 - tanh_c * tanh_c);
                    let row = &mut da[b * g..(b + 1) * g];
                    row[j] = dc * c_g * i_g * (1.0 - i_g);
                    row[hs + j] = dc * c_prev[k] * f_g * (1.0 - f_g);
                    row[2 * hs + j] = dc * i_g * (1.0 - c_g * c_g);
                    row[3 * hs + j] = dh * tanh_c * o_g * (1.0 - o_g);
                    dc_next[k] = dc * f_g;
                }
            }
            gemm_nt(batch, hs, g, Mat::new(da, g), Mat::new(self.recurrent_kernel.data(), g), &mut dh_next, hs, false);
        }

        gemm_tn(e, g, rows, Mat::new(&tape.inputs, e), Mat::new(&d_pre, g), grad.input_kernel.data_mut(), g, true);
        gemm_tn(hs, g, rows, Mat::new(&h_prev_all, hs), Mat::new(&d_pre, g), grad.recurrent_kernel.data_mut(), g, true);
        kernels::accumulate_column_sums(&d_pre, grad.bias.data_mut());

        let mut d_inputs = vec![0.0; rows * e];
        gemm_nt(rows, e, g, Mat::new(&d_pre, g), Mat::new(self.input_kernel.data(), g), &mut d_inputs, e, false);
        d_inputs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_fixed_point() {
        let cell = LstmCell::zeros(3, 2);
        let x = Tensor::from_vec(&[1, 3], vec![0.3, -1.0, 2.0]).unwrap();
        let (h, s) = cell.step(&x, &LstmState::zeros(1, 2)).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
        assert!(s.c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_weights_halve_the_cell() {
        let cell = LstmCell::zeros(2, 3);
        let x = Tensor::from_vec(&[1, 2], vec![1.0, -1.0]).unwrap();
        let c0 = vec![0.8, -2.0, 0.1];
        let state = LstmState {
            h: Tensor::zeros(&[1, 3]),
            c: Tensor::from_vec(&[1, 3], c0.clone()).unwrap(),
        };
        let (h, s) = cell.step(&x, &state).unwrap();
        for (j, &c) in c0.iter().enumerate() {
            assert!((s.c.data()[j] - 0.5 * c).abs() < 1e-15);
            assert!((h.data()[j] - 0.5 * (0.5 * c).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn step_rejects_bad_shapes() {
        let cell = LstmCell::zeros(3, 2);
        let x = Tensor::zeros(&[1, 4]);
        assert!(matches!(cell.step(&x, &LstmState::zeros(1, 2)), Err(Error::Shape(_))));
        let x = Tensor::zeros(&[2, 3]);
        assert!(matches!(cell.step(&x, &LstmState::zeros(1, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn forget_bias_initialised_to_one() {
        let cell = LstmCell::init(3, 4, true, &mut Rng::new(1));
        assert_eq!(&cell.bias.data()[4..8], &[1.0; 4]);
        assert!(cell.bias.data()[..4].iter().chain(&cell.bias.data()[8..]).all(|&b| b == 0.0));
        let plain = LstmCell::init(3, 4, false, &mut Rng::new(1));
        assert!(plain.bias.data().iter().all(|&b| b == 0.0));
    }
}
