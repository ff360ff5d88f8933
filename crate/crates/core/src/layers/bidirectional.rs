use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

use super::lstm::{LstmCell, LstmTape};
use super::{to_batch_major, to_time_major};

/// Two LSTM cells scanning the same sequence in opposite directions, outputs
/// concatenated as `[forward H | backward H]`.
///
/// The backward direction at position `t` has read every input after `t`.
/// In next-character training those inputs are the targets, so this layer
/// sees the answer it is asked to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct BidirectionalLayer {
    pub forward_cell: LstmCell,
    pub backward_cell: LstmCell,
}

#[derive(Debug, Clone)]
pub struct BidirectionalTape {
    pub(crate) forward: LstmTape,
    pub(crate) backward: LstmTape,
}

pub(crate) struct BiScan {
    pub output: Vec<f64>,
    pub last_h: Vec<f64>,
    pub last_c: Vec<f64>,
    pub tape: Option<BidirectionalTape>,
}

impl BidirectionalLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            forward_cell: LstmCell::zeros(input, hidden),
            backward_cell: LstmCell::zeros(input, hidden),
        }
    }

    pub fn init(input: usize, hidden: usize, forget_bias_one: bool, rng: &mut Rng) -> Self {
        let forward_cell = LstmCell::init(input, hidden, forget_bias_one, rng);
        let backward_cell = LstmCell::init(input, hidden, forget_bias_one, rng);
        Self {
            forward_cell,
            backward_cell,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.forward_cell.hidden_size()
    }

    pub fn output_size(&self) -> usize {
        2 * self.hidden_size()
    }

    /// Runs both directions over `xs: [batch × L × E_in]` from zero state,
    /// returning `[batch × L × 2H]`. With `L == 1` the backward scan is a
    /// single step on the same input.
    pub fn forward(&self, xs: &Tensor) -> Result<Tensor> {
        let e = self.forward_cell.input_size();
        if xs.rank() != 3 || xs.dims()[2] != e {
            return Err(Error::Shape(format!(
                "bidirectional input must be [batch × L × {e}], got {:?}",
                xs.dims()
            )));
        }
        let (batch, len) = (xs.dims()[0], xs.dims()[1]);
        let inputs = to_time_major(xs.data(), batch, len, e);
        let out = self.scan(&inputs, len, batch, None, false);
        Tensor::from_vec(
            &[batch, len, self.output_size()],
            to_batch_major(&out.output, batch, len, self.output_size()),
        )
    }

    pub(crate) fn scan(
        &self,
        inputs: &[f64],
        len: usize,
        batch: usize,
        initial: Option<(&[f64], &[f64])>,
        record: bool,
    ) -> BiScan {
        let h = self.hidden_size();
        let fwd = self.forward_cell.scan(inputs, len, batch, false, initial, record);
        let bwd = self.backward_cell.scan(inputs, len, batch, true, None, record);
        let mut output = vec![0.0; len * batch * 2 * h];
        for ((row, f), b) in output
            .chunks_exact_mut(2 * h)
            .zip(fwd.hidden.chunks_exact(h))
            .zip(bwd.hidden.chunks_exact(h))
        {
            row[..h].copy_from_slice(f);
            row[h..].copy_from_slice(b);
        }
        let tape = match (fwd.tape, bwd.tape) {
            (Some(forward), Some(backward)) => Some(BidirectionalTape { forward, backward }),
            _ => None,
        };
        BiScan {
            output,
            last_h: fwd.last_h,
            last_c: fwd.last_c,
            tape,
        }
    }

    pub(crate) fn backward(&self, tape: &BidirectionalTape, d_out: &[f64], grad: &mut BidirectionalLayer) -> Vec<f64> {
        let h = self.hidden_size();
        let rows = d_out.len() / (2 * h);
        let mut d_fwd = Vec::with_capacity(rows * h);
        let mut d_bwd = Vec::with_capacity(rows * h);
        for row in d_out.chunks_exact(2 * h) {
            d_fwd.extend_from_slice(&row[..h]);
            d_bwd.extend_from_slice(&row[h..]);
        }
        let mut d_in = self.forward_cell.backward(&tape.forward, &d_fwd, &mut grad.forward_cell);
        let d_in_bwd = self.backward_cell.backward(&tape.backward, &d_bwd, &mut grad.backward_cell);
        d_in.iter_mut().zip(&d_in_bwd).for_each(|(a, b)| *a += b);
        d_in
    }
}
