use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

use super::glorot_uniform;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingLayer {
    /// `[V × E]`
    pub table: Tensor,
}

impl EmbeddingLayer {
    pub fn zeros(vocab: usize, dim: usize) -> Self {
        Self {
            table: Tensor::zeros(&[vocab, dim]),
        }
    }

    pub fn init(vocab: usize, dim: usize, rng: &mut Rng) -> Self {
        let mut layer = Self::zeros(vocab, dim);
        glorot_uniform(&mut layer.table, rng);
        layer
    }

    pub fn vocab_size(&self) -> usize {
        self.table.dims()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.dims()[1]
    }

    pub(crate) fn check_indices(&self, indices: &[usize]) -> Result<()> {
        let v = self.vocab_size();
        match indices.iter().position(|&i| i >= v) {
            Some(pos) => Err(Error::Vocabulary(format!(
                "index {} at position {pos} is outside the vocabulary of size {v}",
                indices[pos]
            ))),
            None => Ok(()),
        }
    }

    /// Looks up batch-major `[batch × len]` indices into `[batch × len × E]`.
    pub fn forward(&self, indices: &[usize], batch: usize, len: usize) -> Result<Tensor> {
        if indices.len() != batch * len {
            return Err(Error::Shape(format!(
                "expected {batch}×{len} indices, got {}",
                indices.len()
            )));
        }
        self.check_indices(indices)?;
        Tensor::from_vec(&[batch, len, self.dim()], self.gather(indices))
    }

    /// Rows of the table for each index, concatenated.
    pub(crate) fn gather(&self, indices: &[usize]) -> Vec<f64> {
        let e = self.dim();
        let table = self.table.data();
        let mut out = Vec::with_capacity(indices.len() * e);
        for &i in indices {
            out.extend_from_slice(&table[i * e..(i + 1) * e]);
        }
        out
    }

    /// Scatter-adds row gradients into `grad` at the looked-up indices.
    pub(crate) fn backward(&self, indices: &[usize], d_out: &[f64], grad: &mut EmbeddingLayer) {
        let e = self.dim();
        let table = grad.table.data_mut();
        for (&i, row) in indices.iter().zip(d_out.chunks_exact(e)) {
            for (t, d) in table[i * e..(i + 1) * e].iter_mut().zip(row) {
                *t += d;
            }
        }
    }
}
