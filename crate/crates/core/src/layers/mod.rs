//! Embedding, recurrent cells, dropout and the dense head, with hand-derived
//! backward passes.
//!
//! Sequences are handled internally in time-major layout (`[L·B × F]`, row
//! `t·B + b`); the public batch-level API is batch-major (`[B × L × F]`).

mod bidirectional;
mod dense;
mod dropout;
mod embedding;
mod gru;
mod lstm;
mod stack;

#[cfg(test)]
mod gradcheck;

pub use bidirectional::{BidirectionalLayer, BidirectionalTape};
pub use dense::DenseLayer;
pub use dropout::{check_rate, dropout_forward, DropoutMode};
pub use embedding::EmbeddingLayer;
pub use gru::{GruCell, GruTape};
pub use lstm::{LstmCell, LstmState, LstmTape};
pub use stack::{CellKind, ForwardMode, ForwardPass, LayerState, RecurrentLayer, RecurrentState, Stack, StackShape, Tape};

use crate::numerics::{Rng, Tensor};

/// Uniform in `±sqrt(6 / (fan_in + fan_out))` over a `[fan_in × fan_out]` kernel.
pub(crate) fn glorot_uniform(t: &mut Tensor, rng: &mut Rng) {
    let (fan_in, fan_out) = (t.dims()[0], t.dims()[1]);
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    t.data_mut().iter_mut().for_each(|v| *v = rng.uniform(-limit, limit));
}

/// `[B × L × F]` → `[L × B × F]`.
pub(crate) fn to_time_major<T: Copy>(x: &[T], batch: usize, len: usize, width: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    for t in 0..len {
        for b in 0..batch {
            let start = (b * len + t) * width;
            out.extend_from_slice(&x[start..start + width]);
        }
    }
    out
}

/// `[L × B × F]` → `[B × L × F]`.
pub(crate) fn to_batch_major<T: Copy>(x: &[T], batch: usize, len: usize, width: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    for b in 0..batch {
        for t in 0..len {
            let start = (t * batch + b) * width;
            out.extend_from_slice(&x[start..start + width]);
        }
    }
    out
}
