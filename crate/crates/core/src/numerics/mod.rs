//! Dense tensors, matrix kernels, probability helpers and the seeded RNG.

pub mod kernels;
mod rng;
mod tensor;

pub use rng::{derive_seed, Rng};
pub use tensor::{
    elementwise, log_sum_exp, matmul, sample_categorical, softmax, softmax_slice, softmax_vec, Elementwise, Tensor,
    DISTRIBUTION_TOLERANCE,
};
