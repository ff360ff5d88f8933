use std::fmt;

use crate::error::{Error, Result};

use super::kernels::{self, Mat};

/// Dense row-major tensor of rank 1 to 3.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.dims)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > 3 {
        return Err(Error::Shape(format!("rank must be 1..=3, got dims {dims:?}")));
    }
    if dims.contains(&0) {
        return Err(Error::Shape(format!("dims must be positive, got {dims:?}")));
    }
    Ok(())
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        check_dims(dims).expect("invalid tensor dims");
        Self {
            dims: dims.to_vec(),
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::from_vec(&[n], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(mut self, dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        if dims.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape(format!("cannot reshape {:?} into {dims:?}", self.dims)));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    /// Element at a multi-index.
    pub fn at(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.dims.len(), "index rank mismatch");
        let mut flat = 0;
        for (i, (&ix, &d)) in index.iter().zip(&self.dims).enumerate() {
            assert!(ix < d, "index {ix} out of bounds for axis {i} of size {d}");
            flat = flat * d + ix;
        }
        self.data[flat]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Standard matrix product of `[m×k]` and `[k×n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 {
        return Err(Error::Shape(format!(
            "matmul needs rank-2 operands, got {:?} and {:?}",
            a.dims, b.dims
        )));
    }
    let (m, k) = (a.dims[0], a.dims[1]);
    let (k2, n) = (b.dims[0], b.dims[1]);
    if k != k2 {
        return Err(Error::Shape(format!(
            "matmul inner dims differ: {:?} · {:?} ({k} vs {k2})",
            a.dims, b.dims
        )));
    }
    let mut out = Tensor::zeros(&[m, n]);
    kernels::gemm_nn(m, n, k, Mat::new(&a.data, k), Mat::new(&b.data, n), &mut out.data, n, false);
    Ok(out)
}

/// Numerically stable softmax over a slice.
pub fn softmax_slice(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// `log Σ exp(x)` with max subtraction.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// Softmax over a rank-1 tensor.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.rank() != 1 {
        return Err(Error::Shape(format!("softmax expects a vector, got {:?}", logits.dims)));
    }
    if !logits.is_finite() {
        return Err(Error::Shape("softmax input contains non-finite values".into()));
    }
    let mut out = logits.zeros_like();
    softmax_slice(&logits.data, &mut out.data);
    Ok(out)
}

/// Softmax of a plain slice; empty input is a shape error.
pub fn softmax_vec(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Shape("softmax of an empty vector".into()));
    }
    let mut out = vec![0.0; logits.len()];
    softmax_slice(logits, &mut out);
    Ok(out)
}

/// Tolerance on the total mass accepted by [`sample_categorical`].
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

/// Inverse-CDF draw: the first index whose cumulative mass reaches a uniform
/// draw from `(0, total]`.
pub fn sample_categorical(probs: &[f64], rng: &mut super::Rng) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::Distribution("empty distribution".into()));
    }
    if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
        return Err(Error::Distribution(format!("entry {i} is {p}, must be a nonnegative finite value")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::Distribution(format!("probabilities sum to {total}, expected 1")));
    }
    let draw = (1.0 - rng.next_f64()) * total;
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if p > 0.0 && cumulative >= draw {
            return Ok(i);
        }
    }
    // Rounding left the last partial sum just under `draw`.
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Sigmoid,
    Tanh,
    Mul,
    Add,
}

/// Applies an elementwise kind. Unary kinds take one operand, binary kinds two
/// with equal dims.
pub fn elementwise(kind: Elementwise, operands: &[&Tensor]) -> Result<Tensor> {
    match kind {
        Elementwise::Sigmoid | Elementwise::Tanh => {
            let [x] = operands else {
                return Err(Error::Shape(format!("{kind:?} takes 1 operand, got {}", operands.len())));
            };
            Ok(match kind {
                Elementwise::Sigmoid => x.map(kernels::sigmoid),
                _ => x.map(f64::tanh),
            })
        }
        Elementwise::Mul | Elementwise::Add => {
            let [a, b] = operands else {
                return Err(Error::Shape(format!("{kind:?} takes 2 operands, got {}", operands.len())));
            };
            if a.dims != b.dims {
                return Err(Error::Shape(format!("{kind:?} operand dims differ: {:?} vs {:?}", a.dims, b.dims)));
            }
            let data = a
                .data
                .iter()
                .zip(&b.data)
                .map(|(x, y)| if kind == Elementwise::Mul { x * y } else { x + y })
                .collect();
            Ok(Tensor {
                dims: a.dims.clone(),
                data,
            })
        }
    }
}
