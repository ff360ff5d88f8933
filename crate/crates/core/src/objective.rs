//! Sparse categorical cross-entropy and the RMSprop optimizer.

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, softmax_slice, Tensor};

/// Mean cross-entropy in nats per character over `count` predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub mean_loss: f64,
    pub count: usize,
}

fn check_targets(logits: &Tensor, targets: &[usize]) -> Result<usize> {
    let v = *logits.dims().last().expect("tensor has rank >= 1");
    if logits.len() != targets.len() * v || targets.is_empty() {
        return Err(Error::Shape(format!(
            "{} targets do not match logits of dims {:?}",
            targets.len(),
            logits.dims()
        )));
    }
    if let Some(position) = targets.iter().position(|&t| t >= v) {
        return Err(Error::Label {
            target: targets[position],
            position,
            classes: v,
        });
    }
    Ok(v)
}

/// `−(1/N) Σ log softmax(logits)[target]`, evaluated as `logsumexp − logit`.
/// `logits` is `[… × V]` with one row per target (row-major order).
pub fn ce_loss(logits: &Tensor, targets: &[usize]) -> Result<LossReport> {
    let v = check_targets(logits, targets)?;
    let total: f64 = logits
        .data()
        .chunks_exact(v)
        .zip(targets)
        .map(|(row, &t)| log_sum_exp(row) - row[t])
        .sum();
    Ok(LossReport {
        mean_loss: total / targets.len() as f64,
        count: targets.len(),
    })
}

/// `(softmax(logits) − onehot(target)) / N` per row.
pub fn ce_grad(logits: &Tensor, targets: &[usize]) -> Result<Tensor> {
    let v = check_targets(logits, targets)?;
    let n = targets.len() as f64;
    let mut grad = logits.zeros_like();
    for ((row, out), &t) in logits
        .data()
        .chunks_exact(v)
        .zip(grad.data_mut().chunks_exact_mut(v))
        .zip(targets)
    {
        softmax_slice(row, out);
        out[t] -= 1.0;
        out.iter_mut().for_each(|g| *g /= n);
    }
    Ok(grad)
}

/// Scales all gradients so their joint Euclidean norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.squared_norm()).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        grads.iter_mut().for_each(|g| g.scale(scale));
    }
    norm
}

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_RHO: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-7;

/// RMSprop accumulators plus hyperparameters.
///
/// The update is `V ← ρV + (1−ρ)g²`, `w ← w − α·g/√(V+ε)`. Some write-ups
/// put `α` in the denominator of the accumulator update instead; that form
/// mixes units and is not what the original lecture describes.
#[derive(Debug, Clone, PartialEq)]
pub struct RmspropState {
    pub accumulators: Vec<Tensor>,
    pub rho: f64,
    pub learning_rate: f64,
    pub epsilon: f64,
}

impl RmspropState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>, learning_rate: f64, rho: f64, epsilon: f64) -> Self {
        Self {
            accumulators: params.into_iter().map(Tensor::zeros_like).collect(),
            rho,
            learning_rate,
            epsilon,
        }
    }

    pub fn with_defaults<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        Self::new(params, DEFAULT_LEARNING_RATE, DEFAULT_RHO, DEFAULT_EPSILON)
    }
}

pub fn rmsprop_step(params: &mut [&mut Tensor], grads: &[&Tensor], state: &mut RmspropState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.accumulators.len() {
        return Err(Error::Shape(format!(
            "{} params, {} grads and {} accumulators",
            params.len(),
            grads.len(),
            state.accumulators.len()
        )));
    }
    for (i, ((p, g), v)) in params.iter().zip(grads).zip(&state.accumulators).enumerate() {
        if p.dims() != g.dims() || p.dims() != v.dims() {
            return Err(Error::Shape(format!(
                "parameter {i}: dims {:?}, gradient {:?}, accumulator {:?}",
                p.dims(),
                g.dims(),
                v.dims()
            )));
        }
        if !g.is_finite() {
            return Err(Error::Optimizer(format!("gradient of parameter {i} is not finite")));
        }
    }
    let (rho, lr, eps) = (state.rho, state.learning_rate, state.epsilon);
    for ((p, g), v) in params.iter_mut().zip(grads).zip(state.accumulators.iter_mut()) {
        for ((w, &gi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vi = rho * *vi + (1.0 - rho) * gi * gi;
            let denom = (*vi + eps).sqrt();
            if denom > 0.0 {
                *w -= lr * gi / denom;
            }
        }
    }
    Ok(())
}
