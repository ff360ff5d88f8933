//! Independent oracles shared by the integration and acceptance targets.
#![allow(dead_code)]

use charrnn::layers::{CellKind, ForwardMode, Stack, StackShape};
use charrnn::numerics::Rng;
use charrnn::objective::{ce_grad, ce_loss};

pub const TINY: &str = include_str!("../../fixtures/tiny.txt");
pub const SCRIPT: &str = include_str!("../../fixtures/sample_script.txt");

/// Gradient-check dimensions: vocabulary, embedding, sequence length, batch.
pub const CHECK_VOCAB: usize = 5;
pub const CHECK_EMBED: usize = 4;
pub const CHECK_LEN: usize = 5;
pub const CHECK_BATCH: usize = 2;
pub const CHECK_STEP: f64 = 1e-5;
/// Denominator floor for relative errors of near-zero gradient coordinates.
pub const CHECK_FLOOR: f64 = 1e-6;

pub fn check_widths(depth: usize) -> Vec<usize> {
    [8, 7, 6, 5][..depth].to_vec()
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(CHECK_FLOOR)
}

/// Builds a toy stack, then compares every analytic gradient coordinate with
/// a central difference of the mean cross-entropy. Dropout is active; the
/// mask is reproduced exactly by reseeding the dropout stream per evaluation.
/// Returns the maximum relative error.
pub fn stack_gradient_error(kind: CellKind, depth: usize, seed: u64) -> f64 {
    let shape = StackShape {
        kind,
        vocab_size: CHECK_VOCAB,
        embed_dim: CHECK_EMBED,
        widths: check_widths(depth),
        dropout: 0.25,
        forget_bias_one: true,
    };
    let mut rng = Rng::new(seed);
    let mut stack = Stack::init(&shape, &mut rng).unwrap();
    // Perturb the zero-initialised biases so every path carries signal.
    for t in stack.tensors_mut() {
        for v in t.data_mut() {
            *v += rng.uniform(-0.1, 0.1);
        }
    }
    let n = CHECK_BATCH * CHECK_LEN;
    let inputs: Vec<usize> = (0..n).map(|_| rng.below(CHECK_VOCAB as u64) as usize).collect();
    let targets: Vec<usize> = (0..n).map(|_| rng.below(CHECK_VOCAB as u64) as usize).collect();
    let mask_seed = rng.next_u64();

    let loss = |s: &Stack| {
        let mut r = Rng::new(mask_seed);
        let pass = s.forward(&inputs, CHECK_BATCH, CHECK_LEN, ForwardMode::Train(&mut r)).unwrap();
        ce_loss(&pass.logits, &targets).unwrap().mean_loss
    };
    let mut r = Rng::new(mask_seed);
    let pass = stack.forward(&inputs, CHECK_BATCH, CHECK_LEN, ForwardMode::Train(&mut r)).unwrap();
    let d_logits = ce_grad(&pass.logits, &targets).unwrap();
    let grads = stack.backward(pass.tape.as_ref(), &d_logits).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.data().to_vec()).collect();

    let mut worst: f64 = 0.0;
    for (ti, g) in analytic.iter().enumerate() {
        for (k, &a) in g.iter().enumerate() {
            let orig = stack.tensors()[ti].data()[k];
            stack.tensors_mut()[ti].data_mut()[k] = orig + CHECK_STEP;
            let plus = loss(&stack);
            stack.tensors_mut()[ti].data_mut()[k] = orig - CHECK_STEP;
            let minus = loss(&stack);
            stack.tensors_mut()[ti].data_mut()[k] = orig;
            worst = worst.max(relative_error(a, (plus - minus) / (2.0 * CHECK_STEP)));
        }
    }
    worst
}

/// Pearson chi-square statistic of observed counts against probabilities,
/// pooling categories whose expected count is below five.
pub fn chi_square(counts: &[usize], probs: &[f64]) -> (f64, usize) {
    let total: usize = counts.iter().sum();
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let expected = p * total as f64;
        if expected < 5.0 {
            pooled_obs += c as f64;
            pooled_exp += expected;
        } else {
            stat += (c as f64 - expected).powi(2) / expected;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    (stat, cells.saturating_sub(1))
}
