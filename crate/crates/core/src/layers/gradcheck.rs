//! Central-difference checks of the hand-written backward passes.
#![allow(clippy::needless_range_loop)]

use super::bidirectional::BidirectionalLayer;
use super::gru::GruCell;
use super::lstm::LstmCell;
use crate::numerics::{Rng, Tensor};

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;
/// Relative errors are taken against `max(|analytic|, |numeric|, FLOOR)`.
const FLOOR: f64 = 1e-6;

fn random(len: usize, rng: &mut Rng) -> Vec<f64> {
    (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

fn randomize(tensors: Vec<&mut Tensor>, rng: &mut Rng) {
    for t in tensors {
        t.data_mut().iter_mut().for_each(|v| *v = rng.uniform(-0.8, 0.8));
    }
}

fn relative(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

/// Checks every coordinate of `params` (and of `inputs`) against central
/// differences of `loss`.
fn check<P: Clone>(
    params: &P,
    inputs: &[f64],
    tensors_mut: impl Fn(&mut P) -> Vec<&mut Tensor>,
    loss: impl Fn(&P, &[f64]) -> f64,
    analytic_params: &P,
    analytic_inputs: &[f64],
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    let mut grads_src = analytic_params.clone();
    let grads: Vec<Vec<f64>> = tensors_mut(&mut grads_src).iter().map(|t| t.data().to_vec()).collect();
    let count = tensors_mut(&mut probe).len();
    for ti in 0..count {
        let len = tensors_mut(&mut probe)[ti].len();
        for k in 0..len {
            let orig = tensors_mut(&mut probe)[ti].data()[k];
            tensors_mut(&mut probe)[ti].data_mut()[k] = orig + STEP;
            let plus = loss(&probe, inputs);
            tensors_mut(&mut probe)[ti].data_mut()[k] = orig - STEP;
            let minus = loss(&probe, inputs);
            tensors_mut(&mut probe)[ti].data_mut()[k] = orig;
            worst = worst.max(relative(grads[ti][k], (plus - minus) / (2.0 * STEP)));
        }
    }
    let mut x = inputs.to_vec();
    for k in 0..x.len() {
        let orig = x[k];
        x[k] = orig + STEP;
        let plus = loss(params, &x);
        x[k] = orig - STEP;
        let minus = loss(params, &x);
        x[k] = orig;
        worst = worst.max(relative(analytic_inputs[k], (plus - minus) / (2.0 * STEP)));
    }
    worst
}

fn weighted_sum(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

#[test]
fn lstm_two_step_unroll() {
    let (batch, e, h, len) = (2, 3, 4, 2);
    let mut rng = Rng::new(101);
    let mut cell = LstmCell::zeros(e, h);
    randomize(cell.tensors_mut().into_iter().collect(), &mut rng);
    let x = random(len * batch * e, &mut rng);
    let w = random(len * batch * h, &mut rng);
    let run = |c: &LstmCell, x: &[f64]| weighted_sum(&c.scan(x, len, batch, false, None, false).hidden, &w);
    let out = cell.scan(&x, len, batch, false, None, true);
    let mut grad = LstmCell::zeros(e, h);
    let dx = cell.backward(out.tape.as_ref().unwrap(), &w, &mut grad);
    let err = check(&cell, &x, |c| c.tensors_mut().into_iter().collect(), run, &grad, &dx);
    assert!(err < TOLERANCE, "max relative error {err}");
}

#[test]
fn lstm_reverse_scan() {
    let (batch, e, h, len) = (2, 3, 4, 4);
    let mut rng = Rng::new(102);
    let mut cell = LstmCell::zeros(e, h);
    randomize(cell.tensors_mut().into_iter().collect(), &mut rng);
    let x = random(len * batch * e, &mut rng);
    let w = random(len * batch * h, &mut rng);
    let run = |c: &LstmCell, x: &[f64]| weighted_sum(&c.scan(x, len, batch, true, None, false).hidden, &w);
    let out = cell.scan(&x, len, batch, true, None, true);
    let mut grad = LstmCell::zeros(e, h);
    let dx = cell.backward(out.tape.as_ref().unwrap(), &w, &mut grad);
    let err = check(&cell, &x, |c| c.tensors_mut().into_iter().collect(), run, &grad, &dx);
    assert!(err < TOLERANCE, "max relative error {err}");
}

#[test]
fn gru_two_step_unroll() {
    let (batch, e, h, len) = (2, 3, 4, 2);
    let mut rng = Rng::new(103);
    let mut cell = GruCell::zeros(e, h);
    randomize(cell.tensors_mut().into_iter().collect(), &mut rng);
    let x = random(len * batch * e, &mut rng);
    let w = random(len * batch * h, &mut rng);
    let run = |c: &GruCell, x: &[f64]| weighted_sum(&c.scan(x, len, batch, None, false).hidden, &w);
    let out = cell.scan(&x, len, batch, None, true);
    let mut grad = GruCell::zeros(e, h);
    let dx = cell.backward(out.tape.as_ref().unwrap(), &w, &mut grad);
    let err = check(&cell, &x, |c| c.tensors_mut().into_iter().collect(), run, &grad, &dx);
    assert!(err < TOLERANCE, "max relative error {err}");
}

fn bidirectional_tensors(l: &mut BidirectionalLayer) -> Vec<&mut Tensor> {
    let (f, b) = (&mut l.forward_cell, &mut l.backward_cell);
    f.tensors_mut().into_iter().chain(b.tensors_mut()).collect()
}

#[test]
fn bidirectional_three_steps() {
    let tensors = bidirectional_tensors;
    let (batch, e, h, len) = (2, 3, 4, 3);
    let mut rng = Rng::new(104);
    let mut layer = BidirectionalLayer::zeros(e, h);
    randomize(tensors(&mut layer), &mut rng);
    let x = random(len * batch * e, &mut rng);
    let w = random(len * batch * 2 * h, &mut rng);
    let run = |l: &BidirectionalLayer, x: &[f64]| weighted_sum(&l.scan(x, len, batch, None, false).output, &w);
    let out = layer.scan(&x, len, batch, None, true);
    let mut grad = BidirectionalLayer::zeros(e, h);
    let dx = layer.backward(out.tape.as_ref().unwrap(), &w, &mut grad);
    let err = check(&layer, &x, tensors, run, &grad, &dx);
    assert!(err < TOLERANCE, "max relative error {err}");
}

#[test]
fn lstm_hidden_state_stays_bounded() {
    // 1,000 steps of unit-Gaussian input (Box–Muller) with default init.
    let (batch, e, h, len) = (2, 8, 16, 1000);
    let mut rng = Rng::new(105);
    let cell = LstmCell::init(e, h, true, &mut rng);
    let gauss: Vec<f64> = (0..len * batch * e)
        .map(|_| {
            let (u1, u2) = (1.0 - rng.next_f64(), rng.next_f64());
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    let out = cell.scan(&gauss, len, batch, false, None, false);
    assert!(out.hidden.iter().all(|v| v.is_finite() && v.abs() <= 1.0));
    assert!(out.last_c.iter().all(|v| v.is_finite()));
    let gru = GruCell::init(e, h, &mut rng);
    let out = gru.scan(&gauss, len, batch, None, false);
    assert!(out.hidden.iter().all(|v| v.is_finite() && v.abs() <= 1.0));
}
