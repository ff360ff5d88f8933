use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Eval,
}

pub fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")))
    }
}

/// Inverted dropout mask: 0 with probability `rate`, else `1/(1−rate)`.
pub(crate) fn mask(len: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
        .collect()
}

pub fn dropout_forward(x: &Tensor, rate: f64, mode: DropoutMode, rng: &mut Rng) -> Result<Tensor> {
    check_rate(rate)?;
    if mode == DropoutMode::Eval || rate == 0.0 {
        return Ok(x.clone());
    }
    let m = mask(x.len(), rate, rng);
    let mut out = x.clone();
    out.data_mut().iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
    Ok(out)
}
