//! Prime-then-extend text generation with temperature-scaled selection.

use crate::error::{Error, Result};
use crate::model::GenerationModel;
use crate::numerics::{sample_categorical, softmax_vec, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMode {
    /// Draw from `softmax(logits / T)`.
    #[default]
    Sample,
    /// Highest logit; ties go to the lowest index. Temperature has no effect.
    Argmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationPlan {
    pub prime_text: String,
    pub length: usize,
    pub temperature: f64,
    pub mode: SelectionMode,
    pub sample_seed: u64,
}

impl GenerationPlan {
    pub fn new(prime_text: impl Into<String>, length: usize) -> Self {
        Self {
            prime_text: prime_text.into(),
            length,
            temperature: 1.0,
            mode: SelectionMode::Sample,
            sample_seed: 0,
        }
    }
}

pub fn check_temperature(temperature: f64) -> Result<()> {
    if temperature > 0.0 && temperature.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "temperature must be a finite value > 0, got {temperature}"
        )))
    }
}

/// Divides logits by the temperature. Scaling logits (not probabilities)
/// is what sharpens or flattens the distribution after the softmax.
pub fn apply_temperature(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    Ok(logits.iter().map(|l| l / temperature).collect())
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn select_next(logits: &[f64], temperature: f64, mode: SelectionMode, rng: &mut Rng) -> Result<usize> {
    let scaled = apply_temperature(logits, temperature)?;
    match mode {
        SelectionMode::Argmax => Ok(argmax(&scaled)),
        SelectionMode::Sample => sample_categorical(&softmax_vec(&scaled)?, rng),
    }
}

/// Feeds the prime one character at a time, then emits `plan.length`
/// characters, each fed back as the next input. Returns prime + generated.
pub fn generate(model: &mut GenerationModel, plan: &GenerationPlan) -> Result<String> {
    check_temperature(plan.temperature)?;
    if plan.prime_text.is_empty() {
        return Err(Error::Config("prime text must not be empty".into()));
    }
    let prime = model.vocab().encode(&plan.prime_text)?;
    let mut out = plan.prime_text.clone();
    if plan.length == 0 {
        return Ok(out);
    }

    model.reset();
    let mut logits = Vec::new();
    for &i in &prime {
        logits = model.feed(i)?;
    }
    let mut rng = Rng::new(plan.sample_seed);
    for n in 0..plan.length {
        let next = select_next(&logits, plan.temperature, plan.mode, &mut rng)?;
        out.push(model.vocab().char_at(next).expect("logit index is within the vocabulary"));
        if n + 1 < plan.length {
            logits = model.feed(next)?;
        }
    }
    Ok(out)
}
