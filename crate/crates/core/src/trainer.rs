//! Epoch loop, per-epoch metrics, and the history CSV.

use std::path::Path;
use std::time::Instant;

use crate::corpus::{load_corpus, make_sequences, shuffle_batches, CorpusPlan, SequenceBatch, SequencePair, Vocabulary};
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::layers::ForwardMode;
use crate::model::{build_model, save_checkpoint, Model, ModelConfig};
use crate::numerics::Rng;
use crate::objective::{ce_grad, ce_loss, clip_global_norm, rmsprop_step, RmspropState, DEFAULT_EPSILON, DEFAULT_RHO};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainPlan {
    pub epochs: usize,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// Global gradient norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub shuffle_seed: u64,
    pub dropout_seed: u64,
}

impl Default for TrainPlan {
    fn default() -> Self {
        Self {
            epochs: 75,
            learning_rate: 1e-3,
            rho: DEFAULT_RHO,
            epsilon: DEFAULT_EPSILON,
            clip_norm: Some(5.0),
            shuffle_seed: 0,
            dropout_seed: 0,
        }
    }
}

impl TrainPlan {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate must be finite and > 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.rho) || self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::Config("rho must be in [0, 1) and epsilon >= 0".into()));
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::Config(format!("clip norm must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn optimizer(&self, model: &Model) -> RmspropState {
        RmspropState::new(model.stack.tensors(), self.learning_rate, self.rho, self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub ms_per_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub mean_loss: f64,
    pub ms_per_step: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub rows: Vec<HistoryRow>,
}

/// One optimizer step on one batch; returns the batch loss.
pub fn train_step(model: &mut Model, batch: &SequenceBatch, plan: &TrainPlan, state: &mut RmspropState, dropout_rng: &mut Rng) -> Result<f64> {
    let pass = model
        .stack
        .forward(&batch.inputs, batch.batch, batch.seq_len, ForwardMode::Train(dropout_rng))?;
    let loss = ce_loss(&pass.logits, &batch.targets)?.mean_loss;
    if !loss.is_finite() {
        return Ok(loss);
    }
    let d_logits = ce_grad(&pass.logits, &batch.targets)?;
    let mut grads = model.stack.backward(pass.tape.as_ref(), &d_logits)?;
    if let Some(max_norm) = plan.clip_norm {
        clip_global_norm(&mut grads.tensors_mut(), max_norm);
    }
    rmsprop_step(&mut model.stack.tensors_mut(), &grads.tensors(), state)?;
    Ok(loss)
}

/// Forward, loss, backward, clip and update for every batch. The mean loss
/// is averaged over batches; the step time covers compute only.
pub fn train_epoch(
    model: &mut Model,
    batches: &[SequenceBatch],
    plan: &TrainPlan,
    state: &mut RmspropState,
    dropout_rng: &mut Rng,
    epoch: usize,
) -> Result<EpochStats> {
    if batches.is_empty() {
        return Err(Error::Corpus("an epoch needs at least one batch".into()));
    }
    let mut total_loss = 0.0;
    let mut total_ms = 0.0;
    for (i, batch) in batches.iter().enumerate() {
        let start = Instant::now();
        let loss = train_step(model, batch, plan, state, dropout_rng)?;
        total_ms += start.elapsed().as_secs_f64() * 1e3;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: i, loss });
        }
        total_loss += loss;
    }
    let n = batches.len() as f64;
    Ok(EpochStats {
        mean_loss: total_loss / n,
        ms_per_step: total_ms / n,
    })
}

/// Vocabulary and non-overlapping training pairs for `text`.
pub fn prepare_corpus(text: &str, seq_len: usize) -> Result<(Vocabulary, Vec<SequencePair>)> {
    let vocab = Vocabulary::build(text)?;
    let indices = vocab.encode(text)?;
    let plan = CorpusPlan {
        seq_len,
        batch_size: 1,
        shuffle_seed: 0,
    };
    let pairs = make_sequences(&indices, &plan)?;
    Ok((vocab, pairs))
}

/// A training run held in memory; drive it with [`TrainingRun::run_epoch`].
pub struct TrainingRun {
    pub model: Model,
    pub plan: TrainPlan,
    pub history: TrainingHistory,
    pairs: Vec<SequencePair>,
    optimizer: RmspropState,
    dropout_rng: Rng,
}

impl TrainingRun {
    /// Builds the vocabulary from `text`, fixes `config.vocab_size` to it, and
    /// initializes the model.
    pub fn new(text: &str, mut config: ModelConfig, plan: TrainPlan) -> Result<Self> {
        plan.validate()?;
        let (vocab, pairs) = prepare_corpus(text, config.seq_len)?;
        config.vocab_size = vocab.len();
        config.validate()?;
        if pairs.len() < config.batch_size {
            return Err(Error::Corpus(format!(
                "{} sequence pairs of length {} cannot fill a batch of {}",
                pairs.len(),
                config.seq_len,
                config.batch_size
            )));
        }
        let model = build_model(config, vocab)?;
        let optimizer = plan.optimizer(&model);
        let dropout_rng = Rng::new(plan.dropout_seed);
        Ok(Self {
            model,
            plan,
            history: TrainingHistory::default(),
            pairs,
            optimizer,
            dropout_rng,
        })
    }

    pub fn pairs(&self) -> &[SequencePair] {
        &self.pairs
    }

    /// Batches for `epoch` (1-based), shuffled with `shuffle_seed + epoch`.
    pub fn batches_for(&self, epoch: usize) -> Result<Vec<SequenceBatch>> {
        let plan = CorpusPlan {
            seq_len: self.model.config.seq_len,
            batch_size: self.model.config.batch_size,
            shuffle_seed: self.plan.shuffle_seed,
        };
        let mut rng = Rng::new(self.plan.shuffle_seed.wrapping_add(epoch as u64));
        shuffle_batches(&self.pairs, &plan, &mut rng)
    }

    pub fn run_epoch(&mut self) -> Result<HistoryRow> {
        let epoch = self.history.rows.len() + 1;
        let batches = self.batches_for(epoch)?;
        let stats = train_epoch(
            &mut self.model,
            &batches,
            &self.plan,
            &mut self.optimizer,
            &mut self.dropout_rng,
            epoch,
        )?;
        let row = HistoryRow {
            epoch,
            mean_loss: stats.mean_loss,
            ms_per_step: stats.ms_per_step,
        };
        self.history.rows.push(row);
        Ok(row)
    }
}

/// Trains on a corpus file, then writes the checkpoint and history CSV
/// atomically. `on_epoch` sees each row as it completes.
pub fn train(
    corpus: impl AsRef<Path>,
    config: ModelConfig,
    plan: TrainPlan,
    checkpoint_out: impl AsRef<Path>,
    history_out: Option<&Path>,
    mut on_epoch: impl FnMut(&HistoryRow),
) -> Result<(Model, TrainingHistory)> {
    let text = load_corpus(corpus)?;
    let mut run = TrainingRun::new(&text, config, plan)?;
    for _ in 0..run.plan.epochs {
        let row = run.run_epoch()?;
        on_epoch(&row);
    }
    save_checkpoint(&run.model, checkpoint_out)?;
    if let Some(path) = history_out {
        export_history(&run.history, path)?;
    }
    Ok((run.model, run.history))
}

pub const HISTORY_HEADER: [&str; 3] = ["epoch", "mean_loss", "ms_per_step"];
pub const REPORT_HEADER: [&str; 4] = ["run", "epoch", "mean_loss", "ms_per_step"];

fn format_loss(v: f64) -> String {
    format!("{v:.11e}")
}

fn format_ms(v: f64) -> String {
    format!("{v:.6}")
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::History {
        line,
        message: e.to_string(),
    }
}

pub fn history_to_csv(history: &TrainingHistory) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HISTORY_HEADER).map_err(csv_err)?;
    for r in &history.rows {
        w.write_record([r.epoch.to_string(), format_loss(r.mean_loss), format_ms(r.ms_per_step)])
            .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::History {
        line: 0,
        message: e.to_string(),
    })
}

/// Writes `epoch,mean_loss,ms_per_step` with losses at 12 significant digits.
pub fn export_history(history: &TrainingHistory, path: impl AsRef<Path>) -> Result<()> {
    if history.rows.is_empty() {
        return Err(Error::Usage("cannot export an empty training history".into()));
    }
    write_atomic(path.as_ref(), &history_to_csv(history)?)
}

pub fn parse_history(text: &str) -> Result<TrainingHistory> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut records = reader.records();
    match records.next() {
        Some(Ok(h)) if h.iter().eq(HISTORY_HEADER) => {}
        Some(Ok(h)) => {
            return Err(Error::History {
                line: 1,
                message: format!("expected header \"epoch,mean_loss,ms_per_step\", found {:?}", h.iter().collect::<Vec<_>>()),
            })
        }
        Some(Err(e)) => return Err(csv_err(e)),
        None => {
            return Err(Error::History {
                line: 1,
                message: "empty history file".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::History { line, message };
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", record.len())));
        }
        let epoch: usize = record[0].trim().parse().map_err(|_| bad(format!("bad epoch {:?}", &record[0])))?;
        let mean_loss: f64 = record[1].trim().parse().map_err(|_| bad(format!("bad mean_loss {:?}", &record[1])))?;
        let ms_per_step: f64 = record[2].trim().parse().map_err(|_| bad(format!("bad ms_per_step {:?}", &record[2])))?;
        if rows.last().is_some_and(|r: &HistoryRow| r.epoch >= epoch) {
            return Err(bad(format!("epoch {epoch} is not strictly increasing")));
        }
        rows.push(HistoryRow {
            epoch,
            mean_loss,
            ms_per_step,
        });
    }
    Ok(TrainingHistory { rows })
}

pub fn read_history(path: impl AsRef<Path>) -> Result<TrainingHistory> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_history(&text)
}

/// Long-format `run,epoch,mean_loss,ms_per_step` table for overlaying runs.
pub fn merge_histories(runs: &[(String, TrainingHistory)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for (name, history) in runs {
        for r in &history.rows {
            w.write_record([
                name.clone(),
                r.epoch.to_string(),
                format_loss(r.mean_loss),
                format_ms(r.ms_per_step),
            ])
            .map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::History {
        line: 0,
        message: e.to_string(),
    })
}
