//! Architecture presets, parameter ownership, and the `CRNF` checkpoint file.
//!
//! # Checkpoint layout (all integers little-endian)
//!
//! | bytes        | content                                              |
//! |--------------|------------------------------------------------------|
//! | 4            | magic `CRNF`                                         |
//! | 4            | `u32` format version (1)                             |
//! | 4 + n        | `u32` length `n`, then a UTF-8 JSON header           |
//! | per param    | `u32` rank, `rank × u32` dims, `f32` values          |
//! | 4            | CRC-32 (IEEE) of every preceding byte                |
//!
//! The JSON header is `{"config": {...}, "vocab": [code points in index order]}`.
//! Parameters follow the canonical order of [`Stack::named_tensors`]. Values
//! are stored as `f32`; in-memory `f64` values are rounded on save.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::layers::{CellKind, RecurrentState, Stack, StackShape};
use crate::numerics::{Rng, Tensor};

pub const MAGIC: &[u8; 4] = b"CRNF";
pub const FORMAT_VERSION: u32 = 1;

/// Layer-width presets: one, two or four recurrent layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Uni,
    Bi,
    Quad,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Uni, Preset::Bi, Preset::Quad];

    pub fn widths(self) -> Vec<usize> {
        match self {
            Preset::Uni => vec![1024],
            Preset::Bi => vec![512, 256],
            Preset::Quad => vec![512, 256, 128, 64],
        }
    }

    /// Widths multiplied by `scale` and rounded, never below 1.
    pub fn scaled_widths(self, scale: f64) -> Vec<usize> {
        self.widths()
            .into_iter()
            .map(|w| ((w as f64 * scale).round() as usize).max(1))
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Uni => "uni",
            Preset::Bi => "bi",
            Preset::Quad => "quad",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown preset {name:?}; valid presets: uni, bi, quad")))
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: CellKind,
    pub layer_widths: Vec<usize>,
    pub embed_dim: usize,
    pub dropout: f64,
    pub seq_len: usize,
    pub batch_size: usize,
    pub vocab_size: usize,
    pub init_seed: u64,
    #[serde(default = "default_true")]
    pub forget_bias_one: bool,
}

impl ModelConfig {
    pub fn new(kind: CellKind, layer_widths: Vec<usize>, vocab_size: usize) -> Self {
        Self {
            kind,
            layer_widths,
            embed_dim: 256,
            dropout: 0.4,
            seq_len: 100,
            batch_size: 64,
            vocab_size,
            init_seed: 0,
            forget_bias_one: true,
        }
    }

    pub fn from_preset(kind: CellKind, preset: Preset, vocab_size: usize) -> Self {
        Self::new(kind, preset.widths(), vocab_size)
    }

    pub fn stack_shape(&self) -> StackShape {
        StackShape {
            kind: self.kind,
            vocab_size: self.vocab_size,
            embed_dim: self.embed_dim,
            widths: self.layer_widths.clone(),
            dropout: self.dropout,
            forget_bias_one: self.forget_bias_one,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.batch_size == 0 {
            return Err(Error::Config("seq_len and batch_size must be positive".into()));
        }
        self.stack_shape().validate()
    }

    /// Closed-form parameter count. Per recurrent layer with input width `E`
    /// and hidden size `H`: LSTM `4H(E+H+1)`, GRU `3H(E+H+1)`, bidirectional
    /// `8H(E+H+1)` with output width `2H`.
    pub fn param_count(&self) -> usize {
        let v = self.vocab_size;
        let mut total = v * self.embed_dim;
        let mut input = self.embed_dim;
        for &h in &self.layer_widths {
            let (gates, directions) = match self.kind {
                CellKind::Lstm => (4, 1),
                CellKind::Gru => (3, 1),
                CellKind::Birnn => (4, 2),
            };
            total += directions * gates * h * (input + h + 1);
            input = directions * h;
        }
        total + input * v + v
    }

    /// Shapes of every parameter, in canonical order.
    pub fn param_dims(&self) -> Vec<Vec<usize>> {
        let mut dims = vec![vec![self.vocab_size, self.embed_dim]];
        let mut input = self.embed_dim;
        for &h in &self.layer_widths {
            let (gates, directions) = match self.kind {
                CellKind::Lstm => (4, 1),
                CellKind::Gru => (3, 1),
                CellKind::Birnn => (4, 2),
            };
            for _ in 0..directions {
                dims.push(vec![input, gates * h]);
                dims.push(vec![h, gates * h]);
                dims.push(vec![gates * h]);
            }
            input = directions * h;
        }
        dims.push(vec![input, self.vocab_size]);
        dims.push(vec![self.vocab_size]);
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub stack: Stack,
}

/// Allocates and initializes a model from `config.init_seed`.
pub fn build_model(config: ModelConfig, vocab: Vocabulary) -> Result<Model> {
    config.validate()?;
    if config.vocab_size != vocab.len() {
        return Err(Error::Config(format!(
            "config vocab_size {} does not match vocabulary of {} characters",
            config.vocab_size,
            vocab.len()
        )));
    }
    let stack = Stack::init(&config.stack_shape(), &mut Rng::new(config.init_seed))?;
    Ok(Model { config, vocab, stack })
}

/// Ordered `(name, tensor)` parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub entries: Vec<(String, Tensor)>,
}

impl ParamStore {
    pub fn from_stack(stack: &Stack) -> Self {
        Self {
            entries: stack
                .named_tensors()
                .into_iter()
                .map(|(n, t)| (n, t.clone()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ParamStore,
    pub format_version: u32,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vec<u32>,
}

impl Model {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params: ParamStore::from_stack(&self.stack),
            format_version: FORMAT_VERSION,
        }
    }

    pub fn from_checkpoint(checkpoint: Checkpoint) -> Result<Self> {
        let mut model = build_model(checkpoint.config, checkpoint.vocab)?;
        let targets = model.stack.tensors_mut();
        if targets.len() != checkpoint.params.entries.len() {
            return Err(Error::Integrity(format!(
                "checkpoint holds {} parameters, config needs {}",
                checkpoint.params.entries.len(),
                targets.len()
            )));
        }
        for (dst, (name, src)) in targets.into_iter().zip(checkpoint.params.entries) {
            if dst.dims() != src.dims() {
                return Err(Error::Integrity(format!(
                    "parameter {name} has dims {:?}, config needs {:?}",
                    src.dims(),
                    dst.dims()
                )));
            }
            *dst = src;
        }
        Ok(model)
    }

    /// Eval-mode logits for a batch-major `[batch × len]` input.
    pub fn eval_logits(&self, indices: &[usize], batch: usize, len: usize) -> Result<Tensor> {
        Ok(self
            .stack
            .forward(indices, batch, len, crate::layers::ForwardMode::Eval)?
            .logits)
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.config.clone(),
            vocab: self.vocab.chars().iter().map(|&c| c as u32).collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Config(format!("header encoding failed: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &self.params.entries {
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.dims() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: format!("bad magic {magic:?}, expected \"CRNF\""),
            });
        }
        let version = r.u32("format version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported format version {version}"),
            });
        }
        let header_len = r.u32("header length")? as usize;
        let header_offset = r.pos;
        let header_bytes = r.take(header_len, "JSON header")?;
        let header: Header = match serde_json::from_slice(header_bytes) {
            Ok(h) => h,
            Err(e) => {
                check_crc(bytes)?;
                return Err(Error::Format {
                    offset: header_offset,
                    message: format!("invalid JSON header: {e}"),
                });
            }
        };

        let expected_dims = header.config.param_dims();
        let expected_len = r.pos
            + expected_dims
                .iter()
                .map(|d| 4 + 4 * d.len() + 4 * d.iter().product::<usize>())
                .sum::<usize>()
            + 4;
        if bytes.len() < expected_len {
            return Err(Error::Format {
                offset: bytes.len(),
                message: format!("file truncated: {} bytes, config needs {expected_len}", bytes.len()),
            });
        }
        if bytes.len() > expected_len {
            return Err(Error::Format {
                offset: expected_len,
                message: format!("{} unexpected trailing bytes", bytes.len() - expected_len),
            });
        }
        check_crc(bytes)?;

        let chars = header
            .vocab
            .iter()
            .map(|&cp| char::from_u32(cp).ok_or_else(|| Error::Integrity(format!("invalid code point {cp}"))))
            .collect::<Result<Vec<char>>>()?;
        let vocab = Vocabulary::from_chars(chars).map_err(|e| Error::Integrity(e.to_string()))?;
        if vocab.len() != header.config.vocab_size {
            return Err(Error::Integrity(format!(
                "header vocabulary has {} characters, config says {}",
                vocab.len(),
                header.config.vocab_size
            )));
        }

        let names = build_model(header.config.clone(), vocab.clone())
            .map_err(|e| Error::Integrity(format!("config in header is invalid: {e}")))?
            .stack
            .named_tensors()
            .into_iter()
            .map(|(n, _)| n)
            .collect::<Vec<_>>();
        let mut entries = Vec::with_capacity(expected_dims.len());
        for (name, dims) in names.into_iter().zip(expected_dims) {
            let offset = r.pos;
            let rank = r.u32("rank")? as usize;
            let stored: Vec<usize> = (0..rank).map(|_| r.u32("dim").map(|d| d as usize)).collect::<Result<_>>()?;
            if stored != dims {
                return Err(Error::Integrity(format!(
                    "parameter {name} at offset {offset} has dims {stored:?}, config needs {dims:?}"
                )));
            }
            let n: usize = dims.iter().product();
            let raw = r.take(4 * n, "parameter values")?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            entries.push((name, Tensor::from_vec(&dims, data)?));
        }
        Ok(Checkpoint {
            config: header.config,
            vocab,
            params: ParamStore { entries },
            format_version: version,
        })
    }
}

fn check_crc(bytes: &[u8]) -> Result<()> {
    if bytes.len() < 4 {
        return Err(Error::Format {
            offset: bytes.len(),
            message: "file too short for a checksum".into(),
        });
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes([tail[0], tail[1], tail[2], tail[3]]);
    let actual = crc32fast::hash(payload);
    if stored != actual {
        return Err(Error::Integrity(format!(
            "checksum mismatch: stored {stored:#010x}, computed {actual:#010x}"
        )));
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(Error::Format {
            offset: self.pos,
            message: format!("file truncated while reading {what}"),
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &model.to_checkpoint().encode()?)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::decode(&bytes)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    Model::from_checkpoint(read_checkpoint(path)?)
}

/// A model re-dimensioned to feed one character at a time, with its own
/// recurrent state. Always eval mode.
#[derive(Debug, Clone)]
pub struct GenerationModel {
    model: Model,
    state: RecurrentState,
}

pub fn rebuild_for_generation(checkpoint: Checkpoint) -> Result<GenerationModel> {
    let mut model = Model::from_checkpoint(checkpoint)?;
    model.config.batch_size = 1;
    let state = model.stack.zero_state(1);
    Ok(GenerationModel { model, state })
}

impl GenerationModel {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.model.vocab
    }

    pub fn state(&self) -> &RecurrentState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = self.model.stack.zero_state(1);
    }

    /// Feeds one character index and returns the next-character logits.
    pub fn feed(&mut self, index: usize) -> Result<Vec<f64>> {
        Ok(self.model.stack.step(&[index], &mut self.state)?.into_data())
    }
}
