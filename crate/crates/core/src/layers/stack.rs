use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

use super::bidirectional::{BidirectionalLayer, BidirectionalTape};
use super::dense::DenseLayer;
use super::dropout::{self, check_rate};
use super::embedding::EmbeddingLayer;
use super::gru::{GruCell, GruTape};
use super::lstm::{LstmCell, LstmTape};
use super::{to_batch_major, to_time_major};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
    Birnn,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Lstm, CellKind::Gru, CellKind::Birnn];

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
            CellKind::Birnn => "birnn",
        }
    }
}

impl std::fmt::Display for CellKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to allocate a stack.
#[derive(Debug, Clone, PartialEq)]
pub struct StackShape {
    pub kind: CellKind,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub widths: Vec<usize>,
    pub dropout: f64,
    pub forget_bias_one: bool,
}

impl StackShape {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 {
            return Err(Error::Config("vocab_size and embed_dim must be positive".into()));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths must be a non-empty list of positive sizes, got {:?}",
                self.widths
            )));
        }
        check_rate(self.dropout)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecurrentLayer {
    Lstm(LstmCell),
    Gru(GruCell),
    Bidirectional(BidirectionalLayer),
}

impl RecurrentLayer {
    pub fn output_size(&self) -> usize {
        match self {
            RecurrentLayer::Lstm(c) => c.hidden_size(),
            RecurrentLayer::Gru(c) => c.hidden_size(),
            RecurrentLayer::Bidirectional(l) => l.output_size(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            RecurrentLayer::Lstm(c) => RecurrentLayer::Lstm(LstmCell::zeros(c.input_size(), c.hidden_size())),
            RecurrentLayer::Gru(c) => RecurrentLayer::Gru(GruCell::zeros(c.input_size(), c.hidden_size())),
            RecurrentLayer::Bidirectional(l) => RecurrentLayer::Bidirectional(BidirectionalLayer::zeros(
                l.forward_cell.input_size(),
                l.hidden_size(),
            )),
        }
    }
}

/// Per-layer recurrent state, each tensor `[batch × H]`. A bidirectional
/// layer carries only its forward direction.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerState {
    Lstm { h: Tensor, c: Tensor },
    Gru { h: Tensor },
    Bidirectional { h: Tensor, c: Tensor },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub batch: usize,
    pub layers: Vec<LayerState>,
}

#[derive(Debug, Clone)]
enum LayerTape {
    Lstm(LstmTape),
    Gru(GruTape),
    Bidirectional(BidirectionalTape),
}

/// Everything the backward pass needs from a training-mode forward.
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    len: usize,
    indices: Vec<usize>,
    layers: Vec<LayerTape>,
    masks: Vec<Option<Vec<f64>>>,
    dense_input: Vec<f64>,
}

pub enum ForwardMode<'a> {
    /// Dropout active, activations recorded.
    Train(&'a mut Rng),
    Eval,
}

pub struct ForwardPass {
    /// `[batch × L × V]`
    pub logits: Tensor,
    pub tape: Option<Tape>,
}

/// Embedding, recurrent layers each followed by dropout, then a dense
/// projection onto the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub embedding: EmbeddingLayer,
    pub layers: Vec<RecurrentLayer>,
    pub dense: DenseLayer,
    pub dropout: f64,
}

impl Stack {
    /// Initializes parameters in canonical order from `rng`.
    pub fn init(shape: &StackShape, rng: &mut Rng) -> Result<Self> {
        shape.validate()?;
        let embedding = EmbeddingLayer::init(shape.vocab_size, shape.embed_dim, rng);
        let mut input = shape.embed_dim;
        let mut layers = Vec::with_capacity(shape.widths.len());
        for &h in &shape.widths {
            let layer = match shape.kind {
                CellKind::Lstm => RecurrentLayer::Lstm(LstmCell::init(input, h, shape.forget_bias_one, rng)),
                CellKind::Gru => RecurrentLayer::Gru(GruCell::init(input, h, rng)),
                CellKind::Birnn => {
                    RecurrentLayer::Bidirectional(BidirectionalLayer::init(input, h, shape.forget_bias_one, rng))
                }
            };
            input = layer.output_size();
            layers.push(layer);
        }
        let dense = DenseLayer::init(input, shape.vocab_size, rng);
        Ok(Self {
            embedding,
            layers,
            dense,
            dropout: shape.dropout,
        })
    }

    /// Same structure, every parameter zero. Used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        Self {
            embedding: EmbeddingLayer::zeros(self.embedding.vocab_size(), self.embedding.dim()),
            layers: self.layers.iter().map(RecurrentLayer::zeros_like).collect(),
            dense: DenseLayer::zeros(self.dense.input_size(), self.dense.output_size()),
            dropout: self.dropout,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.vocab_size()
    }

    /// Parameters with their canonical names, in canonical order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("embedding".to_string(), &self.embedding.table)];
        const PARTS: [&str; 3] = ["input_kernel", "recurrent_kernel", "bias"];
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                RecurrentLayer::Lstm(c) => {
                    out.extend(PARTS.iter().zip(c.tensors()).map(|(p, t)| (format!("layer{i}.{p}"), t)))
                }
                RecurrentLayer::Gru(c) => {
                    out.extend(PARTS.iter().zip(c.tensors()).map(|(p, t)| (format!("layer{i}.{p}"), t)))
                }
                RecurrentLayer::Bidirectional(l) => {
                    for (dir, cell) in [("fwd", &l.forward_cell), ("bwd", &l.backward_cell)] {
                        out.extend(
                            PARTS
                                .iter()
                                .zip(cell.tensors())
                                .map(|(p, t)| (format!("layer{i}.{dir}.{p}"), t)),
                        );
                    }
                }
            }
        }
        out.push(("dense.kernel".into(), &self.dense.kernel));
        out.push(("dense.bias".into(), &self.dense.bias));
        out
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embedding.table];
        for layer in &mut self.layers {
            match layer {
                RecurrentLayer::Lstm(c) => out.extend(c.tensors_mut()),
                RecurrentLayer::Gru(c) => out.extend(c.tensors_mut()),
                RecurrentLayer::Bidirectional(l) => {
                    out.extend(l.forward_cell.tensors_mut());
                    out.extend(l.backward_cell.tensors_mut());
                }
            }
        }
        out.push(&mut self.dense.kernel);
        out.push(&mut self.dense.bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Full-sequence forward on batch-major `[batch × len]` indices. State
    /// starts at zero. Train mode applies dropout after every recurrent layer
    /// and records a tape.
    pub fn forward(&self, indices: &[usize], batch: usize, len: usize, mode: ForwardMode<'_>) -> Result<ForwardPass> {
        if batch == 0 || len == 0 || indices.len() != batch * len {
            return Err(Error::Shape(format!(
                "expected {batch}×{len} input indices, got {}",
                indices.len()
            )));
        }
        self.embedding.check_indices(indices)?;
        let (mut rng, record) = match mode {
            ForwardMode::Train(rng) => (Some(rng), true),
            ForwardMode::Eval => (None, false),
        };
        let time_indices = to_time_major(indices, batch, len, 1);
        let mut x = self.embedding.gather(&time_indices);
        let mut layer_tapes = Vec::new();
        let mut masks = Vec::new();

        for layer in &self.layers {
            let mut out = match layer {
                RecurrentLayer::Lstm(c) => {
                    let s = c.scan(&x, len, batch, false, None, record);
                    layer_tapes.extend(s.tape.map(LayerTape::Lstm));
                    s.hidden
                }
                RecurrentLayer::Gru(c) => {
                    let s = c.scan(&x, len, batch, None, record);
                    layer_tapes.extend(s.tape.map(LayerTape::Gru));
                    s.hidden
                }
                RecurrentLayer::Bidirectional(l) => {
                    let s = l.scan(&x, len, batch, None, record);
                    layer_tapes.extend(s.tape.map(LayerTape::Bidirectional));
                    s.output
                }
            };
            if let Some(rng) = rng.as_deref_mut() {
                if self.dropout > 0.0 {
                    let m = dropout::mask(out.len(), self.dropout, rng);
                    out.iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                    masks.push(Some(m));
                } else {
                    masks.push(None);
                }
            }
            x = out;
        }

        let v = self.vocab_size();
        let logits = self.dense.apply(&x, len * batch);
        let logits = Tensor::from_vec(&[batch, len, v], to_batch_major(&logits, batch, len, v))?;
        let tape = record.then_some(Tape {
            batch,
            len,
            indices: time_indices,
            layers: layer_tapes,
            masks,
            dense_input: x,
        });
        Ok(ForwardPass { logits, tape })
    }

    /// Reverse-mode gradients of every parameter given `d_logits`
    /// (`[batch × L × V]`). Returns a gradient buffer shaped like `self`.
    pub fn backward(&self, tape: Option<&Tape>, d_logits: &Tensor) -> Result<Stack> {
        let tape = tape.ok_or_else(|| Error::Usage("backward needs the tape of a train-mode forward pass".into()))?;
        let (batch, len, v) = (tape.batch, tape.len, self.vocab_size());
        if d_logits.dims() != [batch, len, v] {
            return Err(Error::Shape(format!(
                "logit gradient must be [{batch} × {len} × {v}], got {:?}",
                d_logits.dims()
            )));
        }
        let mut grad = self.zeros_like();
        let d_out = to_time_major(d_logits.data(), batch, len, v);
        let mut d_x = self.dense.backward(&tape.dense_input, &d_out, &mut grad.dense);

        for (i, layer) in self.layers.iter().enumerate().rev() {
            if let Some(Some(m)) = tape.masks.get(i) {
                d_x.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
            }
            d_x = match (layer, &tape.layers[i], &mut grad.layers[i]) {
                (RecurrentLayer::Lstm(c), LayerTape::Lstm(t), RecurrentLayer::Lstm(g)) => c.backward(t, &d_x, g),
                (RecurrentLayer::Gru(c), LayerTape::Gru(t), RecurrentLayer::Gru(g)) => c.backward(t, &d_x, g),
                (RecurrentLayer::Bidirectional(l), LayerTape::Bidirectional(t), RecurrentLayer::Bidirectional(g)) => {
                    l.backward(t, &d_x, g)
                }
                _ => return Err(Error::Usage("tape does not belong to this stack".into())),
            };
        }
        self.embedding.backward(&tape.indices, &d_x, &mut grad.embedding);
        Ok(grad)
    }

    pub fn zero_state(&self, batch: usize) -> RecurrentState {
        let layers = self
            .layers
            .iter()
            .map(|layer| match layer {
                RecurrentLayer::Lstm(c) => LayerState::Lstm {
                    h: Tensor::zeros(&[batch, c.hidden_size()]),
                    c: Tensor::zeros(&[batch, c.hidden_size()]),
                },
                RecurrentLayer::Gru(c) => LayerState::Gru {
                    h: Tensor::zeros(&[batch, c.hidden_size()]),
                },
                RecurrentLayer::Bidirectional(l) => LayerState::Bidirectional {
                    h: Tensor::zeros(&[batch, l.hidden_size()]),
                    c: Tensor::zeros(&[batch, l.hidden_size()]),
                },
            })
            .collect();
        RecurrentState { batch, layers }
    }

    /// Feeds one character per row through the stack in eval mode, updating
    /// `state`, and returns the next-character logits `[batch × V]`. A
    /// bidirectional layer's backward cell sees only the current character.
    pub fn step(&self, indices: &[usize], state: &mut RecurrentState) -> Result<Tensor> {
        let batch = state.batch;
        if indices.len() != batch || state.layers.len() != self.layers.len() {
            return Err(Error::Shape(format!(
                "step needs {batch} indices and {} layer states, got {} and {}",
                self.layers.len(),
                indices.len(),
                state.layers.len()
            )));
        }
        self.embedding.check_indices(indices)?;
        let mut x = self.embedding.gather(indices);
        for (layer, st) in self.layers.iter().zip(state.layers.iter_mut()) {
            x = match (layer, st) {
                (RecurrentLayer::Lstm(cell), LayerState::Lstm { h, c }) => {
                    let s = cell.scan(&x, 1, batch, false, Some((h.data(), c.data())), false);
                    h.data_mut().copy_from_slice(&s.last_h);
                    c.data_mut().copy_from_slice(&s.last_c);
                    s.hidden
                }
                (RecurrentLayer::Gru(cell), LayerState::Gru { h }) => {
                    let s = cell.scan(&x, 1, batch, Some(h.data()), false);
                    h.data_mut().copy_from_slice(&s.last_h);
                    s.hidden
                }
                (RecurrentLayer::Bidirectional(l), LayerState::Bidirectional { h, c }) => {
                    let s = l.scan(&x, 1, batch, Some((h.data(), c.data())), false);
                    h.data_mut().copy_from_slice(&s.last_h);
                    c.data_mut().copy_from_slice(&s.last_c);
                    s.output
                }
                _ => return Err(Error::Shape("recurrent state does not match the layer kinds".into())),
            };
        }
        Tensor::from_vec(&[batch, self.vocab_size()], self.dense.apply(&x, batch))
    }
}
