//! Text ingestion, the character vocabulary, and shifted-target batching.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Reads a UTF-8 text file verbatim.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::Encoding {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })
}

/// Bijective character/index mapping, ordered by code point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    idx2char: Vec<char>,
    char2idx: HashMap<char, usize>,
}

impl Vocabulary {
    pub fn build(text: &str) -> Result<Self> {
        if text.is_empty() {
            return Err(Error::Corpus("cannot build a vocabulary from empty text".into()));
        }
        let mut chars: Vec<char> = text.chars().collect();
        chars.sort_unstable();
        chars.dedup();
        Self::from_chars(chars)
    }

    /// Rebuilds a vocabulary from characters in index order. They must be
    /// strictly increasing by code point.
    pub fn from_chars(idx2char: Vec<char>) -> Result<Self> {
        if idx2char.is_empty() {
            return Err(Error::Vocabulary("vocabulary is empty".into()));
        }
        if let Some(w) = idx2char.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Vocabulary(format!(
                "characters must be strictly increasing by code point, found {:?} before {:?}",
                w[0], w[1]
            )));
        }
        let char2idx = idx2char.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Ok(Self { idx2char, char2idx })
    }

    pub fn len(&self) -> usize {
        self.idx2char.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx2char.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.idx2char
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.char2idx.get(&c).copied()
    }

    pub fn char_at(&self, index: usize) -> Option<char> {
        self.idx2char.get(index).copied()
    }

    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        text.chars()
            .enumerate()
            .map(|(pos, c)| {
                self.index_of(c).ok_or_else(|| {
                    Error::Vocabulary(format!("character {c:?} at position {pos} is not in the vocabulary"))
                })
            })
            .collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Result<String> {
        indices
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                self.char_at(i).ok_or_else(|| {
                    Error::Vocabulary(format!(
                        "index {i} at position {pos} is outside the vocabulary of size {}",
                        self.len()
                    ))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusPlan {
    pub seq_len: usize,
    pub batch_size: usize,
    pub shuffle_seed: u64,
}

impl Default for CorpusPlan {
    fn default() -> Self {
        Self {
            seq_len: 100,
            batch_size: 64,
            shuffle_seed: 0,
        }
    }
}

impl CorpusPlan {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 {
            return Err(Error::Config("seq_len must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One training window: `target[i]` is the character following `input[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SequencePair {
    pub input: Vec<usize>,
    pub target: Vec<usize>,
}

/// Cuts the index stream into consecutive non-overlapping chunks of
/// `seq_len + 1`; a short trailing chunk is dropped.
pub fn make_sequences(indices: &[usize], plan: &CorpusPlan) -> Result<Vec<SequencePair>> {
    plan.validate()?;
    let chunk = plan.seq_len + 1;
    if indices.len() < chunk {
        return Err(Error::Corpus(format!(
            "corpus has {} characters but seq_len {} needs at least {chunk}",
            indices.len(),
            plan.seq_len
        )));
    }
    Ok(indices
        .chunks_exact(chunk)
        .map(|c| SequencePair {
            input: c[..plan.seq_len].to_vec(),
            target: c[1..].to_vec(),
        })
        .collect())
}

/// Fixed-size batch, rows stored row-major as `[batch × seq_len]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceBatch {
    pub batch: usize,
    pub seq_len: usize,
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
}

impl SequenceBatch {
    pub fn from_pairs(pairs: &[SequencePair]) -> Result<Self> {
        let seq_len = pairs.first().map(|p| p.input.len()).unwrap_or(0);
        if seq_len == 0 {
            return Err(Error::Corpus("a batch needs at least one non-empty pair".into()));
        }
        if pairs.iter().any(|p| p.input.len() != seq_len || p.target.len() != seq_len) {
            return Err(Error::Shape("all pairs in a batch must have the same length".into()));
        }
        Ok(Self {
            batch: pairs.len(),
            seq_len,
            inputs: pairs.iter().flat_map(|p| p.input.iter().copied()).collect(),
            targets: pairs.iter().flat_map(|p| p.target.iter().copied()).collect(),
        })
    }

    pub fn input_row(&self, b: usize) -> &[usize] {
        &self.inputs[b * self.seq_len..(b + 1) * self.seq_len]
    }

    pub fn target_row(&self, b: usize) -> &[usize] {
        &self.targets[b * self.seq_len..(b + 1) * self.seq_len]
    }
}

/// Seeded Fisher–Yates shuffle, then grouping into full batches. The final
/// partial batch is dropped.
pub fn shuffle_batches(pairs: &[SequencePair], plan: &CorpusPlan, rng: &mut Rng) -> Result<Vec<SequenceBatch>> {
    plan.validate()?;
    let full = pairs.len() / plan.batch_size;
    if full == 0 {
        return Err(Error::Corpus(format!(
            "{} sequence pairs cannot fill a single batch of {}",
            pairs.len(),
            plan.batch_size
        )));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        order.swap(i, j);
    }
    order
        .chunks_exact(plan.batch_size)
        .map(|chunk| {
            let rows: Vec<SequencePair> = chunk.iter().map(|&i| pairs[i].clone()).collect();
            SequenceBatch::from_pairs(&rows)
        })
        .collect()
}
