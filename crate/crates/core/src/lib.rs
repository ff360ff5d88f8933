//! Character-level recurrent language models trained from scratch.
//!
//! The pipeline: [`corpus`] turns text into shifted input/target windows,
//! [`layers`] holds the embedding → LSTM/GRU/bidirectional-LSTM → dropout →
//! dense stack with hand-written backward passes, [`objective`] provides
//! cross-entropy and RMSprop, [`trainer`] runs epochs and records history,
//! [`model`] owns presets and the checkpoint file, and [`generator`] samples
//! new text one character at a time.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod generator;
mod io_util;
pub mod layers;
pub mod model;
pub mod numerics;
pub mod objective;
pub mod trainer;

pub use error::{Error, Result};
