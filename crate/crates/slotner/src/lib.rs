//! Slot-filling NER engine for task-oriented dialogue.
//!
//! The crate implements a stacked bidirectional recurrent tagger over word
//! (and optionally character-CNN) embeddings, with an optional linear-chain
//! CRF output layer and an optional context encoder that summarizes the
//! previous system utterance into the tagger's initial forward state. All
//! arithmetic runs on a small f64 tensor core with reverse-mode gradients,
//! which keeps training deterministic and finite-difference checkable.
//!
//! Module map:
//! - [`numeric`]: tensors, recorded-graph backprop, Adam, gradient checking.
//! - [`embeddings`]: vocabularies, pre-trained vector loading, SGNS training,
//!   character CNN word encoder.
//! - [`recurrent`]: RNN/GRU/LSTM cells, stacked bidirectional runner, context
//!   encoder.
//! - [`crf`]: sequence scoring, forward-algorithm partition, NLL, Viterbi.
//! - [`corpus`]: dialogue-turn data model, IOB validation, span extraction,
//!   splits, synthetic corpus generators.
//! - [`tagger`]: model assembly for every variant of the
//!   {CHAR} x {CRF} x {CE} grid, plus checkpointing.
//! - [`train`] / [`eval`] / [`grid`]: the training loop with early stopping,
//!   span-level macro-F1 evaluation, and the variant-by-regime grid runner.

pub mod corpus;
pub mod crf;
pub mod embeddings;
mod error;
pub mod eval;
pub mod grid;
pub mod numeric;
pub mod recurrent;
pub mod tagger;
pub mod train;

pub use error::{Error, Result};
