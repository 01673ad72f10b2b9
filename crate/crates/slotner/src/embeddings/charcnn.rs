use rand::Rng;

use crate::numeric::{concat, conv1d_maxpool, stack_rows, Tensor};
use crate::{Error, Result};

use super::table::EmbeddingTable;
use super::vocab::{CharVocabulary, Vocabulary};

/// Character-CNN sizes. The convolution window is fixed at 3; the filter
/// count doubles as the per-word character-vector dimension.
#[derive(Clone, Copy, Debug)]
pub struct CharCnnConfig {
    pub char_dim: usize,
    pub filters: usize,
}

impl Default for CharCnnConfig {
    fn default() -> Self {
        CharCnnConfig {
            char_dim: 30,
            filters: 100,
        }
    }
}

/// Trainable character encoder: per-character embeddings, width-3 filters and
/// a bias, pooled to a fixed `filters`-dimensional word vector.
#[derive(Clone, Debug)]
pub struct CharCnnParams {
    pub char_vocab: CharVocabulary,
    pub embedding: Tensor,
    pub filters: Tensor,
    pub bias: Tensor,
}

impl CharCnnParams {
    pub fn new(char_vocab: CharVocabulary, config: CharCnnConfig, rng: &mut impl Rng) -> Self {
        let dc = config.char_dim;
        let f = config.filters;
        let emb_bound = 0.5 / dc as f64;
        let fan = (3 * dc + f) as f64;
        let filter_bound = (6.0 / fan).sqrt();
        CharCnnParams {
            embedding: Tensor::uniform_param(&[char_vocab.len(), dc], -emb_bound, emb_bound, rng),
            filters: Tensor::uniform_param(&[f, 3 * dc], -filter_bound, filter_bound, rng),
            bias: Tensor::param(vec![0.0; f], &[f]).expect("bias"),
            char_vocab,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.filters.shape()[0]
    }
}

/// Encode one word through the character CNN: characters to embedding rows,
/// convolution with max pooling, then tanh. Unknown characters map to the
/// character UNK; casing is preserved.
pub fn encode_word_chars(word: &str, params: &CharCnnParams) -> Result<Tensor> {
    let ids: Vec<usize> = word.chars().map(|c| params.char_vocab.lookup(c)).collect();
    if ids.is_empty() {
        return Err(Error::EmptyInput("cannot encode an empty word".into()));
    }
    let char_matrix = params.embedding.lookup_rows(&ids)?;
    let pooled = conv1d_maxpool(&char_matrix, &params.filters, &params.bias)?;
    Ok(pooled.tanh())
}

/// Embed a token sequence as a `[T, D]` matrix: per token the word-table row
/// (lowercased lookup), concatenated with the character encoding when the
/// char channel is enabled.
pub fn embed_sequence(
    tokens: &[String],
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    char_params: Option<&CharCnnParams>,
) -> Result<Tensor> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput("cannot embed an empty token sequence".into()));
    }
    let mut rows = Vec::with_capacity(tokens.len());
    for token in tokens {
        let word_vec = table.vectors.row(vocab.lookup(token))?;
        let row = match char_params {
            Some(params) => concat(&[word_vec, encode_word_chars(token, params)?])?,
            None => word_vec,
        };
        rows.push(row);
    }
    stack_rows(&rows)
}
