//! Token and character representations.
//!
//! Word lookups go through a [`Vocabulary`] (lowercased, UNK fallback) into an
//! [`EmbeddingTable`] that is frozen for every pre-trained regime. The
//! character channel keeps original casing and runs a width-3 convolution
//! with max pooling over per-character embeddings, then a tanh; its output is
//! concatenated to the word vector.

mod charcnn;
mod sgns;
mod table;
mod vocab;

pub use charcnn::{embed_sequence, encode_word_chars, CharCnnConfig, CharCnnParams};
pub use sgns::{train_sgns, SgnsConfig, SgnsModel};
pub use table::{load_pretrained, save_vectors, EmbeddingRegime, EmbeddingTable};
pub use vocab::{CharVocabulary, Vocabulary, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};

pub(crate) use vocab::digest_lines;
