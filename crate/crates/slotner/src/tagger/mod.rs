//! Model assembly for one variant of the {CHAR} x {CRF} x {CE} grid.
//!
//! A [`TaggerModel`] owns exactly the parameters its flags require: word
//! table, optional character CNN, optional context encoder, the stacked
//! bidirectional network, one affine emission projection, and optional CRF
//! parameters. Inference is pure over the assembled tensors; training
//! mutates them in place through the recorded gradients.

mod checkpoint;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{DialogueTurn, LabelSet};
use crate::crf::{crf_nll, viterbi_decode, CrfParams, TagSequence};
use crate::embeddings::{
    embed_sequence, CharCnnConfig, CharCnnParams, CharVocabulary, EmbeddingRegime, EmbeddingTable,
    Vocabulary,
};
use crate::numeric::Tensor;
use crate::recurrent::{
    encode_context, CellKind, CellParams, ContextInjection, StackedBiConfig, StackedBiRnn,
};
use crate::{Error, Result};

/// Flags and sizes naming one model variant. The three booleans span the
/// eight grid rows from plain BI-LSTM up to BI-LSTM-CHAR-CRF-CE.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub use_char: bool,
    pub use_crf: bool,
    pub use_context: bool,
    pub embedding_regime: EmbeddingRegime,
    pub hidden_dim: usize,
    pub layers: usize,
    pub cell: CellKind,
    pub char_dim: usize,
    pub char_filters: usize,
    pub context_injection: ContextInjection,
}

impl Default for VariantConfig {
    fn default() -> Self {
        VariantConfig {
            use_char: false,
            use_crf: false,
            use_context: false,
            embedding_regime: EmbeddingRegime::Sg300,
            hidden_dim: 64,
            layers: 2,
            cell: CellKind::Lstm,
            char_dim: 30,
            char_filters: 100,
            context_injection: ContextInjection::FirstLayer,
        }
    }
}

impl VariantConfig {
    /// Display name in the conventional row order: BI-LSTM, then -CHAR,
    /// -CRF, -CE suffixes for the enabled extensions.
    pub fn name(&self) -> String {
        let base = match self.cell {
            CellKind::Lstm => "BI-LSTM",
            CellKind::Gru => "BI-GRU",
            CellKind::Rnn => "BI-RNN",
        };
        let mut name = base.to_string();
        if self.use_char {
            name.push_str("-CHAR");
        }
        if self.use_crf {
            name.push_str("-CRF");
        }
        if self.use_context {
            name.push_str("-CE");
        }
        name
    }

    /// The eight flag combinations in table row order, sharing this config's
    /// sizes and regime.
    pub fn grid_rows(&self) -> [VariantConfig; 8] {
        let mut rows = [*self; 8];
        let flags = [
            (false, false, false),
            (false, false, true),
            (true, false, false),
            (true, false, true),
            (false, true, false),
            (false, true, true),
            (true, true, false),
            (true, true, true),
        ];
        for (row, (chr, crf, ce)) in rows.iter_mut().zip(flags) {
            row.use_char = chr;
            row.use_crf = crf;
            row.use_context = ce;
        }
        rows
    }

    /// Parse a row name like `BI-LSTM-CHAR-CRF-CE` back into flags.
    pub fn from_name(&self, name: &str) -> Result<VariantConfig> {
        let upper = name.to_uppercase();
        let mut rest = upper
            .strip_prefix("BI-LSTM")
            .or_else(|| upper.strip_prefix("BI-GRU"))
            .or_else(|| upper.strip_prefix("BI-RNN"))
            .ok_or_else(|| Error::Config(format!("unknown variant name {name:?}")))?;
        let mut cfg = *self;
        cfg.cell = if upper.starts_with("BI-LSTM") {
            CellKind::Lstm
        } else if upper.starts_with("BI-GRU") {
            CellKind::Gru
        } else {
            CellKind::Rnn
        };
        cfg.use_char = false;
        cfg.use_crf = false;
        cfg.use_context = false;
        while !rest.is_empty() {
            if let Some(r) = rest.strip_prefix("-CHAR") {
                cfg.use_char = true;
                rest = r;
            } else if let Some(r) = rest.strip_prefix("-CRF") {
                cfg.use_crf = true;
                rest = r;
            } else if let Some(r) = rest.strip_prefix("-CE") {
                cfg.use_context = true;
                rest = r;
            } else {
                return Err(Error::Config(format!("unknown variant name {name:?}")));
            }
        }
        Ok(cfg)
    }
}

/// Assembled parameters for one variant, plus the vocabularies and label set
/// the parameters are aligned with.
#[derive(Clone, Debug)]
pub struct TaggerModel {
    pub variant: VariantConfig,
    pub vocab: Vocabulary,
    pub labels: LabelSet,
    pub word_table: EmbeddingTable,
    pub char_cnn: Option<CharCnnParams>,
    pub context_encoder: Option<CellParams>,
    pub network: StackedBiRnn,
    pub proj_weight: Tensor, // [2*hidden_dim, K]
    pub proj_bias: Tensor,   // [K]
    pub crf: Option<CrfParams>,
}

impl TaggerModel {
    /// Build a model with seeded random initialization. `char_vocab` is
    /// required exactly when the variant enables the character channel.
    pub fn new(
        variant: VariantConfig,
        vocab: Vocabulary,
        char_vocab: Option<CharVocabulary>,
        labels: LabelSet,
        word_table: EmbeddingTable,
        seed: u64,
    ) -> Result<TaggerModel> {
        if word_table.row_count() != vocab.len() {
            return Err(Error::Dimension(format!(
                "word table has {} rows for a vocabulary of {}",
                word_table.row_count(),
                vocab.len()
            )));
        }
        if labels.len() < 2 {
            return Err(Error::Config("label set needs at least two labels".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let char_cnn = match (variant.use_char, char_vocab) {
            (true, Some(cv)) => Some(CharCnnParams::new(
                cv,
                CharCnnConfig {
                    char_dim: variant.char_dim,
                    filters: variant.char_filters,
                },
                &mut rng,
            )),
            (true, None) => {
                return Err(Error::Config(
                    "variant enables the character channel but no character vocabulary was given"
                        .into(),
                ))
            }
            (false, _) => None,
        };
        let input_dim = word_table.dim + if variant.use_char { variant.char_filters } else { 0 };
        let context_encoder = variant
            .use_context
            .then(|| CellParams::new(CellKind::Lstm, input_dim, variant.hidden_dim, &mut rng));
        let network = StackedBiRnn::new(
            StackedBiConfig {
                layers: variant.layers,
                hidden_dim: variant.hidden_dim,
                cell: variant.cell,
            },
            input_dim,
            &mut rng,
        )?;
        let k = labels.len();
        let out_dim = 2 * variant.hidden_dim;
        let bound = (6.0 / (out_dim + k) as f64).sqrt();
        let proj_weight = Tensor::uniform_param(&[out_dim, k], -bound, bound, &mut rng);
        let proj_bias = Tensor::param(vec![0.0; k], &[k])?;
        let crf = variant.use_crf.then(|| CrfParams::zeros(k));
        Ok(TaggerModel {
            variant,
            vocab,
            labels,
            word_table,
            char_cnn,
            context_encoder,
            network,
            proj_weight,
            proj_bias,
            crf,
        })
    }

    fn embed(&self, tokens: &[String]) -> Result<Tensor> {
        embed_sequence(tokens, &self.vocab, &self.word_table, self.char_cnn.as_ref())
    }

    /// Per-token, per-label emission scores `[T, K]` for one turn.
    ///
    /// With the context encoder enabled, the previous system utterance is
    /// embedded through the same pipeline and its final encoder state seeds
    /// the forward direction; without it, the system side is ignored
    /// entirely.
    pub fn forward(&self, turn: &DialogueTurn) -> Result<Tensor> {
        if turn.user_tokens.is_empty() {
            return Err(Error::EmptyInput("cannot tag an empty user utterance".into()));
        }
        let inputs = self.embed(&turn.user_tokens)?;
        let init = match &self.context_encoder {
            Some(encoder) if !turn.system_tokens.is_empty() => {
                let context = self.embed(&turn.system_tokens)?;
                Some(encode_context(encoder, &context)?)
            }
            _ => None,
        };
        let hidden = self
            .network
            .run(&inputs, init.as_ref(), self.variant.context_injection)?;
        hidden.matmul(&self.proj_weight)?.add(&self.proj_bias)
    }

    /// Training loss for one turn: CRF negative log-likelihood when the CRF
    /// layer is on, otherwise the summed per-token softmax cross-entropy.
    pub fn loss(&self, turn: &DialogueTurn) -> Result<Tensor> {
        if turn.tags.len() != turn.user_tokens.len() {
            return Err(Error::Dimension(format!(
                "{} tags for {} user tokens",
                turn.tags.len(),
                turn.user_tokens.len()
            )));
        }
        let gold = self.labels.ids_of(&turn.tags)?;
        let emissions = self.forward(turn)?;
        match &self.crf {
            Some(crf) => crf_nll(&emissions, &gold, crf),
            None => {
                let k = self.labels.len();
                let log_probs = emissions.log_softmax()?;
                let picked: Vec<usize> =
                    gold.iter().enumerate().map(|(t, &g)| t * k + g).collect();
                Tensor::scalar(0.0).sub(&log_probs.gather(&picked)?.sum())
            }
        }
    }

    /// Decode one turn: Viterbi under the CRF, else per-position argmax.
    /// Ties resolve to the lower label id either way.
    pub fn predict(&self, turn: &DialogueTurn) -> Result<TagSequence> {
        let emissions = self.forward(turn)?;
        match &self.crf {
            Some(crf) => Ok(viterbi_decode(&emissions, crf)?.0),
            None => {
                let shape = emissions.shape();
                let (t_len, k) = (shape[0], shape[1]);
                let data = emissions.data();
                let tags = (0..t_len)
                    .map(|t| {
                        let row = &data[t * k..(t + 1) * k];
                        let mut best = 0;
                        for (j, &v) in row.iter().enumerate() {
                            if v > row[best] {
                                best = j;
                            }
                        }
                        best
                    })
                    .collect();
                Ok(TagSequence(tags))
            }
        }
    }

    /// Predicted label strings for one turn.
    pub fn predict_labels(&self, turn: &DialogueTurn) -> Result<Vec<String>> {
        Ok(self
            .predict(turn)?
            .0
            .iter()
            .map(|&id| self.labels.label(id).to_string())
            .collect())
    }

    /// Every parameter tensor with a stable name, in a fixed order. The
    /// inventory is exactly what the variant flags require; checkpointing,
    /// training and the gradient checks all iterate this list.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![("word_table".to_string(), self.word_table.vectors.clone())];
        if let Some(char_cnn) = &self.char_cnn {
            out.push(("char.embedding".to_string(), char_cnn.embedding.clone()));
            out.push(("char.filters".to_string(), char_cnn.filters.clone()));
            out.push(("char.bias".to_string(), char_cnn.bias.clone()));
        }
        if let Some(encoder) = &self.context_encoder {
            for (block, name) in encoder.blocks.iter().zip(encoder.kind.block_names()) {
                out.push((format!("context.{name}.weight"), block.weight.clone()));
                out.push((format!("context.{name}.bias"), block.bias.clone()));
            }
        }
        for (l, layer) in self.network.layers.iter().enumerate() {
            for (dir, cell) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
                for (block, name) in cell.blocks.iter().zip(cell.kind.block_names()) {
                    out.push((format!("rnn.layer{l}.{dir}.{name}.weight"), block.weight.clone()));
                    out.push((format!("rnn.layer{l}.{dir}.{name}.bias"), block.bias.clone()));
                }
            }
        }
        out.push(("proj.weight".to_string(), self.proj_weight.clone()));
        out.push(("proj.bias".to_string(), self.proj_bias.clone()));
        if let Some(crf) = &self.crf {
            out.push(("crf.transitions".to_string(), crf.transitions.clone()));
            out.push(("crf.start".to_string(), crf.start.clone()));
            out.push(("crf.end".to_string(), crf.end.clone()));
        }
        out
    }

    /// The trainable subset of [`TaggerModel::named_tensors`] (frozen tables
    /// drop out).
    pub fn trainable_tensors(&self) -> Vec<(String, Tensor)> {
        self.named_tensors()
            .into_iter()
            .filter(|(_, t)| t.requires_grad())
            .collect()
    }

    /// Snapshot all trainable values (for best-checkpoint restores).
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.trainable_tensors()
            .iter()
            .map(|(_, t)| t.to_vec())
            .collect()
    }

    /// Restore a snapshot taken from this same model.
    pub fn restore(&self, snapshot: &[Vec<f64>]) {
        for ((_, t), data) in self.trainable_tensors().iter().zip(snapshot) {
            t.set_data(data);
        }
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        checkpoint::save(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<TaggerModel> {
        checkpoint::load(path.as_ref())
    }
}
