//! Variant-by-regime grid runner: trains and evaluates every requested
//! {CHAR} x {CRF} x {CE} row under every requested embedding regime, with a
//! shared base seed, and renders the results next to the published reference
//! scores for the DSTC-FRAMES benchmarks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::corpus::Corpus;
use crate::embeddings::{
    load_pretrained, train_sgns, CharVocabulary, EmbeddingRegime, EmbeddingTable, SgnsConfig,
    Vocabulary,
};
use crate::eval::evaluate;
use crate::tagger::{TaggerModel, VariantConfig};
use crate::train::{train, TrainConfig};
use crate::{Error, Result};

/// Reference macro-F1 scores (in percent) reported for this architecture
/// family on DSTC-FRAMES-EN, by grid row and embedding regime
/// (SGNS300, G50W, G300W, G300C). Rows follow [`VariantConfig::grid_rows`].
pub const REFERENCE_EN: [[f64; 4]; 8] = [
    [86.928, 88.138, 89.388, 90.057],
    [89.130, 90.163, 90.910, 91.224],
    [87.465, 89.089, 89.442, 90.551],
    [89.412, 91.087, 91.342, 91.880],
    [87.782, 89.529, 89.871, 90.627],
    [89.696, 91.122, 91.455, 92.133],
    [88.276, 89.628, 90.971, 91.079],
    [90.036, 91.705, 92.042, 92.864],
];

/// Reference macro-F1 scores (in percent) on DSTC-FRAMES-ENHI, SGNS300 only.
pub const REFERENCE_ENHI: [f64; 8] = [
    84.867, 86.242, 85.119, 86.433, 85.342, 86.790, 85.643, 87.934,
];

/// Which reference column set to print alongside grid results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceSet {
    En,
    Enhi,
    None,
}

fn variant_row_index(variant: &VariantConfig) -> usize {
    (variant.use_crf as usize) * 4 + (variant.use_char as usize) * 2 + (variant.use_context as usize)
}

fn regime_column(regime: EmbeddingRegime) -> Option<usize> {
    match regime {
        EmbeddingRegime::Sg300 => Some(0),
        EmbeddingRegime::G50w => Some(1),
        EmbeddingRegime::G300w => Some(2),
        EmbeddingRegime::G300c => Some(3),
        EmbeddingRegime::Custom => None,
    }
}

/// Published reference score for one cell, when the benchmark reported it.
pub fn reference_macro_f1(
    variant: &VariantConfig,
    regime: EmbeddingRegime,
    set: ReferenceSet,
) -> Option<f64> {
    let row = variant_row_index(variant);
    match set {
        ReferenceSet::En => regime_column(regime).map(|col| REFERENCE_EN[row][col]),
        ReferenceSet::Enhi => {
            (regime == EmbeddingRegime::Sg300).then(|| REFERENCE_ENHI[row])
        }
        ReferenceSet::None => None,
    }
}

/// Where each regime's vectors come from.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingResources {
    /// Vector files for the pre-trained regimes (G50W/G300W/G300C).
    pub pretrained_paths: BTreeMap<EmbeddingRegime, PathBuf>,
    /// Settings for in-corpus SGNS training (the SGNS300 regime).
    pub sgns: SgnsConfig,
    /// Dimension of the randomly initialized trainable `custom` table.
    pub custom_dim: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridCell {
    pub variant: String,
    pub regime: String,
    /// Macro-F1 in percent, like the reference scores.
    pub macro_f1: Option<f64>,
    pub reference: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridReport {
    pub regimes: Vec<String>,
    pub rows: Vec<GridRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridRow {
    pub variant: String,
    pub cells: Vec<GridCell>,
}

impl GridReport {
    /// Tab-separated layout mirroring the benchmark tables: one row per
    /// variant, one column per regime, references in parentheses.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str("Model");
        for regime in &self.regimes {
            let _ = write!(out, "\t{regime}");
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.variant);
            for cell in &row.cells {
                match (&cell.macro_f1, &cell.error) {
                    (Some(f1), _) => {
                        let _ = write!(out, "\t{f1:.3}");
                        if let Some(r) = cell.reference {
                            let _ = write!(out, " (ref {r:.3})");
                        }
                    }
                    (None, Some(e)) => {
                        let _ = write!(out, "\tERROR: {e}");
                    }
                    (None, None) => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn corpus_sentences(corpus: &Corpus) -> Vec<Vec<String>> {
    let mut out = Vec::with_capacity(corpus.len() * 2);
    for turn in &corpus.turns {
        if !turn.system_tokens.is_empty() {
            out.push(turn.system_tokens.clone());
        }
        out.push(turn.user_tokens.clone());
    }
    out
}

fn acquire_table(
    regime: EmbeddingRegime,
    vocab: &Vocabulary,
    sentences: &[Vec<String>],
    resources: &EmbeddingResources,
    seed: u64,
) -> Result<EmbeddingTable> {
    match regime {
        EmbeddingRegime::Sg300 => {
            let cfg = SgnsConfig {
                seed,
                ..resources.sgns.clone()
            };
            Ok(train_sgns(sentences, vocab, &cfg)?.table)
        }
        EmbeddingRegime::Custom => Ok(EmbeddingTable::random(
            vocab,
            resources.custom_dim,
            false,
            EmbeddingRegime::Custom,
            seed,
        )),
        pretrained => {
            let path = resources.pretrained_paths.get(&pretrained).ok_or_else(|| {
                Error::Config(format!("no vector file configured for the {pretrained} regime"))
            })?;
            load_pretrained(path, vocab, pretrained)
        }
    }
}

/// A fresh per-cell copy: trainable tables must not leak updates between
/// cells, frozen ones can be shared as-is.
fn fresh_table(table: &EmbeddingTable) -> EmbeddingTable {
    if table.frozen {
        table.clone()
    } else {
        EmbeddingTable::from_raw(
            table.vectors.to_vec(),
            table.row_count(),
            table.dim,
            false,
            table.source,
        )
    }
}

/// Train and evaluate each requested cell independently. Cells that cannot
/// run (a missing vector file, say) report their error in place; the grid
/// continues.
pub fn run_grid(
    train_corpus: &Corpus,
    test_corpus: &Corpus,
    variants: &[VariantConfig],
    regimes: &[EmbeddingRegime],
    resources: &EmbeddingResources,
    train_config: &TrainConfig,
    reference: ReferenceSet,
) -> Result<GridReport> {
    if train_corpus.is_empty() {
        return Err(Error::EmptyInput("grid: empty training corpus".into()));
    }
    let vocab = Vocabulary::build(
        train_corpus
            .turns
            .iter()
            .flat_map(|t| t.user_tokens.iter().chain(t.system_tokens.iter()))
            .map(|s| s.as_str()),
        1,
    )?;
    let needs_char = variants.iter().any(|v| v.use_char);
    let char_vocab = if needs_char {
        Some(CharVocabulary::build(
            train_corpus
                .turns
                .iter()
                .flat_map(|t| t.user_tokens.iter().chain(t.system_tokens.iter()))
                .map(|s| s.as_str()),
        )?)
    } else {
        None
    };
    let sentences = corpus_sentences(train_corpus);
    let seed = train_config.seed;

    let mut tables: BTreeMap<EmbeddingRegime, std::result::Result<EmbeddingTable, String>> =
        BTreeMap::new();
    for &regime in regimes {
        tables.entry(regime).or_insert_with(|| {
            acquire_table(regime, &vocab, &sentences, resources, seed)
                .map_err(|e| e.to_string())
        });
    }

    let mut rows = Vec::with_capacity(variants.len());
    for base_variant in variants {
        let mut cells = Vec::with_capacity(regimes.len());
        for &regime in regimes {
            let mut variant = *base_variant;
            variant.embedding_regime = regime;
            let reference_value = reference_macro_f1(&variant, regime, reference);
            let outcome = match &tables[&regime] {
                Err(e) => Err(e.clone()),
                Ok(table) => run_cell(
                    &variant,
                    &vocab,
                    char_vocab.as_ref(),
                    table,
                    train_corpus,
                    test_corpus,
                    train_config,
                )
                .map_err(|e| e.to_string()),
            };
            let (macro_f1, error) = match outcome {
                Ok(f1) => (Some(f1), None),
                Err(e) => (None, Some(e)),
            };
            cells.push(GridCell {
                variant: variant.name(),
                regime: regime.to_string(),
                macro_f1,
                reference: reference_value,
                error,
            });
        }
        rows.push(GridRow {
            variant: base_variant.name(),
            cells,
        });
    }
    Ok(GridReport {
        regimes: regimes.iter().map(|r| r.to_string()).collect(),
        rows,
    })
}

fn run_cell(
    variant: &VariantConfig,
    vocab: &Vocabulary,
    char_vocab: Option<&CharVocabulary>,
    table: &EmbeddingTable,
    train_corpus: &Corpus,
    test_corpus: &Corpus,
    train_config: &TrainConfig,
) -> Result<f64> {
    let char_vocab = if variant.use_char {
        Some(char_vocab.cloned().ok_or_else(|| {
            Error::Config("char variant requested but no character vocabulary built".into())
        })?)
    } else {
        None
    };
    let mut model = TaggerModel::new(
        *variant,
        vocab.clone(),
        char_vocab,
        train_corpus.label_set.clone(),
        fresh_table(table),
        train_config.seed,
    )?;
    train(&mut model, train_corpus, train_config)?;
    let report = evaluate(&model, test_corpus)?;
    Ok(report.macro_f1 * 100.0)
}
