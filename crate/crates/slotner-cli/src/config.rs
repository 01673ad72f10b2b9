//! Flat key-value configuration shared by `train` and `run-grid`.
//!
//! The file mirrors the variant and training field names one to one; every
//! key is optional and command-line flags override file values. The resolved
//! form (all defaults materialized) is what run manifests record.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use slotner::embeddings::{EmbeddingRegime, SgnsConfig};
use slotner::grid::EmbeddingResources;
use slotner::recurrent::{CellKind, ContextInjection};
use slotner::tagger::VariantConfig;
use slotner::train::TrainConfig;

use crate::{CliError, CliResult};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    // Variant flags and sizes.
    pub use_char: Option<bool>,
    pub use_crf: Option<bool>,
    pub use_context: Option<bool>,
    pub embedding_regime: Option<String>,
    pub hidden_dim: Option<usize>,
    pub layers: Option<usize>,
    pub cell: Option<String>,
    pub char_dim: Option<usize>,
    pub char_filters: Option<usize>,
    pub context_injection: Option<String>,

    // Training protocol.
    pub max_epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub patience: Option<usize>,
    pub dev_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub shuffle_each_epoch: Option<bool>,

    // Vocabulary and embedding resources.
    pub min_count: Option<usize>,
    pub custom_dim: Option<usize>,
    pub pretrained_path: Option<PathBuf>,
    pub g50w_path: Option<PathBuf>,
    pub g300w_path: Option<PathBuf>,
    pub g300c_path: Option<PathBuf>,
    pub sgns_dim: Option<usize>,
    pub sgns_window: Option<usize>,
    pub sgns_negatives: Option<usize>,
    pub sgns_epochs: Option<usize>,
    pub sgns_learning_rate: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<FileConfig> {
        let text = fs::read_to_string(path).map_err(|e| crate::io_err(path, e))?;
        toml::from_str(&text).map_err(|e| {
            CliError::Validation(format!("{}: {e}", path.display()))
        })
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub regime: Option<String>,
    pub vectors: Option<PathBuf>,
}

/// Everything a training run needs, with defaults materialized.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedConfig {
    pub variant: VariantConfig,
    pub train: TrainConfig,
    pub min_count: usize,
    pub custom_dim: usize,
    pub sgns_dim: usize,
    pub sgns_window: usize,
    pub sgns_negatives: usize,
    pub sgns_epochs: usize,
    pub sgns_learning_rate: f64,
    pub pretrained_paths: BTreeMap<String, PathBuf>,
}

impl ResolvedConfig {
    pub fn resolve(file: &FileConfig, overrides: &Overrides) -> CliResult<ResolvedConfig> {
        let bad = |msg: String| CliError::Validation(msg);

        let mut variant = VariantConfig::default();
        variant.use_char = file.use_char.unwrap_or(variant.use_char);
        variant.use_crf = file.use_crf.unwrap_or(variant.use_crf);
        variant.use_context = file.use_context.unwrap_or(variant.use_context);
        if let Some(regime) = overrides.regime.as_deref().or(file.embedding_regime.as_deref()) {
            variant.embedding_regime = EmbeddingRegime::parse(regime)?;
        }
        variant.hidden_dim = file.hidden_dim.unwrap_or(variant.hidden_dim);
        variant.layers = file.layers.unwrap_or(variant.layers);
        if let Some(cell) = &file.cell {
            variant.cell = CellKind::parse(cell)?;
        }
        variant.char_dim = file.char_dim.unwrap_or(variant.char_dim);
        variant.char_filters = file.char_filters.unwrap_or(variant.char_filters);
        if let Some(injection) = &file.context_injection {
            variant.context_injection = match injection.as_str() {
                "first_layer" => ContextInjection::FirstLayer,
                "all_layers" => ContextInjection::AllLayers,
                other => {
                    return Err(bad(format!(
                        "unknown context_injection {other:?} (expected first_layer or all_layers)"
                    )))
                }
            };
        }
        if variant.hidden_dim == 0 || variant.layers == 0 {
            return Err(bad("hidden_dim and layers must be positive".into()));
        }

        let mut train = TrainConfig::default();
        train.max_epochs = overrides
            .max_epochs
            .or(file.max_epochs)
            .unwrap_or(train.max_epochs);
        train.learning_rate = overrides
            .learning_rate
            .or(file.learning_rate)
            .unwrap_or(train.learning_rate);
        train.patience = file.patience.unwrap_or(train.patience);
        train.dev_fraction = file.dev_fraction.unwrap_or(train.dev_fraction);
        train.seed = overrides.seed.or(file.seed).unwrap_or(train.seed);
        train.shuffle_each_epoch = file.shuffle_each_epoch.unwrap_or(train.shuffle_each_epoch);

        let mut pretrained_paths = BTreeMap::new();
        let single = overrides.vectors.as_ref().or(file.pretrained_path.as_ref());
        for (regime, path) in [
            (EmbeddingRegime::G50w, file.g50w_path.as_ref().or(single)),
            (EmbeddingRegime::G300w, file.g300w_path.as_ref().or(single)),
            (EmbeddingRegime::G300c, file.g300c_path.as_ref().or(single)),
        ] {
            if let Some(p) = path {
                pretrained_paths.insert(regime.to_string(), p.clone());
            }
        }

        Ok(ResolvedConfig {
            variant,
            train,
            min_count: file.min_count.unwrap_or(1),
            custom_dim: file.custom_dim.unwrap_or(64),
            sgns_dim: file.sgns_dim.unwrap_or(300),
            sgns_window: file.sgns_window.unwrap_or(5),
            sgns_negatives: file.sgns_negatives.unwrap_or(5),
            sgns_epochs: file.sgns_epochs.unwrap_or(5),
            sgns_learning_rate: file.sgns_learning_rate.unwrap_or(0.025),
            pretrained_paths,
        })
    }

    pub fn sgns_config(&self) -> SgnsConfig {
        SgnsConfig {
            dim: self.sgns_dim,
            window: self.sgns_window,
            negatives: self.sgns_negatives,
            epochs: self.sgns_epochs,
            learning_rate: self.sgns_learning_rate,
            seed: self.train.seed,
        }
    }

    pub fn embedding_resources(&self) -> CliResult<EmbeddingResources> {
        let mut paths = BTreeMap::new();
        for (name, path) in &self.pretrained_paths {
            paths.insert(EmbeddingRegime::parse(name)?, path.clone());
        }
        Ok(EmbeddingResources {
            pretrained_paths: paths,
            sgns: self.sgns_config(),
            custom_dim: self.custom_dim,
        })
    }
}
