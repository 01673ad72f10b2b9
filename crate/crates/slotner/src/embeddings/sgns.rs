//! Skip-gram with negative sampling, trained on the tagged corpus itself.
//!
//! Center/context pairs inside a fixed window are pushed together through the
//! logistic objective while negatives drawn from the unigram^0.75 table are
//! pushed apart. Training is plain seeded SGD with linearly decaying rate, so
//! a fixed seed gives a bitwise-identical table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numeric::Tensor;
use crate::{Error, Result};

use super::table::{EmbeddingRegime, EmbeddingTable};
use super::vocab::{Vocabulary, UNK_ID};

#[derive(Clone, Debug)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 300,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

/// Training output: the center-vector table (frozen) plus the raw context
/// vectors, kept around because center-context geometry is what the
/// objective actually shapes.
pub struct SgnsModel {
    pub table: EmbeddingTable,
    pub context_vectors: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cumulative unigram^0.75 sampling table over real token ids (>= 2).
struct NegativeTable {
    ids: Vec<usize>,
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(frequencies: &[(usize, usize)]) -> NegativeTable {
        let mut ids = Vec::with_capacity(frequencies.len());
        let mut cumulative = Vec::with_capacity(frequencies.len());
        let mut total = 0.0;
        for &(id, count) in frequencies {
            total += (count as f64).powf(0.75);
            ids.push(id);
            cumulative.push(total);
        }
        NegativeTable { ids, cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty table");
        let x = rng.gen_range(0.0..total);
        let pos = self.cumulative.partition_point(|&c| c <= x);
        self.ids[pos.min(self.ids.len() - 1)]
    }
}

/// Train SGNS vectors aligned with `vocab` over tokenized sentences.
/// UNK and PAD ids are dropped from the stream; their rows stay zero.
pub fn train_sgns(
    sentences: &[Vec<String>],
    vocab: &Vocabulary,
    config: &SgnsConfig,
) -> Result<SgnsModel> {
    if config.dim == 0 || config.window == 0 || config.epochs == 0 {
        return Err(Error::Config(
            "sgns: dim, window and epochs must all be positive".into(),
        ));
    }
    let streams: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| {
            s.iter()
                .map(|t| vocab.lookup(t))
                .filter(|&id| id > UNK_ID)
                .collect()
        })
        .collect();

    let mut counts = vec![0usize; vocab.len()];
    let mut pair_count = 0usize;
    for ids in &streams {
        for &id in ids {
            counts[id] += 1;
        }
        for center in 0..ids.len() {
            let lo = center.saturating_sub(config.window);
            let hi = (center + config.window).min(ids.len().saturating_sub(1));
            pair_count += hi - lo; // window positions excluding the center itself
        }
    }
    if pair_count == 0 {
        return Err(Error::EmptyInput(
            "sgns: corpus is too small to form any center/context pair".into(),
        ));
    }
    let frequencies: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .skip(2)
        .filter(|(_, &c)| c > 0)
        .map(|(id, &c)| (id, c))
        .collect();
    if frequencies.len() < 2 {
        return Err(Error::EmptyInput(
            "sgns: need at least 2 distinct trainable tokens".into(),
        ));
    }
    let negative_table = NegativeTable::new(&frequencies);

    let d = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 0.5 / d as f64;
    let mut center_vecs = vec![0.0f64; vocab.len() * d];
    for row in 2..vocab.len() {
        for c in 0..d {
            center_vecs[row * d + c] = rng.gen_range(-bound..bound);
        }
    }
    let mut context_vecs = vec![0.0f64; vocab.len() * d];

    let total_centers: usize = streams.iter().map(|s| s.len()).sum();
    let total_work = (total_centers * config.epochs).max(1);
    let mut done = 0usize;
    let mut grad_center = vec![0.0f64; d];

    for _epoch in 0..config.epochs {
        for ids in &streams {
            for center in 0..ids.len() {
                let lr = (config.learning_rate
                    * (1.0 - done as f64 / total_work as f64))
                    .max(config.learning_rate * 1e-4);
                done += 1;
                let c_id = ids[center];
                let lo = center.saturating_sub(config.window);
                let hi = (center + config.window).min(ids.len() - 1);
                for (offset, &ctx_id) in ids[lo..=hi].iter().enumerate() {
                    if lo + offset == center {
                        continue;
                    }
                    grad_center.iter_mut().for_each(|g| *g = 0.0);
                    let c_row = c_id * d;
                    // Positive pair plus `negatives` sampled non-contexts.
                    for k in 0..=config.negatives {
                        let (target_id, label) = if k == 0 {
                            (ctx_id, 1.0)
                        } else {
                            let mut neg = negative_table.sample(&mut rng);
                            let mut tries = 0;
                            while neg == ctx_id && tries < 8 {
                                neg = negative_table.sample(&mut rng);
                                tries += 1;
                            }
                            if neg == ctx_id {
                                continue;
                            }
                            (neg, 0.0)
                        };
                        let t_row = target_id * d;
                        let mut dot = 0.0;
                        for j in 0..d {
                            dot += center_vecs[c_row + j] * context_vecs[t_row + j];
                        }
                        let g = (label - sigmoid(dot)) * lr;
                        for j in 0..d {
                            grad_center[j] += g * context_vecs[t_row + j];
                            context_vecs[t_row + j] += g * center_vecs[c_row + j];
                        }
                    }
                    for j in 0..d {
                        center_vecs[c_row + j] += grad_center[j];
                    }
                }
            }
        }
    }

    // Specials stay zero by construction (they never appear in streams).
    let table = EmbeddingTable {
        vectors: Tensor::new(center_vecs, &[vocab.len(), d]).expect("table shape"),
        dim: d,
        frozen: true,
        source: EmbeddingRegime::Sg300,
    };
    Ok(SgnsModel {
        table,
        context_vectors: context_vecs,
    })
}
