//! Linear-chain CRF over per-token emission scores: sequence scoring, the
//! forward-algorithm log-partition, negative log-likelihood, Viterbi
//! decoding, and an optional IOB transition mask for constrained decoding.
//!
//! Training goes through the differentiable forward recursion; decoding is a
//! pure dynamic program on raw values. Start and end scores are kept as
//! explicit vectors rather than folded into the transition table.

use crate::corpus::{parse_label, LabelKind, LabelSet};
use crate::numeric::Tensor;
use crate::{Error, Result};

/// Additive score treated as a soft prohibition in masked decoding.
pub const MASK_PENALTY: f64 = -1e4;

/// Transition table plus start/end scores over a K-label inventory.
/// `transitions[i*K + j]` scores tag `j` following tag `i`.
#[derive(Clone, Debug)]
pub struct CrfParams {
    pub transitions: Tensor, // [K, K]
    pub start: Tensor,       // [K]
    pub end: Tensor,         // [K]
}

impl CrfParams {
    /// Zero-initialized trainable parameters (a uniform prior over paths).
    pub fn zeros(k: usize) -> CrfParams {
        CrfParams {
            transitions: Tensor::param(vec![0.0; k * k], &[k, k]).expect("transitions"),
            start: Tensor::param(vec![0.0; k], &[k]).expect("start"),
            end: Tensor::param(vec![0.0; k], &[k]).expect("end"),
        }
    }

    pub fn label_count(&self) -> usize {
        self.start.numel()
    }
}

/// A decoded or gold tag-id sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagSequence(pub Vec<usize>);

impl TagSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_emissions(emissions: &Tensor, params: &CrfParams) -> Result<(usize, usize)> {
    let shape = emissions.shape();
    if shape.len() != 2 {
        return Err(Error::Dimension(format!(
            "crf: emissions must be [T,K], got {shape:?}"
        )));
    }
    let (t_len, k) = (shape[0], shape[1]);
    if t_len == 0 {
        return Err(Error::EmptyInput("crf: empty emission sequence".into()));
    }
    if k != params.label_count() || params.transitions.shape() != vec![k, k] {
        return Err(Error::Dimension(format!(
            "crf: emissions have {k} labels but params cover {}",
            params.label_count()
        )));
    }
    Ok((t_len, k))
}

fn check_tags(tags: &[usize], t_len: usize, k: usize) -> Result<()> {
    if tags.len() != t_len {
        return Err(Error::Dimension(format!(
            "crf: {} tags for {} emission rows",
            tags.len(),
            t_len
        )));
    }
    if let Some(&bad) = tags.iter().find(|&&t| t >= k) {
        return Err(Error::Dimension(format!(
            "crf: tag id {bad} out of range for {k} labels"
        )));
    }
    Ok(())
}

/// Path score of one tag sequence:
/// `start[t1] + sum_t emissions[t, tag_t] + sum_t transitions[tag_t, tag_t+1]
/// + end[tT]`. Differentiable in emissions and parameters.
pub fn score_sequence(emissions: &Tensor, tags: &[usize], params: &CrfParams) -> Result<Tensor> {
    let (t_len, k) = check_emissions(emissions, params)?;
    check_tags(tags, t_len, k)?;

    let emit_idx: Vec<usize> = tags.iter().enumerate().map(|(t, &tag)| t * k + tag).collect();
    let emit_score = emissions.gather(&emit_idx)?.sum();
    let trans_idx: Vec<usize> = tags.windows(2).map(|w| w[0] * k + w[1]).collect();
    let trans_score = params.transitions.gather(&trans_idx)?.sum();
    let start_score = params.start.gather(&[tags[0]])?.sum();
    let end_score = params.end.gather(&[tags[t_len - 1]])?.sum();

    emit_score
        .add(&trans_score)?
        .add(&start_score)?
        .add(&end_score)
}

/// Log of the summed exponentiated scores of all K^T sequences, computed by
/// the forward recursion in log space. Differentiable.
pub fn log_partition(emissions: &Tensor, params: &CrfParams) -> Result<Tensor> {
    let (t_len, _k) = check_emissions(emissions, params)?;

    // alpha[j] = log sum of path scores ending in tag j at the current step.
    let mut alpha = emissions.row(0)?.add(&params.start)?;
    if t_len > 1 {
        // trans_t[j*K + i] = transitions[i -> j]; adding alpha along the last
        // axis then reducing it gives the new alpha in one logsumexp per tag.
        let trans_t = params.transitions.transpose()?;
        for t in 1..t_len {
            let scores = trans_t.add(&alpha)?;
            alpha = scores.logsumexp_lastdim()?.add(&emissions.row(t)?)?;
        }
    }
    alpha.add(&params.end)?.logsumexp_lastdim()
}

/// Negative log-likelihood of the gold sequence: `log_partition - gold score`.
/// Non-negative by construction.
pub fn crf_nll(emissions: &Tensor, tags: &[usize], params: &CrfParams) -> Result<Tensor> {
    let log_z = log_partition(emissions, params)?;
    let gold = score_sequence(emissions, tags, params)?;
    log_z.sub(&gold)
}

/// Max-scoring tag sequence and its score. Ties prefer the lower label id,
/// both along the lattice and at the final step, so decoding is
/// deterministic.
pub fn viterbi_decode(emissions: &Tensor, params: &CrfParams) -> Result<(TagSequence, f64)> {
    let (t_len, k) = check_emissions(emissions, params)?;
    let emit = emissions.data();
    let trans = params.transitions.data();
    let start = params.start.data();
    let end = params.end.data();

    let mut delta: Vec<f64> = (0..k).map(|j| start[j] + emit[j]).collect();
    let mut backptr: Vec<Vec<usize>> = Vec::with_capacity(t_len.saturating_sub(1));
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; k];
        let mut ptr = vec![0usize; k];
        for j in 0..k {
            let mut best = f64::NEG_INFINITY;
            let mut best_i = 0;
            for i in 0..k {
                let cand = delta[i] + trans[i * k + j];
                if cand > best {
                    best = cand;
                    best_i = i;
                }
            }
            next[j] = best + emit[t * k + j];
            ptr[j] = best_i;
        }
        delta = next;
        backptr.push(ptr);
    }

    let mut best_score = f64::NEG_INFINITY;
    let mut best_j = 0;
    for j in 0..k {
        let cand = delta[j] + end[j];
        if cand > best_score {
            best_score = cand;
            best_j = j;
        }
    }

    let mut tags = vec![best_j];
    for ptr in backptr.iter().rev() {
        tags.push(ptr[*tags.last().unwrap()]);
    }
    tags.reverse();
    Ok((TagSequence(tags), best_score))
}

/// Transition and start penalties that forbid ill-formed IOB sequences:
/// `I-x` may only follow `B-x` or `I-x`, and may not start a sequence.
#[derive(Clone, Debug)]
pub struct IobMask {
    pub transitions: Tensor, // [K, K] of {0, MASK_PENALTY}
    pub start: Tensor,       // [K] of {0, MASK_PENALTY}
}

impl IobMask {
    /// Masked copies of `params` for constrained decoding.
    pub fn apply(&self, params: &CrfParams) -> Result<CrfParams> {
        Ok(CrfParams {
            transitions: params.transitions.add(&self.transitions)?,
            start: params.start.add(&self.start)?,
            end: params.end.clone(),
        })
    }
}

/// Build the IOB constraint mask for a label set.
pub fn iob_constraint_mask(labels: &LabelSet) -> Result<IobMask> {
    let k = labels.len();
    let parsed: Vec<LabelKind> = labels
        .labels()
        .iter()
        .map(|l| parse_label(l))
        .collect::<Result<_>>()?;
    let mut trans = vec![0.0; k * k];
    let mut start = vec![0.0; k];
    for (j, to) in parsed.iter().enumerate() {
        let LabelKind::Inside(entity) = to else {
            continue;
        };
        start[j] = MASK_PENALTY;
        for (i, from) in parsed.iter().enumerate() {
            let continues = match from {
                LabelKind::Begin(e) | LabelKind::Inside(e) => e == entity,
                LabelKind::Outside => false,
            };
            if !continues {
                trans[i * k + j] = MASK_PENALTY;
            }
        }
    }
    Ok(IobMask {
        transitions: Tensor::new(trans, &[k, k])?,
        start: Tensor::new(start, &[k])?,
    })
}

#[cfg(test)]
pub mod oracle {
    //! Brute-force reference: enumerate every one of the K^T sequences and
    //! score it with plain arithmetic, independently of the tensor ops.

    /// Score of a single sequence from raw score arrays.
    pub fn sequence_score(
        emissions: &[f64],
        k: usize,
        tags: &[usize],
        transitions: &[f64],
        start: &[f64],
        end: &[f64],
    ) -> f64 {
        let mut score = start[tags[0]] + end[tags[tags.len() - 1]];
        for (t, &tag) in tags.iter().enumerate() {
            score += emissions[t * k + tag];
        }
        for w in tags.windows(2) {
            score += transitions[w[0] * k + w[1]];
        }
        score
    }

    /// All K^T sequences with their scores.
    pub fn enumerate_scores(
        emissions: &[f64],
        t_len: usize,
        k: usize,
        transitions: &[f64],
        start: &[f64],
        end: &[f64],
    ) -> Vec<(Vec<usize>, f64)> {
        let total = k.pow(t_len as u32);
        let mut out = Vec::with_capacity(total);
        for mut code in 0..total {
            let mut tags = vec![0usize; t_len];
            for slot in (0..t_len).rev() {
                tags[slot] = code % k;
                code /= k;
            }
            let score = sequence_score(emissions, k, &tags, transitions, start, end);
            out.push((tags, score));
        }
        out
    }

    pub fn logsumexp(values: impl Iterator<Item = f64>) -> f64 {
        let values: Vec<f64> = values.collect();
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    }
}
