//! Span-level evaluation: exact-match precision/recall/F1 per entity type,
//! macro-averaged over the label set's types, plus token-level figures for
//! comparison.
//!
//! A predicted span counts only if its type, start and end all equal a gold
//! span. Types absent from both gold and prediction score 0 by default and
//! are flagged; [`AbsentTypePolicy::Exclude`] drops them from the macro mean
//! instead, since that choice changes the number.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::corpus::{extract_spans, Corpus, Span};
use crate::tagger::TaggerModel;
use crate::{Error, Result};

/// How entity types with no gold and no predicted spans enter the macro mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbsentTypePolicy {
    /// Count them as F1 = 0 (the default; conservative).
    CountAsZero,
    /// Leave them out of the mean.
    Exclude,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TypeMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_count: usize,
    pub pred_count: usize,
    /// True when the type never occurred in gold or prediction.
    pub absent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub per_type: BTreeMap<String, TypeMetrics>,
    /// Span-level macro-F1 over the label set's entity types.
    pub macro_f1: f64,
    /// Same mean with absent types excluded, for comparison.
    pub macro_f1_excluding_absent: f64,
    /// Fraction of tokens whose predicted label string equals gold.
    pub token_accuracy: f64,
    /// Token-level macro-F1 over the non-`O` IOB labels.
    pub token_macro_f1: f64,
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metric core over already-predicted tag sequences; `entity_types` fixes
/// the set the macro average runs over.
pub fn report_from_predictions(
    gold: &[Vec<String>],
    predicted: &[Vec<String>],
    entity_types: &[&str],
    policy: AbsentTypePolicy,
) -> Result<EvalReport> {
    if gold.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} gold sequences vs {} predicted",
            gold.len(),
            predicted.len()
        )));
    }

    #[derive(Default, Clone)]
    struct Counts {
        tp: usize,
        gold: usize,
        pred: usize,
    }
    let mut span_counts: BTreeMap<&str, Counts> = entity_types
        .iter()
        .map(|&t| (t, Counts::default()))
        .collect();
    let mut token_counts: BTreeMap<String, Counts> = BTreeMap::new();
    let mut tokens_total = 0usize;
    let mut tokens_correct = 0usize;

    for (g_tags, p_tags) in gold.iter().zip(predicted) {
        if g_tags.len() != p_tags.len() {
            return Err(Error::Dimension(format!(
                "gold sequence of {} tags vs prediction of {}",
                g_tags.len(),
                p_tags.len()
            )));
        }
        let g_spans: HashSet<Span> = extract_spans(g_tags)?.into_iter().collect();
        let p_spans: HashSet<Span> = extract_spans(p_tags)?.into_iter().collect();
        for span in &g_spans {
            if let Some(c) = span_counts.get_mut(span.entity.as_str()) {
                c.gold += 1;
                if p_spans.contains(span) {
                    c.tp += 1;
                }
            }
        }
        for span in &p_spans {
            if let Some(c) = span_counts.get_mut(span.entity.as_str()) {
                c.pred += 1;
            }
        }
        for (g, p) in g_tags.iter().zip(p_tags) {
            tokens_total += 1;
            if g == p {
                tokens_correct += 1;
            }
            if g != "O" {
                let c = token_counts.entry(g.clone()).or_default();
                c.gold += 1;
                if g == p {
                    c.tp += 1;
                }
            }
            if p != "O" {
                token_counts.entry(p.clone()).or_default().pred += 1;
            }
        }
    }

    let mut per_type = BTreeMap::new();
    let mut sum_all = 0.0;
    let mut sum_present = 0.0;
    let mut present = 0usize;
    for (name, c) in &span_counts {
        let precision = ratio(c.tp, c.pred);
        let recall = ratio(c.tp, c.gold);
        let f1 = f1_of(precision, recall);
        let absent = c.gold == 0 && c.pred == 0;
        per_type.insert(
            name.to_string(),
            TypeMetrics {
                precision,
                recall,
                f1,
                gold_count: c.gold,
                pred_count: c.pred,
                absent,
            },
        );
        sum_all += f1;
        if !absent {
            sum_present += f1;
            present += 1;
        }
    }
    let macro_all = if span_counts.is_empty() {
        0.0
    } else {
        sum_all / span_counts.len() as f64
    };
    let macro_present = if present == 0 {
        0.0
    } else {
        sum_present / present as f64
    };
    let macro_f1 = match policy {
        AbsentTypePolicy::CountAsZero => macro_all,
        AbsentTypePolicy::Exclude => macro_present,
    };

    let token_macro_f1 = if token_counts.is_empty() {
        0.0
    } else {
        token_counts
            .values()
            .map(|c| f1_of(ratio(c.tp, c.pred), ratio(c.tp, c.gold)))
            .sum::<f64>()
            / token_counts.len() as f64
    };

    Ok(EvalReport {
        per_type,
        macro_f1,
        macro_f1_excluding_absent: macro_present,
        token_accuracy: ratio(tokens_correct, tokens_total),
        token_macro_f1,
    })
}

/// Predict every turn of `corpus` with `model` and score it. Pure: the same
/// model and corpus always produce the same report.
pub fn evaluate_with(
    model: &TaggerModel,
    corpus: &Corpus,
    policy: AbsentTypePolicy,
) -> Result<EvalReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("evaluation corpus is empty".into()));
    }
    if corpus.label_set != model.labels {
        return Err(Error::LabelSetMismatch(format!(
            "corpus labels {:?} differ from model labels {:?}",
            corpus.label_set.labels(),
            model.labels.labels()
        )));
    }
    let mut gold = Vec::with_capacity(corpus.len());
    let mut predicted = Vec::with_capacity(corpus.len());
    for turn in &corpus.turns {
        gold.push(turn.tags.clone());
        predicted.push(model.predict_labels(turn)?);
    }
    report_from_predictions(
        &gold,
        &predicted,
        &model.labels.entity_types(),
        policy,
    )
}

/// [`evaluate_with`] under the default absent-type policy.
pub fn evaluate(model: &TaggerModel, corpus: &Corpus) -> Result<EvalReport> {
    evaluate_with(model, corpus, AbsentTypePolicy::CountAsZero)
}
