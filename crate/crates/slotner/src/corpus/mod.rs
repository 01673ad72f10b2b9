//! Data model and ingestion for conversational IOB-tagged corpora.
//!
//! The interchange format is UTF-8 JSON Lines with pre-tokenized fields; the
//! engine never tokenizes raw strings, so tag/token alignment is exact by
//! construction. See [`DialogueTurn`] for the per-line schema.

mod synthetic;

pub use synthetic::{
    generate_blended_corpus, generate_context_corpus, generate_overfit_corpus,
    generate_unambiguous_corpus, AMBIGUOUS_CITY_PROMPTS,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One training sample: the previous system utterance, the user utterance and
/// its aligned IOB tags, plus a language mark carried as metadata only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub dialogue_id: String,
    pub turn_index: usize,
    /// Tokens of the system utterance immediately before the user turn; empty
    /// on the first turn of a dialogue.
    pub system_tokens: Vec<String>,
    pub user_tokens: Vec<String>,
    /// IOB2 labels, one per user token.
    pub tags: Vec<String>,
    pub lang: String,
}

/// Parsed form of one IOB label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelKind<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

/// Split a label into its IOB kind, rejecting anything that is not `O`,
/// `B-<type>` or `I-<type>`.
pub fn parse_label(label: &str) -> Result<LabelKind<'_>> {
    if label == "O" {
        return Ok(LabelKind::Outside);
    }
    if let Some(entity) = label.strip_prefix("B-") {
        if !entity.is_empty() {
            return Ok(LabelKind::Begin(entity));
        }
    }
    if let Some(entity) = label.strip_prefix("I-") {
        if !entity.is_empty() {
            return Ok(LabelKind::Inside(entity));
        }
    }
    Err(Error::Label(label.to_string()))
}

/// Ordered IOB label inventory: `O` first, then `B-x`/`I-x` pairs in
/// lexicographic entity order, closed under B/I pairing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    /// Build from every label observed in a tag stream.
    pub fn from_tags<'a>(tags: impl IntoIterator<Item = &'a str>) -> Result<LabelSet> {
        let mut entities = BTreeSet::new();
        for tag in tags {
            match parse_label(tag)? {
                LabelKind::Outside => {}
                LabelKind::Begin(e) | LabelKind::Inside(e) => {
                    entities.insert(e.to_string());
                }
            }
        }
        Ok(LabelSet::from_entities(entities.iter().map(|s| s.as_str())))
    }

    /// Build from entity type names directly.
    pub fn from_entities<'a>(entities: impl IntoIterator<Item = &'a str>) -> LabelSet {
        let sorted: BTreeSet<&str> = entities.into_iter().collect();
        let mut labels = vec!["O".to_string()];
        for e in sorted {
            labels.push(format!("B-{e}"));
            labels.push(format!("I-{e}"));
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        LabelSet { labels, index }
    }

    /// Rebuild from a stored label list, re-checking the ordering invariants.
    pub fn from_labels(labels: Vec<String>) -> Result<LabelSet> {
        let rebuilt = LabelSet::from_tags(labels.iter().map(|s| s.as_str()))?;
        if rebuilt.labels != labels {
            return Err(Error::Config(format!(
                "label list is not in canonical order: {labels:?}"
            )));
        }
        Ok(rebuilt)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn id_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    /// Entity types in label order (each appears once).
    pub fn entity_types(&self) -> Vec<&str> {
        self.labels
            .iter()
            .filter_map(|l| l.strip_prefix("B-"))
            .collect()
    }

    /// Map a tag sequence to ids, failing on labels outside the set.
    pub fn ids_of(&self, tags: &[String]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| {
                self.id_of(t).ok_or_else(|| {
                    Error::LabelSetMismatch(format!("label {t:?} not in the model's label set"))
                })
            })
            .collect()
    }
}

/// An immutable collection of turns with the label inventory observed in it.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub turns: Vec<DialogueTurn>,
    pub label_set: LabelSet,
}

impl Corpus {
    /// Assemble from turns, deriving the label set from the observed tags.
    pub fn from_turns(turns: Vec<DialogueTurn>) -> Result<Corpus> {
        let label_set =
            LabelSet::from_tags(turns.iter().flat_map(|t| t.tags.iter().map(|s| s.as_str())))?;
        Ok(Corpus { turns, label_set })
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

/// A position where the IOB2 well-formedness rule is broken.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IobViolation {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for IobViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "position {}: {}", self.position, self.message)
    }
}

/// Report every position where `I-x` follows neither `B-x` nor `I-x`
/// (including a sequence-initial `I-x`). Empty output means well-formed.
pub fn validate_iob(tags: &[String]) -> Result<Vec<IobViolation>> {
    let mut violations = Vec::new();
    let mut prev: Option<&str> = None; // entity type continued by the previous tag
    for (pos, tag) in tags.iter().enumerate() {
        match parse_label(tag)? {
            LabelKind::Outside => prev = None,
            LabelKind::Begin(e) => prev = Some(e),
            LabelKind::Inside(e) => {
                if prev != Some(e) {
                    violations.push(IobViolation {
                        position: pos,
                        message: format!("{tag} follows neither B-{e} nor I-{e}"),
                    });
                }
                prev = Some(e);
            }
        }
    }
    Ok(violations)
}

/// A labeled token span; `end` is inclusive.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub entity: String,
    pub start: usize,
    pub end: usize,
}

/// Extract maximal `B-x (I-x)*` runs as spans.
///
/// Ill-formed input is repaired rather than rejected: an `I-x` that does not
/// continue an `x` span starts a new span, as if it were `B-x`. Model
/// predictions can be ill-formed whenever decoding runs unconstrained.
pub fn extract_spans(tags: &[String]) -> Result<Vec<Span>> {
    let mut spans = Vec::new();
    let mut open: Option<(String, usize)> = None; // (entity, start)
    let close = |open: &mut Option<(String, usize)>, end: usize, spans: &mut Vec<Span>| {
        if let Some((entity, start)) = open.take() {
            spans.push(Span {
                entity,
                start,
                end,
            });
        }
    };
    for (pos, tag) in tags.iter().enumerate() {
        match parse_label(tag)? {
            LabelKind::Outside => close(&mut open, pos.wrapping_sub(1), &mut spans),
            LabelKind::Begin(e) => {
                close(&mut open, pos.wrapping_sub(1), &mut spans);
                open = Some((e.to_string(), pos));
            }
            LabelKind::Inside(e) => match &open {
                Some((current, _)) if current == e => {}
                _ => {
                    close(&mut open, pos.wrapping_sub(1), &mut spans);
                    open = Some((e.to_string(), pos));
                }
            },
        }
    }
    close(&mut open, tags.len().wrapping_sub(1), &mut spans);
    Ok(spans)
}

/// Inverse of [`extract_spans`] for well-formed, non-overlapping span lists.
pub fn tags_from_spans(spans: &[Span], len: usize) -> Result<Vec<String>> {
    let mut tags = vec!["O".to_string(); len];
    for span in spans {
        if span.start > span.end || span.end >= len {
            return Err(Error::Config(format!(
                "span {span:?} does not fit a {len}-token sequence"
            )));
        }
        for (offset, slot) in tags[span.start..=span.end].iter_mut().enumerate() {
            if slot != "O" {
                return Err(Error::Config(format!("span {span:?} overlaps another span")));
            }
            let prefix = if offset == 0 { "B" } else { "I" };
            *slot = format!("{prefix}-{}", span.entity);
        }
    }
    Ok(tags)
}

fn describe_turn_problems(turn: &DialogueTurn) -> Vec<String> {
    let mut problems = Vec::new();
    if turn.user_tokens.is_empty() {
        problems.push("empty user utterance".to_string());
    }
    if turn.tags.len() != turn.user_tokens.len() {
        problems.push(format!(
            "{} tags for {} user tokens",
            turn.tags.len(),
            turn.user_tokens.len()
        ));
    }
    for tag in &turn.tags {
        if parse_label(tag).is_err() {
            problems.push(format!("unparseable label {tag:?}"));
        }
    }
    problems
}

/// Load a JSON-Lines corpus. Every malformed line is collected into one
/// report; any problem aborts the load.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut turns = Vec::new();
    let mut problems = Vec::new();
    let mut line_no = 0;
    for line in reader.lines() {
        line_no += 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<DialogueTurn>(&line) {
            Ok(turn) => {
                let turn_problems = describe_turn_problems(&turn);
                if turn_problems.is_empty() {
                    turns.push(turn);
                } else {
                    for p in turn_problems {
                        problems.push(format!("line {line_no}: {p}"));
                    }
                }
            }
            Err(e) => problems.push(format!("line {line_no}: {e}")),
        }
    }
    if !problems.is_empty() {
        return Err(Error::CorpusInvalid {
            path: path.to_path_buf(),
            problems,
        });
    }
    if turns.is_empty() {
        return Err(Error::EmptyInput(format!(
            "corpus {} contains no turns",
            path.display()
        )));
    }
    Corpus::from_turns(turns)
}

/// Write a corpus in the JSON-Lines interchange format.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for turn in &corpus.turns {
        serde_json::to_writer(&mut out, turn).expect("turn serialization");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Deterministic seeded shuffle-and-cut: the first `train_count` shuffled
/// turns become the training half, the rest the test half. Both halves keep
/// the parent's label set.
pub fn split_corpus(corpus: &Corpus, train_count: usize, seed: u64) -> Result<(Corpus, Corpus)> {
    if train_count >= corpus.len() {
        return Err(Error::Config(format!(
            "train_count {} must be smaller than the corpus size {}",
            train_count,
            corpus.len()
        )));
    }
    let mut indices: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let train = indices[..train_count]
        .iter()
        .map(|&i| corpus.turns[i].clone())
        .collect();
    let test = indices[train_count..]
        .iter()
        .map(|&i| corpus.turns[i].clone())
        .collect();
    Ok((
        Corpus {
            turns: train,
            label_set: corpus.label_set.clone(),
        },
        Corpus {
            turns: test,
            label_set: corpus.label_set.clone(),
        },
    ))
}

/// Corpus statistics for inspection: counts that describe the data without
/// interpreting it.
#[derive(Clone, Debug, Serialize)]
pub struct CorpusStats {
    pub turns: usize,
    pub labels: Vec<String>,
    pub span_counts: BTreeMap<String, usize>,
    pub unique_values: BTreeMap<String, usize>,
    pub language_counts: BTreeMap<String, usize>,
    /// Distinct tag strings other than `O` observed in the data.
    pub unique_tag_strings: usize,
    /// Distinct (entity type, surface form) pairs observed in the data.
    pub unique_typed_surfaces: usize,
    pub iob_violations: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> Result<CorpusStats> {
    let mut span_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut surfaces: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut language_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut tag_strings: BTreeSet<&str> = BTreeSet::new();
    let mut violations = 0;
    for turn in &corpus.turns {
        *language_counts.entry(turn.lang.clone()).or_default() += 1;
        violations += validate_iob(&turn.tags)?.len();
        for tag in &turn.tags {
            if tag != "O" {
                tag_strings.insert(tag);
            }
        }
        for span in extract_spans(&turn.tags)? {
            *span_counts.entry(span.entity.clone()).or_default() += 1;
            let surface = turn.user_tokens[span.start..=span.end].join(" ");
            surfaces.entry(span.entity).or_default().insert(surface);
        }
    }
    let unique_typed_surfaces = surfaces.values().map(|s| s.len()).sum();
    let unique_values = surfaces.into_iter().map(|(k, v)| (k, v.len())).collect();
    Ok(CorpusStats {
        turns: corpus.len(),
        labels: corpus.label_set.labels().to_vec(),
        span_counts,
        unique_values,
        language_counts,
        unique_tag_strings: tag_strings.len(),
        unique_typed_surfaces,
        iob_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn label_set_orders_o_first_then_pairs() {
        let ls = LabelSet::from_tags(["B-food", "O", "I-area", "B-area"]).unwrap();
        assert_eq!(
            ls.labels(),
            &["O", "B-area", "I-area", "B-food", "I-food"]
        );
        assert_eq!(ls.id_of("O"), Some(0));
        assert_eq!(ls.entity_types(), vec!["area", "food"]);
    }

    #[test]
    fn label_set_closes_pairing() {
        // Only B-food observed; I-food must still exist.
        let ls = LabelSet::from_tags(["B-food"]).unwrap();
        assert!(ls.id_of("I-food").is_some());
    }

    #[test]
    fn seven_entities_make_fifteen_labels() {
        let entities = [
            "or_city",
            "dst_city",
            "budget",
            "date",
            "area",
            "food",
            "price_range",
        ];
        let ls = LabelSet::from_entities(entities);
        assert_eq!(ls.len(), 15);
    }

    #[test]
    fn validate_iob_flags_orphan_inside() {
        assert!(validate_iob(&tags(&["O", "B-food", "I-food"])).unwrap().is_empty());
        let v = validate_iob(&tags(&["I-food"])).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].position, 0);
        let v = validate_iob(&tags(&["B-food", "I-area"])).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].position, 1);
    }

    #[test]
    fn validate_iob_rejects_garbage_labels() {
        assert!(validate_iob(&tags(&["X-food"])).is_err());
    }

    #[test]
    fn extract_spans_basics() {
        let spans = extract_spans(&tags(&["O", "B-dst_city", "I-dst_city", "O"])).unwrap();
        assert_eq!(
            spans,
            vec![Span {
                entity: "dst_city".into(),
                start: 1,
                end: 2
            }]
        );
        assert!(extract_spans(&tags(&["O", "O"])).unwrap().is_empty());
        let spans = extract_spans(&tags(&["B-food", "B-food"])).unwrap();
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[0].start, spans[0].end), (0, 0));
        assert_eq!((spans[1].start, spans[1].end), (1, 1));
    }

    #[test]
    fn extract_spans_repairs_orphan_inside_as_begin() {
        let spans = extract_spans(&tags(&["I-food", "I-food", "O"])).unwrap();
        assert_eq!(
            spans,
            vec![Span {
                entity: "food".into(),
                start: 0,
                end: 1
            }]
        );
        // Type switch inside a run starts a new span.
        let spans = extract_spans(&tags(&["B-food", "I-area"])).unwrap();
        assert_eq!(spans.len(), 2);
    }

    #[test]
    fn spans_to_tags_roundtrip() {
        let t = tags(&["O", "B-food", "I-food", "O", "B-area"]);
        let spans = extract_spans(&t).unwrap();
        assert_eq!(tags_from_spans(&spans, t.len()).unwrap(), t);
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let turns: Vec<DialogueTurn> = (0..20)
            .map(|i| DialogueTurn {
                dialogue_id: format!("d{i}"),
                turn_index: 0,
                system_tokens: vec![],
                user_tokens: vec![format!("tok{i}")],
                tags: tags(&["O"]),
                lang: "en".into(),
            })
            .collect();
        let corpus = Corpus::from_turns(turns).unwrap();
        let (train_a, test_a) = split_corpus(&corpus, 15, 9).unwrap();
        let (train_b, test_b) = split_corpus(&corpus, 15, 9).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        assert_eq!(train_a.len(), 15);
        assert_eq!(test_a.len(), 5);
        let mut all: Vec<&str> = train_a
            .turns
            .iter()
            .chain(&test_a.turns)
            .map(|t| t.dialogue_id.as_str())
            .collect();
        all.sort();
        let mut expected: Vec<String> = (0..20).map(|i| format!("d{i}")).collect();
        expected.sort();
        assert_eq!(all, expected.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        assert!(split_corpus(&corpus, 20, 9).is_err());
    }

    #[test]
    fn split_reproduces_the_benchmark_counts() {
        // The two published split sizes: 13599 -> 12000/1599 and
        // 37785 -> 34000/3785.
        for (total, train_count, test_count) in [(13599, 12000, 1599), (37785, 34000, 3785)] {
            let turns: Vec<DialogueTurn> = (0..total)
                .map(|i| DialogueTurn {
                    dialogue_id: format!("d{i}"),
                    turn_index: 0,
                    system_tokens: vec![],
                    user_tokens: vec!["x".to_string()],
                    tags: tags(&["O"]),
                    lang: "en".into(),
                })
                .collect();
            let corpus = Corpus::from_turns(turns).unwrap();
            let (train, test) = split_corpus(&corpus, train_count, 1).unwrap();
            assert_eq!(train.len(), train_count);
            assert_eq!(test.len(), test_count);
        }
    }

    #[test]
    fn load_rejects_misaligned_tags_naming_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"dialogue_id":"a","turn_index":0,"system_tokens":[],"user_tokens":["x"],"tags":["O"],"lang":"en"}"#,
                "\n",
                r#"{"dialogue_id":"b","turn_index":0,"system_tokens":[],"user_tokens":["x"],"tags":["O","O"],"lang":"en"}"#,
                "\n"
            ),
        )
        .unwrap();
        let err = load_corpus(&path).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn load_motivating_turn() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mini.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"dialogue_id":"d1","turn_index":1,"system_tokens":["what","city","are","you","flying","to","?"],"user_tokens":["paris"],"tags":["B-dst_city"],"lang":"en"}"#,
                "\n"
            ),
        )
        .unwrap();
        let corpus = load_corpus(&path).unwrap();
        assert_eq!(corpus.len(), 1);
        assert!(corpus.label_set.id_of("B-dst_city").is_some());
        assert!(corpus.label_set.id_of("I-dst_city").is_some());
        assert_eq!(corpus.label_set.id_of("O"), Some(0));
    }

    #[test]
    fn save_load_roundtrip_is_identity() {
        let corpus = generate_context_corpus(24, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ctx.jsonl");
        save_corpus(&corpus, &path).unwrap();
        let reloaded = load_corpus(&path).unwrap();
        assert_eq!(corpus, reloaded);
    }
}
