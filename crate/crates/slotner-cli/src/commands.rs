//! The seven subcommands. Each takes a plain args struct so integration
//! tests can drive it without spawning a process.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use slotner::corpus::{
    corpus_stats, extract_spans, generate_blended_corpus, generate_context_corpus,
    generate_overfit_corpus, generate_unambiguous_corpus, load_corpus, save_corpus, Corpus,
    DialogueTurn,
};
use slotner::embeddings::{
    load_pretrained, save_vectors, train_sgns, CharVocabulary, EmbeddingRegime, EmbeddingTable,
    SgnsConfig, Vocabulary,
};
use slotner::eval::evaluate;
use slotner::grid::{run_grid, ReferenceSet};
use slotner::tagger::{TaggerModel, VariantConfig};
use slotner::train::train;

use crate::config::{FileConfig, Overrides, ResolvedConfig};
use crate::manifest::ManifestBuilder;
use crate::{CliError, CliResult};

fn load_file_config(path: Option<&Path>) -> CliResult<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn corpus_vocab(corpus: &Corpus, min_count: usize) -> CliResult<Vocabulary> {
    Ok(Vocabulary::build(
        corpus
            .turns
            .iter()
            .flat_map(|t| t.user_tokens.iter().chain(t.system_tokens.iter()))
            .map(|s| s.as_str()),
        min_count,
    )?)
}

fn corpus_char_vocab(corpus: &Corpus) -> CliResult<CharVocabulary> {
    Ok(CharVocabulary::build(
        corpus
            .turns
            .iter()
            .flat_map(|t| t.user_tokens.iter().chain(t.system_tokens.iter()))
            .map(|s| s.as_str()),
    )?)
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

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text.as_bytes()).map_err(|e| crate::io_err(path, e))
}

// ---------------------------------------------------------------- train --

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub overrides: Overrides,
}

fn acquire_train_table(
    resolved: &ResolvedConfig,
    vocab: &Vocabulary,
    corpus: &Corpus,
    manifest: &mut ManifestBuilder,
) -> CliResult<EmbeddingTable> {
    match resolved.variant.embedding_regime {
        EmbeddingRegime::Sg300 => {
            eprintln!("training SGNS vectors on the corpus (dim {})", resolved.sgns_dim);
            let model = train_sgns(&corpus_sentences(corpus), vocab, &resolved.sgns_config())?;
            Ok(model.table)
        }
        EmbeddingRegime::Custom => Ok(EmbeddingTable::random(
            vocab,
            resolved.custom_dim,
            false,
            EmbeddingRegime::Custom,
            resolved.train.seed,
        )),
        pretrained => {
            let key = pretrained.to_string();
            let path = resolved.pretrained_paths.get(&key).ok_or_else(|| {
                CliError::Validation(format!(
                    "the {key} regime needs a vector file (set pretrained_path or --vectors)"
                ))
            })?;
            if !path.exists() {
                return Err(CliError::Validation(format!(
                    "pre-trained vectors for {key} not found at {}",
                    path.display()
                )));
            }
            manifest.input(path)?;
            Ok(load_pretrained(path, vocab, pretrained)?)
        }
    }
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let file = load_file_config(args.config.as_deref())?;
    let resolved = ResolvedConfig::resolve(&file, &args.overrides)?;
    let mut manifest = ManifestBuilder::new("train", resolved.train.seed, &resolved);
    manifest.input(&args.corpus)?;
    if let Some(cfg) = &args.config {
        manifest.input(cfg)?;
    }

    let corpus = load_corpus(&args.corpus)?;
    let vocab = corpus_vocab(&corpus, resolved.min_count)?;
    let char_vocab = if resolved.variant.use_char {
        Some(corpus_char_vocab(&corpus)?)
    } else {
        None
    };
    let table = acquire_train_table(&resolved, &vocab, &corpus, &mut manifest)?;
    let mut model = TaggerModel::new(
        resolved.variant,
        vocab,
        char_vocab,
        corpus.label_set.clone(),
        table,
        resolved.train.seed,
    )?;

    eprintln!(
        "training {} on {} turns (seed {})",
        resolved.variant.name(),
        corpus.len(),
        resolved.train.seed
    );
    let history = train(&mut model, &corpus, &resolved.train)?;
    for record in &history.epochs {
        eprintln!(
            "epoch {:>3}: train loss {:.6}, dev macro-F1 {:.4}",
            record.epoch, record.mean_train_loss, record.dev_macro_f1
        );
    }
    eprintln!(
        "best epoch {} (dev macro-F1 {:.4})",
        history.best_epoch, history.best_dev_macro_f1
    );

    model.save(&args.out)?;
    let history_path = args.out.with_extension("history.json");
    write_text(
        &history_path,
        &serde_json::to_string_pretty(&history).expect("history serialization"),
    )?;
    manifest.artifact(&args.out);
    manifest.artifact(&history_path);
    manifest.finish()
}

// ----------------------------------------------------------------- eval --

#[derive(Clone, Debug)]
pub struct EvalArgs {
    pub model: PathBuf,
    pub corpus: PathBuf,
    pub json: bool,
    pub out: Option<PathBuf>,
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("eval", 0, json!({ "json": args.json }));
    manifest.input(&args.model)?;
    manifest.input(&args.corpus)?;

    let model = TaggerModel::load(&args.model)?;
    let corpus = load_corpus(&args.corpus)?;
    let report = evaluate(&model, &corpus)?;
    let json_text = serde_json::to_string_pretty(&report).expect("report serialization");

    if args.json {
        println!("{json_text}");
    } else {
        println!("{:<14} {:>9} {:>9} {:>9} {:>6} {:>6}", "type", "precision", "recall", "f1", "gold", "pred");
        for (name, m) in &report.per_type {
            let flag = if m.absent { " (absent)" } else { "" };
            println!(
                "{:<14} {:>9.4} {:>9.4} {:>9.4} {:>6} {:>6}{flag}",
                name, m.precision, m.recall, m.f1, m.gold_count, m.pred_count
            );
        }
        println!("span macro-F1:            {:.4}", report.macro_f1);
        println!("span macro-F1 (present):  {:.4}", report.macro_f1_excluding_absent);
        println!("token accuracy:           {:.4}", report.token_accuracy);
        println!("token macro-F1:           {:.4}", report.token_macro_f1);
    }

    if let Some(out) = &args.out {
        write_text(out, &json_text)?;
        manifest.artifact(out);
    }
    manifest.finish()
}

// ------------------------------------------------------------------ tag --

#[derive(Clone, Debug)]
pub struct TagArgs {
    pub model: PathBuf,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub json: bool,
}

/// One input line: `system TAB user` token streams; without a TAB the whole
/// line is the user side and the context is empty.
fn parse_tag_line(line: &str) -> (Vec<String>, Vec<String>) {
    let (system, user) = match line.split_once('\t') {
        Some((s, u)) => (s, u),
        None => ("", line),
    };
    let tok = |s: &str| s.split_whitespace().map(|w| w.to_string()).collect();
    (tok(system), tok(user))
}

/// Tag an iterator of lines, writing one record per valid line. Returns
/// (records written, per-line errors reported).
pub fn tag_lines<W: Write>(
    model: &TaggerModel,
    lines: impl Iterator<Item = String>,
    json: bool,
    out: &mut W,
) -> CliResult<(usize, usize)> {
    let mut written = 0;
    let mut errors = 0;
    for (line_no, line) in lines.enumerate() {
        let (system_tokens, user_tokens) = parse_tag_line(&line);
        if user_tokens.is_empty() {
            eprintln!("line {}: empty user utterance, skipped", line_no + 1);
            errors += 1;
            continue;
        }
        let turn = DialogueTurn {
            dialogue_id: format!("input-{}", line_no + 1),
            turn_index: 1,
            system_tokens,
            user_tokens: user_tokens.clone(),
            tags: vec!["O".to_string(); user_tokens.len()],
            lang: String::new(),
        };
        let tags = model.predict_labels(&turn)?;
        let spans = extract_spans(&tags)?;
        if json {
            let spans_json: Vec<_> = spans
                .iter()
                .map(|s| {
                    json!({
                        "entity": s.entity,
                        "start": s.start,
                        "end": s.end,
                        "text": user_tokens[s.start..=s.end].join(" "),
                    })
                })
                .collect();
            let record = json!({
                "tokens": user_tokens,
                "tags": tags,
                "spans": spans_json,
            });
            writeln!(out, "{record}").map_err(|e| CliError::Io(e.to_string()))?;
        } else {
            let tagged: Vec<String> = user_tokens
                .iter()
                .zip(&tags)
                .map(|(tok, tag)| format!("{tok}/{tag}"))
                .collect();
            let spans_text: Vec<String> = spans
                .iter()
                .map(|s| {
                    format!(
                        "{}[{}..{}]={:?}",
                        s.entity,
                        s.start,
                        s.end,
                        user_tokens[s.start..=s.end].join(" ")
                    )
                })
                .collect();
            writeln!(out, "{}\t{}", tagged.join(" "), spans_text.join(" "))
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        written += 1;
    }
    Ok((written, errors))
}

pub fn cmd_tag(args: &TagArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("tag", 0, json!({ "json": args.json }));
    manifest.input(&args.model)?;
    let model = TaggerModel::load(&args.model)?;

    let lines: Box<dyn Iterator<Item = String>> = match &args.input {
        Some(path) => {
            manifest.input(path)?;
            let file = fs::File::open(path).map_err(|e| crate::io_err(path, e))?;
            Box::new(BufReader::new(file).lines().map_while(|l| l.ok()))
        }
        None => {
            let stdin = std::io::stdin();
            Box::new(stdin.lock().lines().map_while(|l| l.ok()))
        }
    };

    match &args.out {
        Some(path) => {
            let mut buffer = Vec::new();
            tag_lines(&model, lines, args.json, &mut buffer)?;
            fs::write(path, &buffer).map_err(|e| crate::io_err(path, e))?;
            manifest.artifact(path);
        }
        None => {
            let stdout = std::io::stdout();
            tag_lines(&model, lines, args.json, &mut stdout.lock())?;
        }
    }
    manifest.finish()
}

// ----------------------------------------------------------------- sgns --

#[derive(Clone, Debug)]
pub struct SgnsArgs {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl SgnsArgs {
    pub fn defaults(corpus: PathBuf, out: PathBuf) -> SgnsArgs {
        let d = SgnsConfig::default();
        SgnsArgs {
            corpus,
            out,
            dim: d.dim,
            window: d.window,
            negatives: d.negatives,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            min_count: 1,
            seed: d.seed,
        }
    }
}

pub fn cmd_sgns(args: &SgnsArgs) -> CliResult<()> {
    let config = SgnsConfig {
        dim: args.dim,
        window: args.window,
        negatives: args.negatives,
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        seed: args.seed,
    };
    let mut manifest = ManifestBuilder::new(
        "sgns",
        args.seed,
        json!({
            "dim": args.dim, "window": args.window, "negatives": args.negatives,
            "epochs": args.epochs, "learning_rate": args.learning_rate,
            "min_count": args.min_count,
        }),
    );
    manifest.input(&args.corpus)?;
    let corpus = load_corpus(&args.corpus)?;
    let vocab = corpus_vocab(&corpus, args.min_count)?;
    eprintln!(
        "training SGNS: {} sentences, vocabulary {} (dim {})",
        corpus.len() * 2,
        vocab.len(),
        args.dim
    );
    let model = train_sgns(&corpus_sentences(&corpus), &vocab, &config)?;
    save_vectors(&model.table, &vocab, &args.out)?;
    manifest.artifact(&args.out);
    manifest.finish()
}

// -------------------------------------------------------------- inspect --

#[derive(Clone, Debug)]
pub struct InspectArgs {
    pub corpus: PathBuf,
    pub json: bool,
}

pub fn cmd_inspect(args: &InspectArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("inspect", 0, json!({ "json": args.json }));
    manifest.input(&args.corpus)?;
    let corpus = load_corpus(&args.corpus)?;
    let stats = corpus_stats(&corpus)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialization"));
    } else {
        println!("turns: {}", stats.turns);
        println!("labels ({}): {}", stats.labels.len(), stats.labels.join(" "));
        println!("entity types: {}", stats.span_counts.len());
        println!("{:<16} {:>8} {:>14}", "type", "spans", "unique values");
        for (name, count) in &stats.span_counts {
            println!(
                "{:<16} {:>8} {:>14}",
                name,
                count,
                stats.unique_values.get(name).copied().unwrap_or(0)
            );
        }
        println!("unique tag strings (non-O): {}", stats.unique_tag_strings);
        println!("unique typed surface forms: {}", stats.unique_typed_surfaces);
        println!("ill-formed IOB positions: {}", stats.iob_violations);
        println!("languages:");
        for (lang, count) in &stats.language_counts {
            println!("  {lang}: {count}");
        }
    }
    manifest.finish()
}

// ------------------------------------------------------------- run-grid --

#[derive(Clone, Debug)]
pub struct GridArgs {
    pub train: PathBuf,
    pub test: PathBuf,
    pub config: Option<PathBuf>,
    /// Comma-separated variant names, or "all" for the eight grid rows.
    pub variants: String,
    /// Comma-separated regimes (sgns300, g50w, g300w, g300c, custom).
    pub regimes: String,
    /// Reference column set: en, enhi or none.
    pub reference: String,
    pub json: bool,
    pub out: Option<PathBuf>,
    pub overrides: Overrides,
}

pub fn cmd_run_grid(args: &GridArgs) -> CliResult<()> {
    let file = load_file_config(args.config.as_deref())?;
    let resolved = ResolvedConfig::resolve(&file, &args.overrides)?;
    let mut manifest = ManifestBuilder::new("run-grid", resolved.train.seed, &resolved);
    manifest.input(&args.train)?;
    manifest.input(&args.test)?;
    if let Some(cfg) = &args.config {
        manifest.input(cfg)?;
    }

    let variants: Vec<VariantConfig> = if args.variants.trim().eq_ignore_ascii_case("all") {
        resolved.variant.grid_rows().to_vec()
    } else {
        args.variants
            .split(',')
            .map(|name| resolved.variant.from_name(name.trim()))
            .collect::<Result<_, _>>()?
    };
    let regimes: Vec<EmbeddingRegime> = args
        .regimes
        .split(',')
        .map(|r| EmbeddingRegime::parse(r.trim()))
        .collect::<Result<_, _>>()?;
    let reference = match args.reference.to_lowercase().as_str() {
        "en" => ReferenceSet::En,
        "enhi" => ReferenceSet::Enhi,
        "none" => ReferenceSet::None,
        other => {
            return Err(CliError::Validation(format!(
                "unknown reference set {other:?} (expected en, enhi or none)"
            )))
        }
    };

    let train_corpus = load_corpus(&args.train)?;
    let test_corpus = load_corpus(&args.test)?;
    eprintln!(
        "grid: {} variants x {} regimes on {}/{} turns",
        variants.len(),
        regimes.len(),
        train_corpus.len(),
        test_corpus.len()
    );
    let report = run_grid(
        &train_corpus,
        &test_corpus,
        &variants,
        &regimes,
        &resolved.embedding_resources()?,
        &resolved.train,
        reference,
    )?;

    let json_text = serde_json::to_string_pretty(&report).expect("grid serialization");
    if args.json {
        println!("{json_text}");
    } else {
        print!("{}", report.render_table());
    }
    if let Some(out) = &args.out {
        write_text(out, &json_text)?;
        manifest.artifact(out);
    }
    manifest.finish()
}

// -------------------------------------------------------- gen-synthetic --

#[derive(Clone, Debug)]
pub struct GenArgs {
    pub kind: String,
    pub turns: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_gen_synthetic(args: &GenArgs) -> CliResult<()> {
    let corpus = match args.kind.as_str() {
        "context" => generate_context_corpus(args.turns, args.seed)?,
        "unambiguous" => generate_unambiguous_corpus(args.turns, args.seed)?,
        "blended" => generate_blended_corpus(args.turns, args.seed)?,
        "overfit" => generate_overfit_corpus(args.turns, args.seed)?,
        other => {
            return Err(CliError::Validation(format!(
                "unknown corpus kind {other:?} (expected context, unambiguous, blended or overfit)"
            )))
        }
    };
    let mut manifest = ManifestBuilder::new(
        "gen-synthetic",
        args.seed,
        json!({ "kind": args.kind, "turns": args.turns }),
    );
    save_corpus(&corpus, &args.out)?;
    manifest.artifact(&args.out);
    eprintln!("wrote {} turns to {}", corpus.len(), args.out.display());
    manifest.finish()
}
