//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers. Run with
//! `cargo test -p slotner-cli --test acceptance -- --nocapture`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slotner::corpus::{
    generate_blended_corpus, generate_context_corpus, generate_overfit_corpus, save_corpus,
    split_corpus, Corpus, LabelSet,
};
use slotner::crf::{log_partition, score_sequence, viterbi_decode, CrfParams};
use slotner::embeddings::{
    load_pretrained, CharVocabulary, EmbeddingRegime, EmbeddingTable, Vocabulary,
};
use slotner::eval::{evaluate, report_from_predictions, AbsentTypePolicy};
use slotner::grid::{run_grid, EmbeddingResources, ReferenceSet};
use slotner::numeric::{check_gradients, Tensor};
use slotner::tagger::{TaggerModel, VariantConfig};
use slotner::train::{train, TrainConfig};
use slotner_cli::commands::{cmd_train, TrainArgs};
use slotner_cli::config::Overrides;

// ------------------------------------------------------------ helpers ----

fn corpus_vocab(corpus: &Corpus) -> Vocabulary {
    Vocabulary::build(
        corpus
            .turns
            .iter()
            .flat_map(|t| t.user_tokens.iter().chain(t.system_tokens.iter()))
            .map(|s| s.as_str()),
        1,
    )
    .unwrap()
}

fn corpus_char_vocab(corpus: &Corpus) -> CharVocabulary {
    CharVocabulary::build(
        corpus
            .turns
            .iter()
            .flat_map(|t| t.user_tokens.iter().chain(t.system_tokens.iter()))
            .map(|s| s.as_str()),
    )
    .unwrap()
}

fn build_model(
    variant: VariantConfig,
    corpus: &Corpus,
    word_dim: usize,
    seed: u64,
) -> TaggerModel {
    let vocab = corpus_vocab(corpus);
    let char_vocab = variant.use_char.then(|| corpus_char_vocab(corpus));
    let table = EmbeddingTable::random(&vocab, word_dim, false, EmbeddingRegime::Custom, seed);
    TaggerModel::new(
        variant,
        vocab,
        char_vocab,
        corpus.label_set.clone(),
        table,
        seed,
    )
    .unwrap()
}

fn enumerate_scores(
    emissions: &[f64],
    t_len: usize,
    k: usize,
    trans: &[f64],
    start: &[f64],
    end: &[f64],
) -> Vec<f64> {
    let total = k.pow(t_len as u32);
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut tags = vec![0usize; t_len];
        for slot in (0..t_len).rev() {
            tags[slot] = code % k;
            code /= k;
        }
        let mut score = start[tags[0]] + end[tags[t_len - 1]];
        for (t, &tag) in tags.iter().enumerate() {
            score += emissions[t * k + tag];
        }
        for w in tags.windows(2) {
            score += trans[w[0] * k + w[1]];
        }
        out.push(score);
    }
    out
}

// --------------------------------------------------------- criterion 1 ---

#[test]
fn criterion_1_crf_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    for case in 0..200 {
        let k = rng.gen_range(1..=5);
        let t_len = rng.gen_range(1..=6);
        let emissions = Tensor::uniform_param(&[t_len, k], -3.0, 3.0, &mut rng);
        let params = CrfParams {
            transitions: Tensor::uniform_param(&[k, k], -2.0, 2.0, &mut rng),
            start: Tensor::uniform_param(&[k], -1.0, 1.0, &mut rng),
            end: Tensor::uniform_param(&[k], -1.0, 1.0, &mut rng),
        };
        let scores = enumerate_scores(
            &emissions.to_vec(),
            t_len,
            k,
            &params.transitions.to_vec(),
            &params.start.to_vec(),
            &params.end.to_vec(),
        );
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();

        let log_z = log_partition(&emissions, &params).unwrap().item();
        assert!(
            (log_z - lse).abs() < 1e-10,
            "case {case} (K={k}, T={t_len}): partition {log_z} vs oracle {lse}"
        );
        let (tags, best) = viterbi_decode(&emissions, &params).unwrap();
        assert!(
            (best - max).abs() < 1e-10,
            "case {case}: viterbi score {best} vs oracle max {max}"
        );
        let attained = score_sequence(&emissions, &tags.0, &params).unwrap().item();
        assert!(
            (attained - max).abs() < 1e-10,
            "case {case}: returned sequence scores {attained}, max is {max}"
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "oracle sweep took {elapsed:.1} s");
    println!("ACCEPTANCE 1 crf-oracle-equivalence: PASS (200 instances, {elapsed:.2} s)");
}

// --------------------------------------------------------- criterion 2 ---

#[test]
fn criterion_2_gradient_suite_all_variants() {
    let started = Instant::now();
    let corpus = generate_context_corpus(12, 0xC2).unwrap();
    // The full 7-entity label space (K = 15), sizes scaled down from the
    // production defaults for speed: hidden 64 -> 8.
    let labels = LabelSet::from_entities([
        "area",
        "budget",
        "date",
        "dst_city",
        "food",
        "or_city",
        "price_range",
    ]);
    let mut total_params = 0usize;
    for (i, variant) in VariantConfig::default().grid_rows().iter().enumerate() {
        let variant = VariantConfig {
            hidden_dim: 8,
            layers: 2,
            char_dim: 4,
            char_filters: 6,
            embedding_regime: EmbeddingRegime::Custom,
            ..*variant
        };
        let vocab = corpus_vocab(&corpus);
        let char_vocab = variant.use_char.then(|| corpus_char_vocab(&corpus));
        let table = EmbeddingTable::random(&vocab, 12, false, EmbeddingRegime::Custom, 100 + i as u64);
        let model = TaggerModel::new(
            variant,
            vocab,
            char_vocab,
            labels.clone(),
            table,
            100 + i as u64,
        )
        .unwrap();
        assert_eq!(model.labels.len(), 15);

        let turn = slotner::corpus::DialogueTurn {
            dialogue_id: "grad".into(),
            turn_index: 1,
            system_tokens: "what city are you flying to ?"
                .split_whitespace()
                .map(|s| s.to_string())
                .collect(),
            user_tokens: vec!["new".to_string(), "york".to_string()],
            tags: vec!["B-dst_city".to_string(), "I-dst_city".to_string()],
            lang: "en".into(),
        };
        let trainable = model.trainable_tensors();
        total_params += trainable.iter().map(|(_, t)| t.numel()).sum::<usize>();
        let failures = check_gradients(
            &trainable,
            || model.loss(&turn).unwrap(),
            1e-4,
            1e-4,
            1e-6,
        );
        assert!(
            failures.is_empty(),
            "variant {} has {} disagreeing elements, first: {:?}",
            variant.name(),
            failures.len(),
            failures.first()
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "gradient suite took {elapsed:.1} s");
    println!(
        "ACCEPTANCE 2 gradient-suite: PASS (8 variants, {total_params} parameters, {elapsed:.1} s)"
    );
}

// --------------------------------------------------------- criterion 3 ---

#[test]
fn criterion_3_uniform_loss_identities() {
    let corpus = generate_context_corpus(12, 0xC3).unwrap();
    let labels = LabelSet::from_entities([
        "area",
        "budget",
        "date",
        "dst_city",
        "food",
        "or_city",
        "price_range",
    ]);
    let expected = 2.0 * 15.0f64.ln();
    for use_crf in [false, true] {
        let variant = VariantConfig {
            use_crf,
            hidden_dim: 8,
            layers: 1,
            embedding_regime: EmbeddingRegime::Custom,
            ..VariantConfig::default()
        };
        let vocab = corpus_vocab(&corpus);
        let table = EmbeddingTable::random(&vocab, 8, false, EmbeddingRegime::Custom, 3);
        let model = TaggerModel::new(variant, vocab, None, labels.clone(), table, 3).unwrap();
        for (_, tensor) in model.named_tensors() {
            tensor.set_data(&vec![0.0; tensor.numel()]);
        }
        let turn = slotner::corpus::DialogueTurn {
            dialogue_id: "uniform".into(),
            turn_index: 1,
            system_tokens: vec![],
            user_tokens: vec!["paris".to_string(), "london".to_string()],
            tags: vec!["B-dst_city".to_string(), "O".to_string()],
            lang: "en".into(),
        };
        let loss = model.loss(&turn).unwrap().item();
        assert!(
            (loss - expected).abs() < 1e-10,
            "use_crf={use_crf}: loss {loss} vs T*ln(K) = {expected}"
        );
    }
    println!("ACCEPTANCE 3 uniform-loss-identities: PASS (softmax and CRF both T*ln(15))");
}

// --------------------------------------------------------- criterion 4 ---

#[test]
fn criterion_4_overfit_single_pattern() {
    let started = Instant::now();
    let corpus = generate_overfit_corpus(50, 0xC4).unwrap();
    let variant = VariantConfig {
        use_char: true,
        use_crf: true,
        use_context: true,
        hidden_dim: 32,
        layers: 2,
        char_dim: 8,
        char_filters: 16,
        embedding_regime: EmbeddingRegime::Custom,
        ..VariantConfig::default()
    };
    assert_eq!(variant.name(), "BI-LSTM-CHAR-CRF-CE");
    let mut model = build_model(variant, &corpus, 24, 7);
    let config = TrainConfig {
        max_epochs: 200,
        patience: 200,
        dev_fraction: 0.1,
        learning_rate: 1e-3,
        seed: 7,
        shuffle_each_epoch: true,
    };
    let history = train(&mut model, &corpus, &config).unwrap();
    let report = evaluate(&model, &corpus).unwrap();
    let min_loss = history
        .epochs
        .iter()
        .map(|r| r.mean_train_loss)
        .fold(f64::INFINITY, f64::min);
    let elapsed = started.elapsed().as_secs_f64();
    assert_eq!(
        report.macro_f1, 1.0,
        "training-set macro-F1 {} after {} epochs",
        report.macro_f1,
        history.epochs.len()
    );
    assert!(
        min_loss < 0.01,
        "mean train loss never dropped below 0.01 (best {min_loss})"
    );
    assert!(elapsed < 300.0, "overfit run took {elapsed:.1} s");
    println!(
        "ACCEPTANCE 4 overfit-check: PASS (macro-F1 1.0, best loss {min_loss:.5}, {elapsed:.1} s)"
    );
}

// --------------------------------------------------------- criterion 5 ---

#[test]
fn criterion_5_context_encoder_efficacy() {
    let started = Instant::now();
    let full = generate_context_corpus(2500, 0xC5).unwrap();
    let (train_half, test_half) = split_corpus(&full, 2000, 0xC5).unwrap();
    assert_eq!(train_half.len(), 2000);
    assert_eq!(test_half.len(), 500);

    let config = TrainConfig {
        max_epochs: 8,
        patience: 3,
        dev_fraction: 0.1,
        learning_rate: 1e-3,
        seed: 11,
        shuffle_each_epoch: true,
    };
    let base = VariantConfig {
        use_crf: true,
        hidden_dim: 64,
        layers: 2,
        embedding_regime: EmbeddingRegime::Custom,
        ..VariantConfig::default()
    };

    let with_ce = VariantConfig {
        use_context: true,
        ..base
    };
    assert_eq!(with_ce.name(), "BI-LSTM-CRF-CE");
    let mut model_ce = build_model(with_ce, &train_half, 24, 11);
    train(&mut model_ce, &train_half, &config).unwrap();
    let f1_ce = evaluate(&model_ce, &test_half).unwrap().macro_f1;

    assert_eq!(base.name(), "BI-LSTM-CRF");
    let mut model_plain = build_model(base, &train_half, 24, 11);
    train(&mut model_plain, &train_half, &config).unwrap();
    let f1_plain = evaluate(&model_plain, &test_half).unwrap().macro_f1;

    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        f1_ce >= 0.95,
        "context-encoder variant reached only {f1_ce:.4} test macro-F1"
    );
    assert!(
        f1_plain <= 0.60,
        "contextless variant reached {f1_plain:.4}, but the tag is independent of the token"
    );
    assert!(elapsed < 600.0, "context-efficacy run took {elapsed:.1} s");
    println!(
        "ACCEPTANCE 5 context-encoder-efficacy: PASS (CE {f1_ce:.4} vs no-CE {f1_plain:.4}, {elapsed:.1} s)"
    );
}

// --------------------------------------------------------- criterion 6 ---

#[test]
fn criterion_6_variant_ordering_on_blended_data() {
    let started = Instant::now();
    let full = generate_blended_corpus(800, 0xC6).unwrap();
    let (train_half, test_half) = split_corpus(&full, 600, 0xC6).unwrap();

    let base = VariantConfig {
        hidden_dim: 24,
        layers: 2,
        char_dim: 4,
        char_filters: 8,
        embedding_regime: EmbeddingRegime::Custom,
        ..VariantConfig::default()
    };
    // (CHAR, CRF) combinations; each pairs a CE row against its non-CE twin.
    let pairs = [(false, false), (true, false), (false, true), (true, true)];
    let seeds = [21u64, 22, 23];

    let mut summary = Vec::new();
    for (use_char, use_crf) in pairs {
        let mut ce_wins = 0;
        for &seed in &seeds {
            let config = TrainConfig {
                max_epochs: 6,
                patience: 2,
                dev_fraction: 0.1,
                learning_rate: 2e-3,
                seed,
                shuffle_each_epoch: true,
            };
            let mut f1 = [0.0f64; 2];
            for (slot, use_context) in [(0, false), (1, true)] {
                let variant = VariantConfig {
                    use_char,
                    use_crf,
                    use_context,
                    ..base
                };
                let mut model = build_model(variant, &train_half, 16, seed);
                train(&mut model, &train_half, &config).unwrap();
                f1[slot] = evaluate(&model, &test_half).unwrap().macro_f1;
            }
            if f1[1] > f1[0] {
                ce_wins += 1;
            }
        }
        let pair_name = VariantConfig {
            use_char,
            use_crf,
            ..base
        }
        .name();
        summary.push(format!("{pair_name}: {ce_wins}/3"));
        assert!(
            ce_wins >= 2,
            "CE beat non-CE only {ce_wins}/3 times for the {pair_name} pair"
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "ACCEPTANCE 6 variant-ordering: PASS ({}; {elapsed:.1} s)",
        summary.join(", ")
    );
}

// --------------------------------------------------------- criterion 7 ---

#[test]
fn criterion_7_bitwise_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("train.jsonl");
    save_corpus(&generate_overfit_corpus(30, 0xC7).unwrap(), &corpus_path).unwrap();

    // A tiny vector file so the run exercises the frozen pre-trained path.
    let vocab_probe = corpus_vocab(&slotner::corpus::load_corpus(&corpus_path).unwrap());
    let mut vectors_text = String::new();
    for id in 2..vocab_probe.len().min(6) {
        vectors_text.push_str(&format!("{} 0.25 -0.5 0.125 1.0\n", vocab_probe.token(id)));
    }
    let vectors_path = dir.path().join("vectors.txt");
    fs::write(&vectors_path, vectors_text).unwrap();

    let config_path = dir.path().join("config.toml");
    fs::write(
        &config_path,
        format!(
            r#"
embedding_regime = "g50w"
pretrained_path = "{}"
use_char = true
use_crf = true
use_context = true
hidden_dim = 8
layers = 2
char_dim = 4
char_filters = 6
max_epochs = 3
dev_fraction = 0.2
seed = 99
"#,
            vectors_path.display()
        ),
    )
    .unwrap();

    let run = |out: &Path| {
        cmd_train(&TrainArgs {
            corpus: corpus_path.clone(),
            out: out.to_path_buf(),
            config: Some(config_path.clone()),
            overrides: Overrides::default(),
        })
        .unwrap();
    };
    let out_a = dir.path().join("a.ckpt");
    let out_b = dir.path().join("b.ckpt");
    run(&out_a);
    run(&out_b);
    let bytes_a = fs::read(&out_a).unwrap();
    let bytes_b = fs::read(&out_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "checkpoints differ between identical runs");

    // The frozen table inside the trained model equals a fresh load.
    let model = TaggerModel::load(&out_a).unwrap();
    assert!(model.word_table.frozen);
    let fresh = load_pretrained(&vectors_path, &model.vocab, EmbeddingRegime::G50w).unwrap();
    let trained_bits: Vec<u64> = model.word_table.vectors.to_vec().iter().map(|v| v.to_bits()).collect();
    let fresh_bits: Vec<u64> = fresh.vectors.to_vec().iter().map(|v| v.to_bits()).collect();
    assert_eq!(trained_bits, fresh_bits, "frozen table changed during training");

    println!(
        "ACCEPTANCE 7 determinism: PASS ({} byte checkpoints bitwise equal, frozen table untouched)",
        bytes_a.len()
    );
}

// --------------------------------------------------------- criterion 8 ---

#[test]
fn criterion_8_metric_worked_examples() {
    let tags = |v: &[&str]| -> Vec<String> { v.iter().map(|s| s.to_string()).collect() };

    // P=1, R=0.5 -> F1 = 2/3 for one type; 1.0 for the other; macro 5/6.
    let gold = vec![tags(&["B-area", "O", "B-area"]), tags(&["B-food", "O"])];
    let pred = vec![tags(&["B-area", "O", "O"]), tags(&["B-food", "O"])];
    let report =
        report_from_predictions(&gold, &pred, &["area", "food"], AbsentTypePolicy::CountAsZero)
            .unwrap();
    assert_eq!(report.per_type["area"].precision, 1.0);
    assert_eq!(report.per_type["area"].recall, 0.5);
    assert!((report.per_type["area"].f1 - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(report.per_type["food"].f1, 1.0);
    assert!((report.macro_f1 - 5.0 / 6.0).abs() < 1e-15);

    // Boundary mismatch: zero credit even though the type overlaps.
    let gold = vec![tags(&["O", "B-food", "I-food", "O"])];
    let pred = vec![tags(&["O", "B-food", "O", "O"])];
    let report =
        report_from_predictions(&gold, &pred, &["food"], AbsentTypePolicy::CountAsZero).unwrap();
    assert_eq!(report.per_type["food"].f1, 0.0);

    println!("ACCEPTANCE 8 metric-worked-examples: PASS (macro 5/6 and boundary zero-credit exact)");
}

// --------------------------------------------------------- criterion 9 ---

#[test]
fn criterion_9_reference_alignment_grid_layout() {
    let started = Instant::now();
    let full = generate_blended_corpus(120, 0xC9).unwrap();
    let (train_half, test_half) = split_corpus(&full, 90, 0xC9).unwrap();

    // One tiny vector file stands in for all three pre-trained regimes.
    let dir = tempfile::tempdir().unwrap();
    let vectors_path = dir.path().join("vectors.txt");
    let vocab = corpus_vocab(&train_half);
    let mut text = String::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x91);
    for id in 2..vocab.len() {
        let vals: Vec<String> = (0..6).map(|_| format!("{:.4}", rng.gen_range(-0.1..0.1))).collect();
        text.push_str(&format!("{} {}\n", vocab.token(id), vals.join(" ")));
    }
    fs::write(&vectors_path, text).unwrap();

    let base = VariantConfig {
        hidden_dim: 8,
        layers: 1,
        char_dim: 3,
        char_filters: 4,
        ..VariantConfig::default()
    };
    let resources = EmbeddingResources {
        pretrained_paths: [
            (EmbeddingRegime::G50w, vectors_path.clone()),
            (EmbeddingRegime::G300w, vectors_path.clone()),
            (EmbeddingRegime::G300c, vectors_path.clone()),
        ]
        .into_iter()
        .collect(),
        sgns: slotner::embeddings::SgnsConfig {
            dim: 6,
            window: 2,
            negatives: 2,
            epochs: 1,
            learning_rate: 0.025,
            seed: 5,
        },
        custom_dim: 6,
    };
    let config = TrainConfig {
        max_epochs: 1,
        patience: 1,
        dev_fraction: 0.1,
        learning_rate: 1e-3,
        seed: 5,
        shuffle_each_epoch: true,
    };
    let regimes = [
        EmbeddingRegime::Sg300,
        EmbeddingRegime::G50w,
        EmbeddingRegime::G300w,
        EmbeddingRegime::G300c,
    ];
    let report = run_grid(
        &train_half,
        &test_half,
        &base.grid_rows(),
        &regimes,
        &resources,
        &config,
        ReferenceSet::En,
    )
    .unwrap();

    // Table layout: 8 variant rows by 4 regime columns.
    assert_eq!(report.rows.len(), 8);
    assert!(report.rows.iter().all(|r| r.cells.len() == 4));
    assert_eq!(report.regimes, vec!["SGNS300", "G50W", "G300W", "G300C"]);
    assert_eq!(report.rows[0].variant, "BI-LSTM");
    assert_eq!(report.rows[7].variant, "BI-LSTM-CHAR-CRF-CE");
    // Reference cells are carried alongside, no tolerance asserted.
    assert_eq!(report.rows[0].cells[0].reference, Some(86.928));
    assert_eq!(report.rows[7].cells[3].reference, Some(92.864));
    for row in &report.rows {
        for cell in &row.cells {
            assert!(
                cell.macro_f1.is_some(),
                "cell {}/{} failed: {:?}",
                row.variant,
                cell.regime,
                cell.error
            );
        }
    }
    let rendered = report.render_table();
    assert!(rendered.contains("ref 92.864"), "{rendered}");
    let elapsed = started.elapsed().as_secs_f64();
    println!("ACCEPTANCE 9 reference-alignment: PASS (8x4 grid rendered with references, {elapsed:.1} s)");
}
