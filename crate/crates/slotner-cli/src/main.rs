use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use slotner_cli::commands::{
    cmd_eval, cmd_gen_synthetic, cmd_inspect, cmd_run_grid, cmd_sgns, cmd_tag, cmd_train, EvalArgs,
    GenArgs, GridArgs, InspectArgs, SgnsArgs, TagArgs, TrainArgs,
};
use slotner_cli::config::Overrides;

/// Slot-filling NER for task-oriented dialogue: train, evaluate and run
/// BI-LSTM tagger variants with optional char-CNN, CRF and context encoder.
#[derive(Parser)]
#[command(name = "slotner", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tagger variant on a JSON-Lines corpus.
    Train {
        /// Training corpus (JSON Lines).
        #[arg(long)]
        corpus: PathBuf,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Flat key-value config file (TOML); flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed for every random draw (init, shuffles, SGNS negatives).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Embedding regime: sgns300, g50w, g300w, g300c or custom.
        #[arg(long)]
        regime: Option<String>,
        /// Vector file for the pre-trained regimes.
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a corpus (span- and token-level macro-F1).
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Emit a single JSON object on standard output.
        #[arg(long)]
        json: bool,
        /// Also write the JSON report to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tag `system TAB user` token lines from a file or standard input.
    Tag {
        #[arg(long)]
        model: PathBuf,
        /// Input file; standard input when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// One JSON object per line instead of token/TAG text.
        #[arg(long)]
        json: bool,
    },
    /// Train skip-gram negative-sampling vectors on a corpus.
    Sgns {
        #[arg(long)]
        corpus: PathBuf,
        /// Output vector file (plain text, loadable for training).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0.025)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print corpus statistics: labels, span counts, unique values, languages.
    Inspect {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Train and evaluate a variant-by-regime grid.
    RunGrid {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated variant names, or "all" for the eight rows.
        #[arg(long, default_value = "all")]
        variants: String,
        /// Comma-separated embedding regimes.
        #[arg(long, default_value = "custom")]
        regimes: String,
        /// Reference scores to print alongside: en, enhi or none.
        #[arg(long, default_value = "en")]
        reference: String,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic corpus (context, unambiguous, blended, overfit).
    GenSynthetic {
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 100)]
        turns: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> slotner_cli::CliResult<()> {
    match cli.command {
        Command::Train {
            corpus,
            out,
            config,
            seed,
            max_epochs,
            learning_rate,
            regime,
            vectors,
        } => cmd_train(&TrainArgs {
            corpus,
            out,
            config,
            overrides: Overrides {
                seed,
                max_epochs,
                learning_rate,
                regime,
                vectors,
            },
        }),
        Command::Eval {
            model,
            corpus,
            json,
            out,
        } => cmd_eval(&EvalArgs {
            model,
            corpus,
            json,
            out,
        }),
        Command::Tag {
            model,
            input,
            out,
            json,
        } => cmd_tag(&TagArgs {
            model,
            input,
            out,
            json,
        }),
        Command::Sgns {
            corpus,
            out,
            dim,
            window,
            negatives,
            epochs,
            learning_rate,
            min_count,
            seed,
        } => cmd_sgns(&SgnsArgs {
            corpus,
            out,
            dim,
            window,
            negatives,
            epochs,
            learning_rate,
            min_count,
            seed,
        }),
        Command::Inspect { corpus, json } => cmd_inspect(&InspectArgs { corpus, json }),
        Command::RunGrid {
            train,
            test,
            config,
            variants,
            regimes,
            reference,
            json,
            out,
            seed,
        } => cmd_run_grid(&GridArgs {
            train,
            test,
            config,
            variants,
            regimes,
            reference,
            json,
            out,
            overrides: Overrides {
                seed,
                ..Overrides::default()
            },
        }),
        Command::GenSynthetic {
            kind,
            turns,
            seed,
            out,
        } => cmd_gen_synthetic(&GenArgs {
            kind,
            turns,
            seed,
            out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
