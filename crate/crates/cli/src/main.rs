use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod exit;
mod settings;

use exit::{Class, Failure};
use settings::Settings;

/// Train and audit adversarially debiased recidivism predictors.
#[derive(Debug, Parser)]
#[command(name = "advfair", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    run: RunFlags,

    /// key = value settings file; keys are the long flag names. Flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, filter and encode the records; write an ingest report and the encoded rows.
    Ingest,
    /// Train a predictor (and adversary) and write checkpoints plus history.
    Train,
    /// Score a trained model on the test split.
    Evaluate {
        /// Directory holding a trained model (default: --out).
        #[arg(long, value_name = "DIR")]
        model: Option<PathBuf>,
        /// json, text or csv; all three when omitted.
        #[arg(long)]
        format: Option<String>,
    },
    /// Side-by-side table of COMPAS deciles, a baseline and an adversarial model.
    Compare {
        /// Trained baseline directory; trained from scratch when omitted.
        #[arg(long, value_name = "DIR")]
        baseline: Option<PathBuf>,
        /// Trained adversarial directory; trained from scratch when omitted.
        #[arg(long, value_name = "DIR")]
        adversarial: Option<PathBuf>,
    },
    /// Grid over predictor depth, width and alpha.
    Sweep {
        /// Comma-separated hidden-layer counts.
        #[arg(long)]
        layers: Option<String>,
        /// Comma-separated units per hidden layer.
        #[arg(long)]
        units: Option<String>,
        /// Comma-separated alpha values.
        #[arg(long)]
        alphas: Option<String>,
    },
    /// Permutation importance plus per-record explanations.
    Explain {
        /// Directory holding a trained model (default: --out).
        #[arg(long, value_name = "DIR")]
        model: Option<PathBuf>,
        /// Shuffles per feature.
        #[arg(long)]
        repeats: Option<usize>,
        /// A record to explain, as key=value pairs separated by commas.
        #[arg(long)]
        record: Option<String>,
        /// Built-in case-study record: joe, bob or all.
        #[arg(long)]
        case: Option<String>,
    },
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
struct RunFlags {
    /// Records CSV.
    #[arg(long, global = true, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Column holding the binary recidivism label.
    #[arg(long, global = true, value_name = "NAME")]
    recid_column: Option<String>,
    /// Two races, comma-separated; the first is group 0.
    #[arg(long, global = true)]
    races: Option<String>,
    /// Charge degrees to keep, comma-separated.
    #[arg(long, global = true)]
    charge_degrees: Option<String>,
    /// Drop rows screened more than this many days from arrest.
    #[arg(long, global = true, value_name = "DAYS")]
    screening_window: Option<i64>,
    /// Parse failures tolerated before aborting.
    #[arg(long, global = true)]
    max_parse_errors: Option<usize>,
    /// Fraction of rows in the training split.
    #[arg(long, global = true)]
    split_fraction: Option<f64>,
    #[arg(long, global = true)]
    split_seed: Option<u64>,
    /// Fraction of the training split used for fitting; the rest validates.
    #[arg(long, global = true)]
    fit_fraction: Option<f64>,
    /// baseline, parity or eq_odds.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Adversary learning rate (default: --lr).
    #[arg(long, global = true)]
    adversary_lr: Option<f64>,
    #[arg(long, global = true)]
    batch: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Predictor hidden sizes, comma-separated.
    #[arg(long, global = true)]
    predictor_hidden: Option<String>,
    /// Adversary hidden sizes, comma-separated.
    #[arg(long, global = true)]
    adversary_hidden: Option<String>,
    /// Score at or above which a prediction is high risk.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Validation gap a checkpoint must meet to be chosen on AUC.
    #[arg(long, global = true)]
    gap_limit: Option<f64>,
    /// COMPAS deciles at or above this count as high risk.
    #[arg(long, global = true)]
    compas_high_risk_decile: Option<u8>,
    /// Calibration bins.
    #[arg(long, global = true)]
    bins: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn p(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| p.display().to_string())
}

impl Cli {
    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        let r = &self.run;
        let mut flags = vec![
            ("data", p(&r.data)),
            ("recid-column", r.recid_column.clone()),
            ("races", r.races.clone()),
            ("charge-degrees", r.charge_degrees.clone()),
            ("screening-window", s(&r.screening_window)),
            ("max-parse-errors", s(&r.max_parse_errors)),
            ("split-fraction", s(&r.split_fraction)),
            ("split-seed", s(&r.split_seed)),
            ("fit-fraction", s(&r.fit_fraction)),
            ("mode", r.mode.clone()),
            ("alpha", s(&r.alpha)),
            ("lr", s(&r.lr)),
            ("adversary-lr", s(&r.adversary_lr)),
            ("batch", s(&r.batch)),
            ("epochs", s(&r.epochs)),
            ("seed", s(&r.seed)),
            ("predictor-hidden", r.predictor_hidden.clone()),
            ("adversary-hidden", r.adversary_hidden.clone()),
            ("threshold", s(&r.threshold)),
            ("gap-limit", s(&r.gap_limit)),
            ("compas-high-risk-decile", s(&r.compas_high_risk_decile)),
            ("bins", s(&r.bins)),
            ("out", p(&r.out)),
        ];
        match &self.command {
            Command::Ingest | Command::Train => {}
            Command::Evaluate { model, format } => {
                flags.push(("model", p(model)));
                flags.push(("format", format.clone()));
            }
            Command::Compare { baseline, adversarial } => {
                flags.push(("baseline", p(baseline)));
                flags.push(("adversarial", p(adversarial)));
            }
            Command::Sweep { layers, units, alphas } => {
                flags.push(("layers", layers.clone()));
                flags.push(("units", units.clone()));
                flags.push(("alphas", alphas.clone()));
            }
            Command::Explain { model, repeats, record, case } => {
                flags.push(("model", p(model)));
                flags.push(("repeats", s(repeats)));
                flags.push(("record", record.clone()));
                flags.push(("case", case.clone()));
            }
        }
        flags
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let settings = Settings::load(cli.config.as_deref(), cli.flags())?;
    match cli.command {
        Command::Ingest => commands::ingest(&settings),
        Command::Train => commands::train(&settings),
        Command::Evaluate { .. } => commands::evaluate(&settings),
        Command::Compare { .. } => commands::compare(&settings),
        Command::Sweep { .. } => commands::sweep(&settings),
        Command::Explain { .. } => commands::explain(&settings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Class::Usage as u8 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("advfair: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}
