use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use pqcexpr::expressibility::{EstimatorConfig, FidelityMode, DEFAULT_SHOTS};
use pqcexpr::gnn::{ModelConfig, Neighborhood, PlateauConfig, TrainConfig};
use pqcexpr::pipeline::{self, Subset};
use pqcexpr::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "pqcexpr", version, about = "Expressibility labeling and GNN surrogate training for parameterized quantum circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Shots,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubsetArg {
    All,
    Train,
    Validation,
}

#[derive(Clone, Copy, ValueEnum)]
enum NeighborhoodArg {
    Symmetrized,
    Incoming,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random layered circuits and an unlabeled manifest.
    Generate {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        max_qubits: usize,
        #[arg(long, default_value_t = 40)]
        max_depth: usize,
        #[arg(long, env = "PQCEXPR_SEED")]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the 64-circuit RealAmplitudes validation suite.
    Realamp {
        #[arg(long)]
        out: PathBuf,
    },
    /// Attach expressibility labels to every unlabeled manifest record.
    Label {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        #[arg(long, default_value_t = 75)]
        bins: usize,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_SHOTS)]
        shots: u64,
        #[arg(long, env = "PQCEXPR_SEED")]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Train the regressor on a labeled manifest.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 1e-6)]
        wd: f64,
        #[arg(long, default_value_t = 2048)]
        batch: usize,
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long, default_value_t = 10)]
        patience: usize,
        #[arg(long, value_enum, default_value_t = NeighborhoodArg::Symmetrized)]
        neighborhood: NeighborhoodArg,
        #[arg(long, env = "PQCEXPR_SEED")]
        seed: u64,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        out_history: PathBuf,
    },
    /// Evaluate a checkpoint on a labeled manifest and write the scatter CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = SubsetArg::All)]
        subset: SubsetArg,
    },
    /// Predict the expressibility of one circuit document.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        circuit: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate {
            count,
            max_qubits,
            max_depth,
            seed,
            out,
        } => {
            let s = pipeline::generate_to_dir(count, max_qubits, max_depth, seed, &out)?;
            let (lo, hi) = (
                s.depth_histogram.keys().next().copied().unwrap_or(0),
                s.depth_histogram.keys().last().copied().unwrap_or(0),
            );
            println!("generated {} circuits in {} (depth {lo}..={hi})", s.count, out.display());
        }
        Command::Realamp { out } => {
            let n = pipeline::realamp_to_dir(&out)?;
            println!("wrote {n} RealAmplitudes circuits to {}", out.display());
        }
        Command::Label {
            manifest,
            samples,
            bins,
            mode,
            shots,
            seed,
            jobs,
        } => {
            let config = EstimatorConfig {
                num_samples: samples,
                num_bins: bins,
                mode: match mode {
                    Mode::Exact => FidelityMode::Exact,
                    Mode::Shots => FidelityMode::Shots { shots },
                },
                seed,
                ..Default::default()
            };
            let s = pipeline::label_manifest(&manifest, &config, jobs)?;
            for (id, e) in &s.failures {
                eprintln!("{id}: {e}");
            }
            println!(
                "labeled {}, already labeled {}, failed {}",
                s.labeled,
                s.already_labeled,
                s.failures.len()
            );
            if let Some((_, e)) = s.failures.into_iter().next() {
                return Err(e).context("some records could not be labeled");
            }
        }
        Command::Train {
            dataset,
            epochs,
            lr,
            wd,
            batch,
            split,
            patience,
            neighborhood,
            seed,
            out_model,
            out_history,
        } => {
            let tc = TrainConfig {
                epochs,
                learning_rate: lr,
                weight_decay: wd,
                batch_size: batch,
                train_fraction: split,
                seed,
                scheduler: PlateauConfig {
                    patience,
                    ..Default::default()
                },
                ..Default::default()
            };
            let mc = ModelConfig {
                init_seed: seed,
                neighborhood: match neighborhood {
                    NeighborhoodArg::Symmetrized => Neighborhood::Symmetrized,
                    NeighborhoodArg::Incoming => Neighborhood::Incoming,
                },
                ..Default::default()
            };
            let (_, history) = pipeline::train_from_manifest(&dataset, &tc, &mc, &out_model, &out_history)?;
            if let Some(best) = history.best() {
                println!(
                    "best epoch {}: val_loss {:.6} val_rmse {:.6}",
                    best.epoch, best.val_loss, best.val_rmse
                );
            }
        }
        Command::Eval {
            model,
            dataset,
            out,
            subset,
        } => {
            let subset = match subset {
                SubsetArg::All => Subset::All,
                SubsetArg::Train => Subset::Train,
                SubsetArg::Validation => Subset::Validation,
            };
            let report = pipeline::evaluate_manifest(&model, &dataset, subset, Some(&out))?;
            println!("n={} rmse={:.6}", report.rows.len(), report.rmse);
        }
        Command::Predict { model, circuit } => {
            println!("{:.6}", pipeline::predict_file(&model, &circuit)?);
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numeric() => EXIT_NUMERIC,
        Some(Error::Config(_)) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
