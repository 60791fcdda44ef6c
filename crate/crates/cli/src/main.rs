use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sbrfew_core::corpus::{load_dataset, DataFormat, LabeledDataset};
use sbrfew_core::runner::{run_experiment, write_report, ExperimentConfig, RESULTS_CSV};
use tracing_subscriber::EnvFilter;

/// Security bug report classification experiments.
#[derive(Parser)]
#[command(name = "sbrfew", version)]
struct Cli {
    /// Log progress to stderr (`RUST_LOG` overrides).
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print size and security share of each dataset file.
    Stats {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
        /// Force a format instead of guessing from the extension.
        #[arg(long)]
        format: Option<DataFormat>,
    },
    /// Cross-validate every technique on every dataset in a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output_dir` from the config,
        /// relative to the config file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one bar chart per metric from a results file.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Defaults to the directory holding the results file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_FAILED_CELLS: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default = if cli.verbose { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default)))
        .with_writer(std::io::stderr)
        .init();

    match cli.command {
        Command::Stats { datasets, format } => stats(&datasets, format),
        Command::Run { config, out } => run(&config, out.as_deref()),
        Command::Report { results, out } => report(&results, out.as_deref()),
    }
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_ERROR)
}

fn stats(paths: &[PathBuf], format: Option<DataFormat>) -> ExitCode {
    let mut loaded: Vec<LabeledDataset> = Vec::new();
    for path in paths {
        let fmt = format.unwrap_or_else(|| DataFormat::from_path(path));
        match load_dataset(path, fmt) {
            Ok(ds) => loaded.push(ds),
            Err(e) => return fail(e),
        }
    }
    let width = loaded.iter().map(|d| d.name.len()).max().unwrap_or(0).max("dataset".len());
    println!("{:<width$}  {:>6}  {:>8}  {:>7}", "dataset", "total", "security", "percent");
    for ds in &loaded {
        let s = ds.stats();
        println!(
            "{:<width$}  {:>6}  {:>8}  {:>6.1}%",
            ds.name,
            s.total,
            s.positives,
            100.0 * s.positive_ratio
        );
    }
    ExitCode::SUCCESS
}

fn run(config_path: &Path, out: Option<&Path>) -> ExitCode {
    let cfg = match ExperimentConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let base = config_path.parent().unwrap_or(Path::new(""));
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| base.join(&cfg.output_dir));
    match run_experiment(&cfg, base, &out_dir) {
        Ok(summary) => {
            print!("{}", summary.table.to_markdown());
            println!("\nwrote {}", out_dir.join(RESULTS_CSV).display());
            if summary.succeeded() {
                ExitCode::SUCCESS
            } else {
                for f in &summary.meta.failures {
                    eprintln!("failed: {} / {}: {}", f.dataset, f.technique, f.message);
                }
                ExitCode::from(EXIT_FAILED_CELLS)
            }
        }
        Err(e) => fail(e),
    }
}

fn report(results: &Path, out: Option<&Path>) -> ExitCode {
    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| results.parent().unwrap_or(Path::new("")).to_path_buf());
    match write_report(results, &out_dir) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
