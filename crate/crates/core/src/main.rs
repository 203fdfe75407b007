use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use softnull::error::Result;
use softnull::harness::{
    aggregate, emit, emit_summary, run_experiment_with, ExperimentConfig, OutputPaths, Overrides, Preset, ResultTable,
};
use softnull::precoders::Strategy;

#[derive(Parser)]
#[command(name = "softnull", version, about = "Downlink precoding experiments for cooperative cellular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Recompute summary and plot data from a raw CSV.
    Aggregate {
        raw: PathBuf,
        /// Output directory (defaults to the raw file's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in experiment: fig3 (line network) or fig5 (hex network).
    Repro {
        preset: Preset,
        /// Use the full trial counts (100 line trials, 10 × 10 hex realizations).
        #[arg(long)]
        paper_scale: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Args, Default)]
struct OverrideArgs {
    /// SNR points in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    /// Cluster sizes, comma separated.
    #[arg(long = "cluster-size", value_delimiter = ',')]
    cluster_size: Option<Vec<usize>>,
    /// Strategies, comma separated.
    #[arg(long, value_delimiter = ',')]
    strategy: Option<Vec<Strategy>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fading realizations per shadow realization.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

impl OverrideArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            snr_db: self.snr.clone(),
            cluster_sizes: self.cluster_size.clone(),
            strategies: self.strategy.clone(),
            seed: self.seed,
            trials: self.trials,
            out: self.out.clone(),
        }
    }
}

fn run(mut config: ExperimentConfig, args: &OverrideArgs) -> Result<()> {
    config.apply(&args.overrides())?;
    let quiet = args.quiet;
    let table = run_experiment_with(&config, |done, total| {
        if !quiet {
            eprintln!("{}: trial {done}/{total}", config.name);
        }
    })?;
    let summary = aggregate(&table)?;
    let paths = OutputPaths::in_dir(&config.output_dir);
    emit(&table, &summary, &paths)?;
    report(&paths, table.rows.len(), table.failed_rows());
    Ok(())
}

fn report(paths: &OutputPaths, rows: usize, failed: usize) {
    if rows > 0 {
        println!("rows {rows} failed {failed}");
    }
    println!("raw {}", paths.raw.display());
    println!("summary {}", paths.summary.display());
    println!("plot {}", paths.plot.display());
}

fn aggregate_file(raw: &Path, out: Option<&Path>) -> Result<()> {
    let table = ResultTable::read_path(raw)?;
    let summary = aggregate(&table)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| raw.parent().map(Path::to_path_buf).unwrap_or_default());
    let paths = OutputPaths { raw: raw.to_path_buf(), ..OutputPaths::in_dir(&dir) };
    emit_summary(&summary, &paths)?;
    println!("summary {}", paths.summary.display());
    println!("plot {}", paths.plot.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => run(ExperimentConfig::from_path(&config)?, &overrides),
        Command::Aggregate { raw, out } => aggregate_file(&raw, out.as_deref()),
        Command::Repro { preset, paper_scale, overrides } => run(preset.config(paper_scale)?, &overrides),
    }
}

fn fail(kind: &str, msg: &str) -> ExitCode {
    eprintln!("error: kind={kind} msg={}", msg.split_whitespace().collect::<Vec<_>>().join(" "));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim().trim_start_matches("error: ")),
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
