use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use esrn::evolution::RankMetric;
use esrn::models::ModelId;
use esrn_cli::RunConfig;

#[derive(Parser)]
#[command(name = "esrn", version, about = "Symbolic regression for the river longitudinal dispersion coefficient")]
struct Cli {
    /// TOML run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving all outputs.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, clean and IQR-filter a raw dataset.
    Clean(CleanArgs),
    /// Split a dataset into train and test subsets.
    Split(SplitArgs),
    /// Evolve a symbolic network on train/test files.
    Evolve(EvolveArgs),
    /// Score catalog models on a dataset.
    Bench(BenchArgs),
    /// Generate synthetic data from a catalog formula.
    Synth(SynthArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Args)]
struct CleanArgs {
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvolveArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    gens: Option<usize>,
    /// Maximum layer widths, e.g. 5,3,1.
    #[arg(long, value_delimiter = ',')]
    topology: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_metric)]
    metric: Option<RankMetric>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report this generation instead of the automatically selected one.
    #[arg(long)]
    generation: Option<usize>,
    #[arg(long)]
    snap_tol: Option<f64>,
    /// Print one line per generation to stderr.
    #[arg(long)]
    progress: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// `all` or a comma-separated list of model ids.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// network.json written by `evolve`.
    #[arg(long)]
    network: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    formula: Option<ModelId>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_metric(s: &str) -> Result<RankMetric, String> {
    match s {
        "r2" => Ok(RankMetric::R2),
        "rmse" => Ok(RankMetric::Rmse),
        "wmape" => Ok(RankMetric::Wmape),
        _ => Err(format!("unknown metric `{s}` (expected r2, rmse or wmape)")),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut config.output_dir, cli.output_dir);

    match cli.command {
        Command::Clean(a) => {
            set(&mut config.input, a.input);
            let c = esrn_cli::cmd_clean(&config)?;
            eprintln!("rows: parsed {} → cleaned {} → filtered {}", c.parsed, c.cleaned, c.filtered);
        }
        Command::Split(a) => {
            set(&mut config.input, a.input);
            set(&mut config.split.fraction, a.fraction);
            set(&mut config.split.seed, a.seed);
            let (train, test) = esrn_cli::cmd_split(&config)?;
            eprintln!("train {train} rows, test {test} rows");
        }
        Command::Evolve(a) => {
            let e = &mut config.evolve;
            set(&mut e.train, a.train);
            set(&mut e.test, a.test);
            set(&mut e.snap_tol, a.snap_tol);
            if a.generation.is_some() {
                e.generation = a.generation;
            }
            let s = &mut e.search;
            set(&mut s.population, a.pop);
            set(&mut s.generations, a.gens);
            set(&mut s.topology, a.topology);
            set(&mut s.metric, a.metric);
            set(&mut s.seed, a.seed);
            let progress = a.progress;
            let out = esrn_cli::cmd_evolve_with_progress(&config, |r| {
                if progress {
                    eprintln!("generation {:>4}  train {:.6}  test {:.6}", r.generation, r.train_metric, r.test_metric);
                }
            })?;
            eprintln!("best generation {}: {} = {}", out.best_generation, out.network.output, out.simplified);
        }
        Command::Bench(a) => {
            let b = &mut config.bench;
            set(&mut b.models, a.models);
            set(&mut b.data, a.data);
            if a.network.is_some() {
                b.network = a.network;
            }
            let reports = esrn_cli::cmd_bench(&config)?;
            for (name, r) in reports {
                let r2 = r.r2.map_or("undefined".to_string(), |v| format!("{v:.4}"));
                eprintln!("{name:<18} r2 {r2:>10}  accuracy {:>6.2}%", r.accuracy_pct);
            }
        }
        Command::Synth(a) => {
            let s = &mut config.synth;
            set(&mut s.model, a.formula);
            set(&mut s.n, a.n);
            set(&mut s.noise, a.noise);
            set(&mut s.seed, a.seed);
            let data = esrn_cli::cmd_synth(&config)?;
            eprintln!("wrote {} samples", data.len());
        }
        Command::Config => {
            print!("{}", config.to_toml().context("serializing configuration")?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
