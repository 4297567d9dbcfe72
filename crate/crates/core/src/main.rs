use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ebcsl::config::presets;
use ebcsl::harness::{run, validate_config, Mode, RunOptions};

#[derive(Parser)]
#[command(name = "ebcsl", version, about = "Electric-bus charging scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Preset {
    SixBus,
    Micro,
    MicroStochastic,
    MicroT12,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check an experiment file.
    ValidateConfig { path: PathBuf },
    /// Print a built-in experiment as TOML.
    Preset {
        #[arg(value_enum)]
        name: Preset,
    },
    /// Train, evaluate or run a baseline.
    Run {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long)]
        ckpt_every: Option<usize>,
        /// Policy bundle to evaluate.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ValidateConfig { path } => validate_config(&path).map(|_| println!("{}: ok", path.display())),
        Command::Preset { name } => {
            let experiment = match name {
                Preset::SixBus => presets::experiment(presets::six_bus()),
                Preset::Micro => presets::small_experiment(presets::micro(false)),
                Preset::MicroStochastic => presets::small_experiment(presets::micro(true)),
                Preset::MicroT12 => presets::small_experiment(presets::micro_t12()),
            };
            print!("{}", experiment.to_toml_string());
            Ok(())
        }
        Command::Run {
            mode,
            config,
            seed,
            episodes,
            iterations,
            out,
            ckpt_every,
            checkpoint,
        } => run(&RunOptions {
            mode,
            config,
            seed,
            episodes,
            iterations,
            out,
            ckpt_every,
            checkpoint,
        })
        .map(|s| {
            println!(
                "{}: return {:.4}, violation rate {:.4} over {} episodes",
                s.run_dir.display(),
                s.report.avg_operational_return,
                s.report.safety_violation_rate,
                s.report.episodes
            )
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
