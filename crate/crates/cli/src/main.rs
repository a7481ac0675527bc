use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use danebench::{cmd_plot, cmd_run, cmd_sweep, exit_code, SweepAxis, XAxis, YAxis};

#[derive(Parser)]
#[command(name = "danebench", version, about = "Distributed ridge regression experiments with DANE and SGD baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    #[value(name = "T")]
    T,
    Fraction,
}

#[derive(Clone, Copy, ValueEnum)]
enum XArg {
    Grads,
    Rounds,
}

#[derive(Clone, Copy, ValueEnum)]
enum YArg {
    #[value(name = "log10_subopt")]
    Log10Subopt,
    #[value(name = "pop_error")]
    PopError,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every run block of an experiment file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replaces the seed of every run block.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeat every run block over values of T or of the data-access fraction.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated values, e.g. 0.5n,n,2n,4n,6n or 1.0,0.5,0.25.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw trace CSVs into one SVG chart.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "grads")]
        x: XArg,
        #[arg(long, value_enum, default_value = "log10_subopt")]
        y: YArg,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed } => cmd_run(&config, &out, seed).map(|_| ()),
        Command::Sweep { config, axis, values, out, seed } => {
            let axis = match axis {
                AxisArg::T => SweepAxis::T,
                AxisArg::Fraction => SweepAxis::Fraction,
            };
            cmd_sweep(&config, axis, values, &out, seed).map(|_| ())
        }
        Command::Plot { csv, out, x, y } => {
            let x = match x {
                XArg::Grads => XAxis::Grads,
                XArg::Rounds => XAxis::Rounds,
            };
            let y = match y {
                YArg::Log10Subopt => YAxis::Log10Subopt,
                YArg::PopError => YAxis::PopError,
            };
            cmd_plot(&csv, &out, x, y)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
