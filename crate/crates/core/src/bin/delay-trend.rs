use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use delay_trend::cli::{self, RunOptions};

#[derive(Parser)]
#[command(
    name = "delay-trend",
    version,
    about = "Delay SDE simulation and kernel trend estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Caps worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate X, the driving fBm W and the noiseless solution.
    Simulate(Common),
    /// Kernel trend estimates at levels or times.
    Estimate(Common),
    /// Monte-Carlo MSE over a noise grid with a log-log rate fit.
    RateExperiment(Common),
    /// Moment table and condition checks for a kernel.
    KernelCheck(Common),
    /// Fundamental solution of the linear delay equation.
    FundamentalSolution(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Cli::parse();
    let (run, common): (fn(_, _, _) -> _, Common) = match args.command {
        Command::Simulate(c) => (cli::cmd_simulate, c),
        Command::Estimate(c) => (cli::cmd_estimate, c),
        Command::RateExperiment(c) => (cli::cmd_rate_experiment, c),
        Command::KernelCheck(c) => (cli::cmd_kernel_check, c),
        Command::FundamentalSolution(c) => (cli::cmd_fundamental_solution, c),
    };
    let opts = RunOptions {
        seed: common.seed,
        threads: common.threads,
    };
    match run(&common.config, &common.out, &opts) {
        Ok(output) => {
            if let Some(msg) = output.message {
                println!("{msg}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", cli::format_error(&e));
            ExitCode::FAILURE
        }
    }
}
