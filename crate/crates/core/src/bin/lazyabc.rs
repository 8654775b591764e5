use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lazyabc::harness::{
    cmd_compare, cmd_report, cmd_tune, execute, read_draws_csv, read_records_csv, write_outputs,
    ComparisonRow, EfficiencyReport, RunConfig,
};
use lazyabc::tuning::TuneOptions;
use lazyabc::Error;

#[derive(Debug, Parser)]
#[command(name = "lazyabc", version = lazyabc::harness::VERSION, about = "Standard and lazy ABC with efficiency tuning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run standard, lazy or tune-then-lazy ABC from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long = "alpha-min")]
        alpha_min: Option<f64>,
    },
    /// Fit a continuation policy from a training-records CSV.
    Tune {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "alpha-min")]
        alpha_min: Option<f64>,
        /// Nadaraya-Watson bandwidth on the standardized scale.
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Compare a standard and a lazy report.
    Compare {
        #[arg(long)]
        standard: PathBuf,
        #[arg(long)]
        lazy: PathBuf,
    },
    /// Recompute ESS, z and CPU totals from a draws CSV.
    Report {
        #[arg(long)]
        draws: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            out,
            lambda,
            alpha_min,
        } => {
            let mut cfg = RunConfig::from_json_file(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            if lambda.is_some() {
                cfg.lambda = lambda;
            }
            if let Some(a) = alpha_min {
                cfg.alpha_min = a;
            }
            let output = execute(&cfg)?;
            write_outputs(&cfg.out_dir, &output)?;
            println!("{}", serde_json::to_string_pretty(&output.report)?);
        }
        Command::Tune {
            records,
            out,
            alpha_min,
            bandwidth,
        } => {
            let records = read_records_csv(&records)?;
            let mut opts = TuneOptions::default();
            if let Some(a) = alpha_min {
                opts.alpha_min = a;
            }
            if let Some(b) = bandwidth {
                opts.bandwidth = b;
            }
            let policy = cmd_tune(&records, &opts)?;
            std::fs::create_dir_all(&out)?;
            policy.write(&out.join("policy.json"))?;
            println!(
                "estimated relative efficiency {:.4}",
                policy.estimated_relative_efficiency
            );
        }
        Command::Compare { standard, lazy } => {
            let row = cmd_compare(&EfficiencyReport::read(&standard)?, &EfficiencyReport::read(&lazy)?)?;
            println!("{}", ComparisonRow::header());
            println!("{}", row.render());
        }
        Command::Report { draws } => {
            let draws = read_draws_csv(&draws)?;
            println!("{}", serde_json::to_string_pretty(&cmd_report(&draws))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
