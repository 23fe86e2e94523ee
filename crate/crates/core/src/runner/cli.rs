//! `wd3` command line.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime or
//! numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::agents::Checkpoint;
use crate::error::Error;
use crate::runner::config::{parse_config_with_overrides, RunConfig};
use crate::runner::eval::evaluate_policy;
use crate::runner::experiment::{run_experiment, run_sweep, summary_line, BETA_GRID, SUMMARY_HEADER};
use crate::theory::{default_models, verification_table, THEORY_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "wd3", about = "Train and analyse DDPG, TD3 and WD3 agents on toy control tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train every seed and write learning curves and a summary.
    Train(RunArgs),
    /// Train with the critic bias probe enabled.
    Probe(RunArgs),
    /// Run WD3 over a grid of beta values.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated beta values.
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
    },
    /// Print the min-operator bias verification table.
    Theory {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate the actor stored in a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Configuration file in key=value format.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set agent.beta=1.0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Replace the seed list. Repeatable.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, Failure> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?,
            None => String::new(),
        };
        let mut overrides = self.overrides.clone();
        if !self.seeds.is_empty() {
            let list: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
            overrides.push(format!("seeds={}", list.join(",")));
        }
        if let Some(out) = &self.out {
            overrides.push(format!("output_dir={}", out.display()));
        }
        parse_config_with_overrides(&text, &overrides).map_err(|e| Failure::Config(e.to_string()))
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    match command {
        Command::Train(args) => {
            let cfg = args.load()?;
            let out = run_experiment(&cfg)?;
            writeln!(stdout, "{SUMMARY_HEADER}").map_err(io)?;
            writeln!(stdout, "{}", summary_line(&out.summary)).map_err(io)?;
        }
        Command::Probe(args) => {
            let mut cfg = args.load()?;
            cfg.probe_enabled = true;
            let out = run_experiment(&cfg)?;
            writeln!(stdout, "seed,env_step,bias").map_err(io)?;
            for o in &out.outcomes {
                for b in &o.bias {
                    writeln!(stdout, "{},{},{}", o.seed, b.env_step, b.bias()).map_err(io)?;
                }
            }
        }
        Command::Sweep { run, betas } => {
            let cfg = run.load()?;
            let betas = betas.unwrap_or_else(|| BETA_GRID.to_vec());
            let rows = run_sweep(&cfg, &betas)?;
            writeln!(stdout, "{SUMMARY_HEADER}").map_err(io)?;
            for r in &rows {
                writeln!(stdout, "{}", summary_line(r)).map_err(io)?;
            }
        }
        Command::Theory { samples, seed } => {
            let rows = verification_table(&default_models(), samples, seed)?;
            writeln!(stdout, "{THEORY_HEADER}").map_err(io)?;
            for r in &rows {
                writeln!(stdout, "{r}").map_err(io)?;
            }
            if let Some(bad) = rows.iter().find(|r| !r.pass) {
                return Err(Failure::Runtime(format!("theory check failed: {bad}")));
            }
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => {
            let file = File::open(&checkpoint)
                .map_err(|e| Failure::Config(format!("cannot open checkpoint {}: {e}", checkpoint.display())))?;
            let ckpt = Checkpoint::read(&mut BufReader::new(file))?;
            let (mean, std) = evaluate_policy(ckpt.actor()?, ckpt.env, episodes, seed)?;
            writeln!(stdout, "env,episodes,mean_return,std_return").map_err(io)?;
            writeln!(stdout, "{},{episodes},{mean},{std}", ckpt.env).map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command with output on
/// `stdout`, reports failures on stderr and returns the exit code.
pub fn run_with_output<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            eprintln!("wd3: config error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("wd3: {msg}");
            EXIT_RUNTIME
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_output(args, &mut std::io::stdout().lock())
}
