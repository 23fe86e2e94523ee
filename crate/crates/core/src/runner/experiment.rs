//! Seed sweeps, CSV output and summaries.
//!
//! Each output file starts with the run configuration echoed as `#` comment
//! lines, then a header row, then data rows. Floats are written with the
//! shortest representation that parses back to the same bits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::agents::{Agent, Trainer, Variant};
use crate::error::{Error, Result};
use crate::probe::{probe_agent, BiasRecord};
use crate::rng::{derive_seed, STREAM_EVAL, STREAM_PROBE};
use crate::runner::config::RunConfig;
use crate::runner::eval::{evaluate_policy, EvalRecord};

pub const CURVE_HEADER: &str = "seed,env_step,mean_return,std_return";
pub const BIAS_HEADER: &str = "env_step,mean_estimated_q,std_estimated_q,mean_true_return,std_true_return,bias";
pub const DIAGNOSTICS_HEADER: &str = "env_step,updates,mean_critic_loss,mean_target,beta";
pub const SUMMARY_HEADER: &str = "label,mean_last5,std_over_seeds,n_seeds";

/// The beta grid used by `sweep`.
pub const BETA_GRID: [f64; 7] = [0.15, 0.30, 0.45, 0.50, 0.60, 0.75, 1.0];

/// Number of trailing evaluations averaged per seed in a summary.
pub const SUMMARY_LAST_K: usize = 5;

/// Update statistics averaged over one evaluation interval.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub env_step: u64,
    pub updates: u64,
    pub mean_critic_loss: f64,
    pub mean_target: f64,
    pub beta: f64,
}

#[derive(Clone, Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub evals: Vec<EvalRecord>,
    pub bias: Vec<BiasRecord>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub agent: Agent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub mean_of_last_k: f64,
    /// Population standard deviation of the per-seed last-k means.
    pub std_over_seeds: f64,
    pub k: usize,
    pub n_seeds: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub outcomes: Vec<SeedOutcome>,
    pub summary: SummaryRow,
    pub files: Vec<PathBuf>,
}

/// Summary label: the variant for DDPG, the effective target weight otherwise,
/// so TD3 and WD3 with `beta = 1` share a label.
pub fn summary_label(config: &RunConfig) -> String {
    match config.variant() {
        Variant::Ddpg => "ddpg".to_string(),
        Variant::Td3 | Variant::Wd3 => format!("beta={}", config.agent.effective_beta()),
    }
}

#[derive(Default)]
struct Interval {
    updates: u64,
    loss: f64,
    target: f64,
    beta: f64,
}

impl Interval {
    fn flush(&mut self, env_step: u64) -> DiagnosticsRecord {
        let n = self.updates.max(1) as f64;
        let rec = DiagnosticsRecord {
            env_step,
            updates: self.updates,
            mean_critic_loss: self.loss / n,
            mean_target: self.target / n,
            beta: self.beta,
        };
        *self = Interval {
            beta: self.beta,
            ..Interval::default()
        };
        rec
    }
}

/// One training run. Evaluation and probing use their own seeds and
/// environments, so they never change what training does.
pub fn run_seed(config: &RunConfig, seed: u64) -> Result<SeedOutcome> {
    let mut trainer = Trainer::new(config.env, config.agent.clone(), seed)?;
    let eval_seed = derive_seed(seed, STREAM_EVAL);
    let probe_seed = derive_seed(seed, STREAM_PROBE);
    let evaluate = |agent: &Agent, env_step: u64| -> Result<EvalRecord> {
        let (mean_return, std_return) = evaluate_policy(agent, config.env, config.eval_episodes, eval_seed)?;
        Ok(EvalRecord {
            seed,
            env_step,
            mean_return,
            std_return,
            episode_count: config.eval_episodes,
        })
    };

    let mut evals = vec![evaluate(trainer.agent(), 0)?];
    let mut bias = Vec::new();
    if config.probe_enabled {
        bias.push(probe_agent(trainer.agent(), config.env, &config.probe, 0, probe_seed)?);
    }
    let mut diagnostics = Vec::new();
    let mut interval = Interval {
        beta: config.agent.effective_beta(),
        ..Interval::default()
    };
    for step in 1..=config.total_steps {
        let d = trainer.train_step()?;
        if let Some(u) = d.update {
            interval.updates += 1;
            interval.loss += u.critic_losses[0];
            interval.target += u.mean_target;
            interval.beta = u.beta;
        }
        if step % config.eval_every == 0 {
            evals.push(evaluate(trainer.agent(), step)?);
            diagnostics.push(interval.flush(step));
        }
        if config.probe_enabled && step % config.probe_every == 0 {
            bias.push(probe_agent(trainer.agent(), config.env, &config.probe, step, probe_seed)?);
        }
    }
    Ok(SeedOutcome {
        seed,
        evals,
        bias,
        diagnostics,
        agent: trainer.into_agent(),
    })
}

/// Mean over the last `k` evaluations of each seed, then mean and population
/// standard deviation across seeds.
pub fn summarize(label: &str, curves: &[Vec<EvalRecord>], k: usize) -> Result<SummaryRow> {
    if curves.is_empty() || k == 0 {
        return Err(Error::InvalidArgument("summary needs at least one seed and k >= 1".into()));
    }
    let per_seed: Vec<f64> = curves
        .iter()
        .map(|c| {
            if c.len() < k {
                return Err(Error::NotEnoughData {
                    needed: k,
                    available: c.len(),
                });
            }
            Ok(c[c.len() - k..].iter().map(|r| r.mean_return).sum::<f64>() / k as f64)
        })
        .collect::<Result<_>>()?;
    let (mean, std) = crate::runner::eval::mean_std(&per_seed);
    Ok(SummaryRow {
        label: label.to_string(),
        mean_of_last_k: mean,
        std_over_seeds: std,
        k,
        n_seeds: per_seed.len(),
    })
}

pub fn config_echo(config: &RunConfig) -> String {
    config.to_text().lines().map(|l| format!("# {l}\n")).collect()
}

fn write_file(path: &Path, echo: &str, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(echo.as_bytes())?;
    writeln!(out, "{header}")?;
    for r in rows {
        writeln!(out, "{r}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn summary_line(row: &SummaryRow) -> String {
    format!("{},{},{},{}", row.label, row.mean_of_last_k, row.std_over_seeds, row.n_seeds)
}

/// Creates `dir` and confirms a file can be written there.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-check");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

/// Writes one seed's curve, diagnostics, checkpoint and (if probed) bias files.
pub fn write_seed_files(config: &RunConfig, outcome: &SeedOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    let echo = config_echo(config);
    let seed = outcome.seed;
    let mut files = Vec::new();

    let curve = dir.join(format!("curve_seed{seed}.csv"));
    write_file(
        &curve,
        &echo,
        CURVE_HEADER,
        outcome
            .evals
            .iter()
            .map(|e| format!("{},{},{},{}", e.seed, e.env_step, e.mean_return, e.std_return)),
    )?;
    files.push(curve);

    let diag = dir.join(format!("diagnostics_seed{seed}.csv"));
    write_file(
        &diag,
        &echo,
        DIAGNOSTICS_HEADER,
        outcome.diagnostics.iter().map(|d| {
            format!(
                "{},{},{},{},{}",
                d.env_step, d.updates, d.mean_critic_loss, d.mean_target, d.beta
            )
        }),
    )?;
    files.push(diag);

    if config.probe_enabled {
        let bias = dir.join(format!("bias_seed{seed}.csv"));
        write_file(
            &bias,
            &echo,
            BIAS_HEADER,
            outcome.bias.iter().map(|b| {
                format!(
                    "{},{},{},{},{},{}",
                    b.env_step,
                    b.mean_estimated_q,
                    b.std_estimated_q,
                    b.mean_true_return,
                    b.std_true_return,
                    b.bias()
                )
            }),
        )?;
        files.push(bias);
    }

    let ckpt = dir.join(format!("checkpoint_seed{seed}.txt"));
    let mut out = BufWriter::new(fs::File::create(&ckpt)?);
    outcome.agent.write_checkpoint(config.env, &mut out)?;
    out.flush()?;
    files.push(ckpt);
    Ok(files)
}

/// Trains every seed (in parallel), then writes all per-seed files and
/// `summary.csv` under `config.output_dir`.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutput> {
    let dir = &config.output_dir;
    ensure_writable(dir)?;
    let outcomes: Vec<SeedOutcome> = config
        .seeds
        .par_iter()
        .map(|&s| run_seed(config, s))
        .collect::<Result<_>>()?;

    let mut files = Vec::new();
    for o in &outcomes {
        files.extend(write_seed_files(config, o, dir)?);
    }
    let curves: Vec<Vec<EvalRecord>> = outcomes.iter().map(|o| o.evals.clone()).collect();
    let k = SUMMARY_LAST_K.min(curves.iter().map(Vec::len).min().unwrap_or(0));
    let summary = summarize(&summary_label(config), &curves, k)?;
    let path = dir.join("summary.csv");
    write_file(&path, &config_echo(config), SUMMARY_HEADER, std::iter::once(summary_line(&summary)))?;
    files.push(path);
    Ok(ExperimentOutput {
        outcomes,
        summary,
        files,
    })
}

/// Runs WD3 once per beta, each into `output_dir/beta_<b>`, and writes one
/// summary row per beta to `output_dir/sweep_summary.csv`.
pub fn run_sweep(config: &RunConfig, betas: &[f64]) -> Result<Vec<SummaryRow>> {
    if betas.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one beta".into()));
    }
    ensure_writable(&config.output_dir)?;
    let mut rows = Vec::new();
    for &beta in betas {
        let mut cfg = config.clone();
        cfg.agent.variant = Variant::Wd3;
        cfg.agent.beta = beta;
        cfg.agent
            .validate()
            .map_err(|(field, msg)| Error::InvalidArgument(format!("agent.{field}: {msg}")))?;
        cfg.output_dir = config.output_dir.join(format!("beta_{beta}"));
        rows.push(run_experiment(&cfg)?.summary);
    }
    let mut echo = config.clone();
    echo.agent.variant = Variant::Wd3;
    write_file(
        &config.output_dir.join("sweep_summary.csv"),
        &config_echo(&echo),
        SUMMARY_HEADER,
        rows.iter().map(summary_line),
    )?;
    Ok(rows)
}
