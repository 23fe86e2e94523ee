use std::fs;
use std::path::Path;
use std::process::Command;

use wd3_core::agents::{AgentConfig, Checkpoint, Variant};
use wd3_core::envs::EnvKind;
use wd3_core::runner::config::RunConfig;
use wd3_core::runner::run_experiment;

fn short(env: EnvKind, variant: Variant, dir: &Path) -> RunConfig {
    RunConfig {
        agent: AgentConfig {
            warmup_steps: 200,
            batch_size: 32,
            hidden_dim: 16,
            ..AgentConfig::for_variant(variant)
        },
        total_steps: 1_400,
        eval_every: 200,
        eval_episodes: 2,
        seeds: vec![0, 1],
        output_dir: dir.to_path_buf(),
        ..RunConfig::new(env, variant)
    }
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn wd3() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wd3"))
}

#[test]
fn same_config_gives_byte_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short(EnvKind::Pendulum, Variant::Wd3, dir.path());
    cfg.probe_enabled = true;
    cfg.probe_every = 700;
    cfg.probe.trajectory_count = 2;
    cfg.probe.transitions_per_trajectory = 20;
    let first = run_experiment(&cfg).unwrap();
    assert_eq!(first.files.len(), 2 * 4 + 1);
    let snapshot: Vec<Vec<u8>> = first.files.iter().map(|f| fs::read(f).unwrap()).collect();
    let second = run_experiment(&cfg).unwrap();
    assert_eq!(first.files, second.files);
    for (f, bytes) in second.files.iter().zip(&snapshot) {
        assert!(fs::read(f).unwrap() == *bytes, "{f:?} differs between runs");
    }
}

#[test]
fn per_seed_output_independent_of_other_seeds() {
    let (both, solo) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&short(EnvKind::Reacher, Variant::Td3, both.path())).unwrap();
    let mut cfg = short(EnvKind::Reacher, Variant::Td3, solo.path());
    cfg.seeds = vec![1];
    run_experiment(&cfg).unwrap();
    for name in ["curve_seed1.csv", "diagnostics_seed1.csv"] {
        assert_eq!(data_rows(&both.path().join(name)), data_rows(&solo.path().join(name)));
    }
    assert_eq!(
        fs::read(both.path().join("checkpoint_seed1.txt")).unwrap(),
        fs::read(solo.path().join("checkpoint_seed1.txt")).unwrap()
    );
}

#[test]
fn summary_recomputed_from_curves() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short(EnvKind::DoubleIntegrator, Variant::Ddpg, dir.path());
    cfg.seeds = vec![3, 4, 5];
    run_experiment(&cfg).unwrap();

    // Independent reader: last five mean_return values per seed.
    let mut per_seed = Vec::new();
    for s in &cfg.seeds {
        let rows = data_rows(&dir.path().join(format!("curve_seed{s}.csv")));
        assert_eq!(rows[0], "seed,env_step,mean_return,std_return");
        let values: Vec<f64> = rows[1..]
            .iter()
            .map(|r| r.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        assert_eq!(values.len(), 1 + 1_400 / 200);
        let tail = &values[values.len() - 5..];
        per_seed.push(tail.iter().sum::<f64>() / 5.0);
    }
    let mean = per_seed.iter().sum::<f64>() / 3.0;
    let std = (per_seed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();

    let summary = data_rows(&dir.path().join("summary.csv"));
    assert_eq!(summary[0], "label,mean_last5,std_over_seeds,n_seeds");
    let fields: Vec<&str> = summary[1].split(',').collect();
    assert_eq!(fields[0], "ddpg");
    assert!((fields[1].parse::<f64>().unwrap() - mean).abs() < 1e-9);
    assert!((fields[2].parse::<f64>().unwrap() - std).abs() < 1e-9);
    assert_eq!(fields[3], "3");
}

#[test]
fn csv_files_echo_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short(EnvKind::Pendulum, Variant::Ddpg, dir.path());
    run_experiment(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("curve_seed0.csv")).unwrap();
    let echo: String = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| format!("{}\n", l.trim_start_matches("# ")))
        .collect();
    assert_eq!(wd3_core::runner::parse_config(&echo).unwrap(), cfg);
}

#[test]
fn cli_missing_config_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let output = wd3()
        .args(["train", "--config"])
        .arg(dir.path().join("nope.cfg"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert_eq!(stderr.trim().lines().count(), 1, "{stderr}");
    assert!(!out_dir.exists());
}

#[test]
fn cli_reports_config_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "env_name=pendulum\nvariant=wd3\n\nagent.beta=1.5\n").unwrap();
    let output = wd3().args(["train", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("line 4") && stderr.contains("agent.beta"), "{stderr}");
}

#[test]
fn cli_usage_errors() {
    for args in [&["fly"][..], &["train", "--nonsense"][..], &[][..]] {
        let output = wd3().args(args).output().unwrap();
        assert_eq!(output.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8(output.stderr).unwrap().contains("Usage"));
    }
}

#[test]
fn cli_beta_one_matches_td3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("base.cfg");
    fs::write(
        &cfg,
        "env_name=double-integrator\nagent.warmup_steps=200\nagent.batch_size=32\nagent.hidden_dim=16\n\
         total_steps=1000\neval_every=250\neval_episodes=2\n",
    )
    .unwrap();
    let run = |variant: &str, extra: &[&str], out: &str| {
        let status = wd3()
            .args(["train", "--config"])
            .arg(&cfg)
            .args(["--set", &format!("variant={variant}"), "--seed", "7", "--out"])
            .arg(dir.path().join(out))
            .args(extra)
            .output()
            .unwrap();
        assert!(status.status.success(), "{status:?}");
    };
    run("td3", &[], "td3");
    run("wd3", &["--set", "agent.beta=1.0"], "wd3");
    for name in ["curve_seed7.csv", "diagnostics_seed7.csv", "summary.csv"] {
        assert_eq!(
            data_rows(&dir.path().join("td3").join(name)),
            data_rows(&dir.path().join("wd3").join(name)),
            "{name}"
        );
    }
    let read = |v: &str| {
        let f = fs::File::open(dir.path().join(v).join("checkpoint_seed7.txt")).unwrap();
        Checkpoint::read(&mut std::io::BufReader::new(f)).unwrap()
    };
    let (t, w) = (read("td3"), read("wd3"));
    assert_eq!(t.networks, w.networks);
    assert_eq!((t.env_steps, t.updates), (w.env_steps, w.updates));
}

#[test]
fn cli_eval_reads_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short(EnvKind::Pendulum, Variant::Td3, dir.path());
    cfg.seeds = vec![2];
    let out = run_experiment(&cfg).unwrap();
    let ckpt = dir.path().join("checkpoint_seed2.txt");
    let output = wd3()
        .args(["eval", "--episodes", "3", "--seed", "5", "--checkpoint"])
        .arg(&ckpt)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let line = stdout.lines().nth(1).unwrap();
    let (mean, std) =
        wd3_core::runner::evaluate_policy(out.outcomes[0].agent.actor(), EnvKind::Pendulum, 3, 5).unwrap();
    assert_eq!(line, format!("pendulum,3,{mean},{std}"));

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "not a checkpoint\n").unwrap();
    let output = wd3().args(["eval", "--checkpoint"]).arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn cli_sweep_writes_one_row_per_beta() {
    let dir = tempfile::tempdir().unwrap();
    let output = wd3()
        .args([
            "sweep",
            "--set",
            "env_name=double-integrator",
            "--set",
            "variant=wd3",
            "--set",
            "agent.warmup_steps=100",
            "--set",
            "agent.hidden_dim=8",
            "--set",
            "total_steps=500",
            "--set",
            "eval_every=100",
            "--set",
            "eval_episodes=1",
            "--seed",
            "0",
            "--betas",
            "0.15,1.0",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let rows = data_rows(&dir.path().join("sweep_summary.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("beta=0.15,"));
    assert!(rows[2].starts_with("beta=1,"));
    assert!(dir.path().join("beta_0.15").join("curve_seed0.csv").exists());
}

#[test]
fn cli_theory_table() {
    let output = wd3().args(["theory", "--samples", "100000"]).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "kind,N,scale,closed_form,mc_mean,std_err,pass");
    assert!(lines[1].starts_with("gaussian,2,1,-0.564190,") && lines[1].ends_with(",pass"));
    assert!(lines[2].starts_with("uniform,2,1,-0.333333,"));
}
