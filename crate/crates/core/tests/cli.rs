use std::path::PathBuf;
use std::process::{Command, Output};

use robustlin::expcli::{read_csv, ExperimentConfig, ExperimentKind, Row};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_robustlin"));
    cmd.env_remove("ROBUSTLIN_JOBS");
    cmd
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_config(name: &str, body: &str) -> PathBuf {
    let path = scratch(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

const SMALL: &str = "experiment = \"ols_vs_opt\"\nn = 60\nd = 6\nsweep = [0.0, 0.1, 0.5]\nnorm = [\"l2\", \"linf\"]\n";

#[test]
fn invalid_configs_exit_with_two() {
    let cases = [
        ("unknown.toml", "experiment = \"nope\"\n"),
        ("zero_reps.toml", "experiment = \"overparam\"\nreplicates = 0\n"),
        ("bogus_key.toml", "experiment = \"overparam\"\nbogus = 1\n"),
        ("empty_sweep.toml", "experiment = \"lasso_curse\"\nsweep = []\n"),
        ("bad_norm.toml", "experiment = \"ols_vs_opt\"\nnorm = [\"l0\"]\n"),
    ];
    for (name, body) in cases {
        let path = write_config(name, body);
        let out = run(bin().args(["run", "--config"]).arg(&path));
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = run(bin().args(["run", "--experiment", "polydecay", "--jobs", "0"]));
    assert_eq!(out.status.code(), Some(2));
    let out = run(bin().args(["run", "--config", "/nonexistent/robustlin.toml"]));
    assert_eq!(out.status.code(), Some(2));
    let out = run(bin().args(["run"]));
    assert_eq!(out.status.code(), Some(2));
    let out = run(bin().args(["run", "--experiment", "polydecay"]).env("ROBUSTLIN_JOBS", "many"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn print_config_shows_effective_values() {
    let path = write_config("print.toml", SMALL);
    let out = run(bin().args(["run", "--print-config", "--seed", "7", "--replicates", "3", "--config"]).arg(&path));
    assert!(out.status.success());
    let cfg = ExperimentConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.experiment, Some(ExperimentKind::OlsVsOpt));
    assert_eq!((cfg.seed, cfg.replicates, cfg.n, cfg.d), (Some(7), Some(3), Some(60), Some(6)));
    assert_eq!(cfg.sigma, Some(0.1));
    assert_eq!(cfg.sweep, Some(vec![0.0, 0.1, 0.5]));

    let out = run(bin().args(["run", "--print-config", "--experiment", "lasso_curse"]));
    let cfg = ExperimentConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.n, Some(1500));
    assert_eq!(cfg.sweep.as_ref().map(|s| s.len()), Some(23));
}

fn csv_bytes(config: &PathBuf, extra: &[&str], env_jobs: Option<&str>) -> Vec<u8> {
    let mut cmd = bin();
    cmd.args(["run", "--seed", "42", "--config"]).arg(config).args(extra);
    if let Some(j) = env_jobs {
        cmd.env("ROBUSTLIN_JOBS", j);
    }
    let out = run(&mut cmd);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn csv_is_identical_across_worker_counts() {
    let path = write_config("det.toml", SMALL);
    let one = csv_bytes(&path, &["--jobs", "1"], None);
    assert_eq!(one, csv_bytes(&path, &["--jobs", "4"], None));
    assert_eq!(one, csv_bytes(&path, &[], Some("3")));
    assert_eq!(one, csv_bytes(&path, &["--jobs", "1"], None));

    let header = String::from_utf8_lossy(&one).lines().next().unwrap().to_string();
    assert_eq!(header, "experiment,sweep_var,sweep_value,replicate,seed,n,d,s,r,eps,metric_name,metric_value,status");
}

#[test]
fn adding_replicates_keeps_earlier_rows() {
    let path = write_config("reps.toml", SMALL);
    let parse = |bytes: Vec<u8>| read_csv(bytes.as_slice()).unwrap();
    let two = parse(csv_bytes(&path, &["--replicates", "2"], None));
    let three = parse(csv_bytes(&path, &["--replicates", "3"], None));
    let early: Vec<&Row> = three.iter().filter(|r| r.replicate < 2).collect();
    assert_eq!(two.iter().collect::<Vec<_>>(), early);
    assert!(three.iter().any(|r| r.replicate == 2));
}

#[test]
fn out_flag_writes_file_and_summary() {
    let path = write_config("out.toml", SMALL);
    let csv = scratch("out.csv");
    let out = run(bin().args(["run", "--summary", "--config"]).arg(&path).arg("--out").arg(&csv));
    assert!(out.status.success());
    let rows = read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert!(!rows.is_empty() && rows.iter().all(|r| r.experiment == "ols_vs_opt"));
    assert!(!String::from_utf8(out.stdout).unwrap().trim().is_empty());
}

#[test]
fn check_subcommand_passes() {
    let out = run(bin().args(["check", "--seed", "3"]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert!(text.trim_end().ends_with("0 failing"), "{text}");
}

#[test]
fn profile_subcommand_prints_json() {
    let problem = write_config("problem.toml", "eigenvalues = [1.0, 1.0]\ncoeffs = [0.6, 0.8]\nnoise_sd = 0.0\n");
    let out = run(bin().args(["profile", "--norm", "l2", "--r", "1", "--eps", "0.25", "--problem"]).arg(&problem));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["eps_fl"].as_f64().unwrap() - 0.5).abs() < 1e-10);
    assert!((v["e_opt_eps"].as_f64().unwrap() - 0.625).abs() < 1e-10);

    let out = run(bin().args(["profile", "--norm", "l7x", "--r", "1", "--eps", "0.25", "--problem"]).arg(&problem));
    assert_eq!(out.status.code(), Some(2));
}
