use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use radial_nls::sde::read_checkpoint;
use rnls_cli::RunConfig;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn rnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnls")).args(args).output().unwrap()
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    rnls(&args)
}

fn error_report(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap_or("")).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validation_failure_exits_2_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "command = \"simulate-sde\"\n[model]\nbeta = 2.0\n");
    let out = run("simulate-sde", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let report = error_report(&out);
    assert_eq!(report["error"]["kind"], "validation");
    assert_eq!(report["error"]["exit_code"], 2);
    assert!(report["error"]["message"].as_str().unwrap().contains("beta"));
}

#[test]
fn unknown_key_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "command = \"simulate-det\"\n[flow]\nhorizn = 2.0\n");
    let out = run("simulate-det", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let report = error_report(&out);
    assert_eq!(report["error"]["kind"], "parse");
    assert!(report["error"]["message"].as_str().unwrap().contains("horizn"));
}

#[test]
fn command_must_match_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "command = \"verify-counting\"\n");
    let out = run("simulate-det", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(tmp.path().join("o/error.json").exists());
}

#[test]
fn conservation_check_controls_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let base = "command = \"simulate-det\"\ndim = 16\n[flow]\ndt = 1e-3\nhorizon = 0.1\nrecord_every = 10\n";
    let ok = write_config(tmp.path(), &format!("{base}tolerance = 1e-4\n"));
    let out = run("simulate-det", &ok, &tmp.path().join("ok"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&tmp.path().join("ok/report.json"));
    assert_eq!(report["result"]["conservation"]["passed"], true);

    let strict = write_config(tmp.path(), &format!("{base}tolerance = 1e-14\n"));
    let out = run("simulate-det", &strict, &tmp.path().join("strict"), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_report(&out)["error"]["kind"], "conservation");
    let report = read_json(&tmp.path().join("strict/report.json"));
    assert_eq!(report["result"]["conservation"]["passed"], false);

    let off = write_config(tmp.path(), &format!("{base}tolerance = 1e-14\ncheck_conservation = false\n"));
    assert_eq!(run("simulate-det", &off, &tmp.path().join("off"), &[]).status.code(), Some(0));
}

#[test]
fn budget_exhaustion_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "command = \"verify-counting\"\n[counting]\nbudget = 1000\n");
    let out = run("verify-counting", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_report(&out)["error"]["kind"], "budget");
}

#[test]
fn oversized_picard_window_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "command = \"simulate-det\"\ndim = 8\n[flow]\nscheme = \"picard-oracle\"\ndt = 1e-3\nhorizon = 1.0\n\
         initial = [{ n = 1, re = 2.0 }]\n",
    );
    let out = run("simulate-det", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(3));
    let kind = error_report(&out)["error"]["kind"].clone();
    assert!(kind == "window-too-large" || kind == "divergence", "{kind}");
}

#[test]
fn artifacts_carry_hash_and_version() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(
        tmp.path(),
        "command = \"simulate-sde\"\ndim = 4\nseed = 3\n[sde]\ndt = 1e-2\nhorizon = 0.2\ntrajectories = 10\ncheckpoint_every = 5\n",
    );
    let out_dir = tmp.path().join("o");
    let out = run("simulate-sde", &cfg_path, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut cfg = RunConfig::load(&cfg_path).unwrap();
    cfg.output_dir = out_dir.clone();
    let hash = cfg.hash();

    let report = read_json(&out_dir.join("report.json"));
    assert_eq!(report["config_hash"], hash.as_str());
    assert_eq!(report["artifact_version"], rnls_cli::ARTIFACT_VERSION);
    assert_eq!(report["config"]["sde"]["trajectories"], 10);

    let mut reader = csv::Reader::from_path(out_dir.join("ito_residuals.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "trajectory");
    let k = headers.iter().position(|h| h == "config_hash").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| &r[k] == hash.as_str()));

    let ckpt = read_checkpoint(std::fs::File::open(out_dir.join("checkpoint.bin")).unwrap()).unwrap();
    assert_eq!(ckpt.header.config_hash, cfg.hash_bytes());
    assert_eq!(ckpt.header.seed, 3);
    assert_eq!(ckpt.snapshots.len(), 5);
}

#[test]
fn seed_override_changes_hash_and_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "command = \"simulate-sde\"\ndim = 4\n[sde]\ndt = 1e-2\nhorizon = 0.2\ntrajectories = 5\ncheckpoint_every = 0\n",
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run("simulate-sde", &cfg, &a, &["--seed", "1"]).status.success());
    assert!(run("simulate-sde", &cfg, &b, &["--seed", "2"]).status.success());
    let (ra, rb) = (read_json(&a.join("report.json")), read_json(&b.join("report.json")));
    assert_eq!(ra["seed"], 1);
    assert_ne!(ra["config_hash"], rb["config_hash"]);
    assert_ne!(ra["result"]["residual"], rb["result"]["residual"]);
}

#[test]
fn outputs_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "command = \"stationary-stats\"\ndim = 4\nseed = 8\n[stationary]\nhorizon = 5.0\ntrajectories = 6\n",
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run("stationary-stats", &cfg, &a, &["--workers", "1"]).status.success());
    assert!(run("stationary-stats", &cfg, &b, &["--workers", "3"]).status.success());
    for name in ["report.json", "mass_histogram.csv", "energy_histogram.csv", "tails.csv", "final_states.bin"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn stationary_smoke_profile_within_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "command = \"stationary-stats\"\ndim = 4\nseed = 1\n[stationary]\ndt = 5e-3\nhorizon = 20.0\ntrajectories = 100\n",
    );
    let start = Instant::now();
    let out = run("stationary-stats", &cfg, &tmp.path().join("o"), &[]);
    let secs = start.elapsed().as_secs_f64();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(secs < 60.0, "{secs}s");
    let report = read_json(&tmp.path().join("o/report.json"));
    assert_eq!(report["result"]["final_states"], 100);
}

#[test]
fn verify_commands_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("verify-eigen-norms", "[eigen]\nns = [16, 32, 64]\n", "eigen_norms.csv"),
        ("verify-product-norms", "[product]\nns = [8, 16, 32]\nms = [3]\n", "product_norms.csv"),
        ("verify-multilinear", "[multilinear]\nscales = [2, 4]\ndraws = 2\n", "multilinear.csv"),
        ("verify-radial-sobolev", "dim = 32\n[radial_sobolev]\nsamples = 20\n", "report.json"),
    ];
    for (command, body, artifact) in cases {
        let cfg = write_config(tmp.path(), &format!("command = \"{command}\"\n{body}"));
        let out_dir = tmp.path().join(command);
        let out = run(command, &cfg, &out_dir, &[]);
        assert!(out.status.success(), "{command}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join(artifact).exists(), "{command}");
    }
}
