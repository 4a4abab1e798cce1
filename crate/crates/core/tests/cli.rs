use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const QUICK: &str = "master_seed = 7

[dictionary]
iterations = 3

[classify]
m_sweep = [20]
trials = 1

[support]
m_sweep = [20]
trials = 1

[bounce]
m_values = [25]

[localize]
m_sweep = [25]
trials = 2

[adapt]
schedule = [5, 20]
";

fn spts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spts")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run_ok(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = spts(&args);
    assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty(), "diagnostics belong on stderr");
}

#[test]
fn every_command_writes_its_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("out");
    run_ok("dict-train", &cfg, &out, &["--jobs", "2"]);
    for cmd in ["classify-sweep", "support-sweep", "bounce", "localize", "adapt"] {
        run_ok(cmd, &cfg, &out, &[]);
        assert!(out.join(format!("{cmd}.manifest.json")).exists());
    }
    for f in [
        "dictionary.spts",
        "train_log.csv",
        "classify.csv",
        "classify_summary.json",
        "support.csv",
        "bounce_trace_m025.csv",
        "localize_summary.csv",
        "adapt_m005.jsonl",
        "adapt_m020.jsonl",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let csv = std::fs::read_to_string(out.join("support.csv")).unwrap();
    // header plus one row per (M, object, trial)
    assert_eq!(csv.lines().count(), 1 + 17);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("out");
    run_ok("dict-train", &cfg, &out, &["--seed", "99"]);
    run_ok("bounce", &cfg, &out, &["--seed", "99"]);
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("bounce.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["master_seed"], 99);
    assert_eq!(m["command"], "bounce");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let missing = spts(&["bounce", "--config", "/definitely/not/here.toml", "--out", out]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());

    let unknown = write_config(dir.path(), "master_seed = 1\nbogus = 3\n");
    let o = spts(&["bounce", "--config", unknown.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let no_seed = write_config(dir.path(), "[classify]\ntrials = 2\n");
    let o = spts(&["bounce", "--config", no_seed.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let big_m = write_config(dir.path(), "master_seed = 1\n[localize]\nm_sweep = [101]\n");
    let o = spts(&["localize", "--config", big_m.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    // no dictionary trained yet
    let cfg = write_config(dir.path(), QUICK);
    let o = spts(&["classify-sweep", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dict-train"));

    let o = spts(&["bounce", "--config", cfg.to_str().unwrap(), "--out", out, "--jobs", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_rejected() {
    let o = spts(&["nonsense"]);
    assert!(!o.status.success());
}
