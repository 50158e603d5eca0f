use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn machine_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default_machine.toml")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "machine_config = {:?}\n{body}",
        machine_config().display().to_string()
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmsm-uq"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn printed_hash(stdout: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("config_hash "))
        .expect("hash line")
        .to_string()
}

#[test]
fn help_lists_every_flag() {
    let help = ok(&cli(&["--help"]));
    for flag in [
        "--config",
        "--mode",
        "--seed",
        "--jobs",
        "--out",
        "--resume",
        "--refinement",
    ] {
        assert!(help.contains(flag), "{flag} missing from\n{help}");
    }
}

#[test]
fn nominal_run_writes_hashed_csvs_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "mode = \"nominal\"\n");
    let out = tmp.path().join("out");
    let stdout = ok(&cli(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let hash = printed_hash(&stdout);
    assert_eq!(hash.len(), 64);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], hash.as_str());
    let outputs = manifest["outputs"].as_array().unwrap();
    let names: Vec<&str> = outputs
        .iter()
        .map(|o| o["file"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["trace.csv", "spectrum.csv", "summary.csv"]);
    for o in outputs {
        let bytes = std::fs::read(out.join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"], hex::encode(Sha256::digest(&bytes)).as_str());
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            format!("# config_hash: {hash}")
        );
    }

    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let value = |key: &str| -> f64 {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key},")))
            .unwrap()
            .parse()
            .unwrap()
    };
    let tau = value("mean_torque");
    assert!(tau > 0.0);
    assert!((value("maxwell_band_torque") - tau).abs() <= 0.05 * tau);
    assert!(value("thd") > 0.0);

    let progress = std::fs::read_to_string(out.join("progress.jsonl")).unwrap();
    let events: Vec<serde_json::Value> = progress
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(events.first().unwrap()["event"], "start");
    assert_eq!(events.last().unwrap()["event"], "done");
}

#[test]
fn refinement_override_changes_the_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "mode = \"nominal\"\n");
    let cfg = config.to_str().unwrap();
    let a = printed_hash(&ok(&cli(&[
        "--config",
        cfg,
        "--out",
        tmp.path().join("a").to_str().unwrap(),
    ])));
    let b = printed_hash(&ok(&cli(&[
        "--config",
        cfg,
        "--out",
        tmp.path().join("b").to_str().unwrap(),
    ])));
    assert_eq!(a, b);
    let c = printed_hash(&ok(&cli(&[
        "--config",
        cfg,
        "--refinement",
        "1",
        "--out",
        tmp.path().join("c").to_str().unwrap(),
    ])));
    assert_ne!(a, c);
}

#[test]
fn resumed_monte_carlo_replays_the_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "seed = 5\n\n[uq]\nsamples = 4\n");
    let out = tmp.path().join("mc");
    let args = [
        "--config",
        config.to_str().unwrap(),
        "--mode",
        "uq-mc",
        "--out",
        out.to_str().unwrap(),
    ];
    let first = ok(&cli(&args));
    let samples = std::fs::read(out.join("samples.csv")).unwrap();
    let summary = std::fs::read(out.join("summary.csv")).unwrap();

    let mut resumed = args.to_vec();
    resumed.push("--resume");
    let second = ok(&cli(&resumed));
    assert_eq!(printed_hash(&first), printed_hash(&second));
    assert_eq!(std::fs::read(out.join("samples.csv")).unwrap(), samples);
    assert_eq!(std::fs::read(out.join("summary.csv")).unwrap(), summary);
    let progress = std::fs::read_to_string(out.join("progress.jsonl")).unwrap();
    let cached = progress
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|e| e["event"] == "sample")
        .map(|e| e["cached"].as_bool().unwrap())
        .collect::<Vec<_>>();
    assert_eq!(cached, vec![true; 4]);
}

#[test]
fn stochastic_mode_without_seed_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "");
    let out = cli(&[
        "--config",
        config.to_str().unwrap(),
        "--mode",
        "uq-mc",
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_mode_and_missing_config_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "");
    assert!(
        !cli(&["--config", config.to_str().unwrap(), "--mode", "fast"])
            .status
            .success()
    );
    let x = tmp.path().join("x");
    let missing = cli(&[
        "--config",
        tmp.path().join("nope.toml").to_str().unwrap(),
        "--out",
        x.to_str().unwrap(),
    ]);
    assert!(!missing.status.success());
    assert!(!x.exists());
}
