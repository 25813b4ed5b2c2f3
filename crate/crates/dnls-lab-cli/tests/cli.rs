//! End-to-end tests of the `dnls-lab` binary: exit codes, registry coverage,
//! and the determinism contract (same seed => byte-identical artifacts,
//! independent of thread count).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dnls-lab"))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dnls-lab-cli-test-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_config(config: &Path, extra: &[&str], out: &Path) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .args(extra)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn list_covers_every_config() {
    let out = bin().args(["run", "--list"]).output().unwrap();
    assert!(out.status.success());
    let listing = String::from_utf8(out.stdout).unwrap();
    let configs = repo_root().join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        seen += 1;
        let text = fs::read_to_string(&path).unwrap();
        let table: toml::Table = text.parse().unwrap();
        let id = table["experiment"].as_str().unwrap();
        assert!(
            listing.contains(id),
            "config {} names unregistered experiment `{id}`",
            path.display()
        );
    }
    assert!(seen >= 12, "expected at least 12 configs, found {seen}");
}

#[test]
fn same_seed_gives_byte_identical_artifacts() {
    let config = repo_root().join("configs/density_decay.toml");
    let out_a = tmp_dir("det-a");
    let out_b = tmp_dir("det-b");
    assert!(run_config(&config, &[], &out_a).status.success());
    assert!(run_config(&config, &[], &out_b).status.success());
    for name in ["density_decay.json", "density_decay.csv"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tmp_dir("threads");
    fs::write(
        dir.join("cfg.toml"),
        "experiment = \"sampler_moments\"\nseed = 9\n[params]\nn_max = 32\nsamples = 20000\nmoment_samples = 20000\nfreqs = [0, 3]\n",
    )
    .unwrap();
    let out_1 = tmp_dir("threads-1");
    let out_2 = tmp_dir("threads-2");
    assert!(run_config(&dir.join("cfg.toml"), &["--threads", "1"], &out_1)
        .status
        .success());
    assert!(run_config(&dir.join("cfg.toml"), &["--threads", "2"], &out_2)
        .status
        .success());
    for name in ["sampler_moments.json", "sampler_moments.csv"] {
        let a = fs::read(out_1.join(name)).unwrap();
        let b = fs::read(out_2.join(name)).unwrap();
        assert_eq!(a, b, "{name} depends on thread count");
    }
}

#[test]
fn seed_flag_overrides_config_and_changes_output() {
    let config = repo_root().join("configs/chaos_decay.toml");
    let out_a = tmp_dir("seed-a");
    let out_b = tmp_dir("seed-b");
    assert!(run_config(&config, &["--seed", "11"], &out_a).status.success());
    assert!(run_config(&config, &["--seed", "12"], &out_b).status.success());
    let a = fs::read_to_string(out_a.join("chaos_decay.json")).unwrap();
    let b = fs::read_to_string(out_b.join("chaos_decay.json")).unwrap();
    assert!(a.contains("\"seed\": 11"));
    assert!(b.contains("\"seed\": 12"));
    assert_ne!(a, b);
}

#[test]
fn artifact_embeds_config_and_content_hash() {
    let config = repo_root().join("configs/density_decay.toml");
    let out = tmp_dir("hash");
    assert!(run_config(&config, &[], &out).status.success());
    let text = fs::read_to_string(out.join("density_decay.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["experiment"], "density_decay");
    assert!(v["config"]["params"]["n_values"].is_array());
    let hash = v["content_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    // the CSV carries the same hash, tying the two artifacts together
    let csv = fs::read_to_string(out.join("density_decay.csv")).unwrap();
    assert!(csv.contains(hash));
}

#[test]
fn env_var_sets_default_output_dir() {
    let out = tmp_dir("env");
    let config = repo_root().join("configs/density_decay.toml");
    let status = bin()
        .arg("run")
        .arg(&config)
        .env("DNLS_LAB_OUT", &out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("density_decay.json").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tmp_dir("errs");
    let cases: &[(&str, &str)] = &[
        ("missing.toml", ""), // file written below per case
        ("unknown_experiment.toml", "experiment = \"no_such_thing\"\n"),
        ("bad_param.toml", "experiment = \"density_decay\"\n[params]\nn_values = [0]\n"),
        (
            "unknown_param.toml",
            "experiment = \"density_decay\"\n[params]\nnvalues = [2, 4]\n",
        ),
        ("not_toml.toml", "experiment = [unclosed\n"),
        ("bad_top_key.toml", "experiment = \"density_decay\"\nthreads = 4\n"),
    ];
    for (name, body) in cases {
        let path = dir.join(name);
        if !body.is_empty() {
            fs::write(&path, body).unwrap();
        }
        let out = run_config(&path, &[], &dir.join("out"));
        assert_eq!(
            out.status.code(),
            Some(2),
            "{name}: expected exit 2, stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = bin().args(["suite", "weekly"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_assertion_exits_1() {
    // an impossible tolerance regime: density_decay with a single N cannot
    // fail, so instead demand decay ratios from non-consecutive frequencies
    let dir = tmp_dir("fail");
    fs::write(
        dir.join("cfg.toml"),
        "experiment = \"density_decay\"\n[params]\nn_values = [2, 64]\n",
    )
    .unwrap();
    let out = run_config(&dir.join("cfg.toml"), &[], &dir.join("out"));
    assert_eq!(
        out.status.code(),
        Some(1),
        "stdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    // the artifact is still written, with verdict = fail
    let text = fs::read_to_string(dir.join("out/density_decay.json")).unwrap();
    assert!(text.contains("\"verdict\": \"fail\""));
}
