use std::path::Path;
use std::process::{Command, Output};

use hadamard_langevin::harness::{self, Preset};

fn sampler() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sampler"));
    cmd.env_remove(harness::OUT_DIR_ENV);
    cmd
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SMALL: &str = "preset = \"custom\"\nn_burn = 20\nn_samples = 50\nsamplers = [\"hadamard\", \"gibbs\"]\noutput.write_samples = true\n";

fn summary_without_run_info(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("summary.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("run_info");
    v
}

#[test]
fn presets_lists_every_preset() {
    let out = sampler().arg("presets").output().unwrap();
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for p in Preset::ALL {
        assert!(text.lines().any(|l| l.starts_with(p.name())), "missing {}", p.name());
    }
}

#[test]
fn validate_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), "good.toml", SMALL);
    assert_eq!(code(&sampler().args(["validate", "--config"]).arg(&good).output().unwrap()), 0);

    let unknown = write_config(tmp.path(), "unknown.toml", "preset = \"custom\"\nn_sample = 3\n");
    let out = sampler().args(["validate", "--config"]).arg(&unknown).output().unwrap();
    assert_eq!(code(&out), 2);

    let invalid = write_config(tmp.path(), "invalid.toml", "preset = \"custom\"\nmodel.lambda = -1.0\n");
    let out = sampler().args(["validate", "--config"]).arg(&invalid).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.lambda"));

    let missing = tmp.path().join("absent.toml");
    assert_eq!(code(&sampler().args(["validate", "--config"]).arg(&missing).output().unwrap()), 2);
}

#[test]
fn run_writes_provenance_and_round_trip_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out_dir = tmp.path().join("out");
    let out = sampler().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let summary = summary_without_run_info(&out_dir);
    let hash = summary["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(summary["library_version"], hadamard_langevin::VERSION);

    let mut csvs = 0;
    for entry in std::fs::read_dir(&out_dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        csvs += 1;
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            format!("# config_hash={hash} library_version={}", hadamard_langevin::VERSION)
        );
        assert_eq!(lines.next().unwrap(), "x0");
        let mut rows = 0;
        for line in lines {
            let v: f64 = line.parse().unwrap();
            assert_eq!(v.to_string(), line);
            rows += 1;
        }
        assert_eq!(rows, 50);
    }
    assert_eq!(csvs, 2);
}

#[test]
fn identical_seeds_give_identical_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let run = |name: &str, seed: &str, workers: &str| {
        let dir = tmp.path().join(name);
        let out = sampler()
            .args(["run", "--config"])
            .arg(&cfg)
            .args(["--seed", seed, "--workers", workers, "--out"])
            .arg(&dir)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0);
        summary_without_run_info(&dir)
    };
    let a = run("a", "7", "1");
    let b = run("b", "7", "2");
    let c = run("c", "8", "1");
    assert_eq!(a, b);
    assert_ne!(a["config_hash"], c["config_hash"]);
    assert_ne!(a["samplers"], c["samplers"]);
}

#[test]
fn output_dir_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let from_env = tmp.path().join("env");
    let explicit = tmp.path().join("explicit");

    let out = sampler()
        .args(["run", "--config"])
        .arg(&cfg)
        .env(harness::OUT_DIR_ENV, &from_env)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(from_env.join("summary.json").exists());

    let out = sampler()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&explicit)
        .env(harness::OUT_DIR_ENV, tmp.path().join("ignored"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(explicit.join("summary.json").exists());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn failing_job_exits_one_and_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "diverge.toml",
        "preset = \"custom\"\nsamplers = [\"myula\"]\nmyula.dt = 50.0\nmyula.gamma = 1.0\nn_burn = 1000\nn_samples = 10\n",
    );
    let dir = tmp.path().join("out");
    let out = sampler().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(code(&out), 1);
    let summary = summary_without_run_info(&dir);
    let failures = summary["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert!(failures[0]["error"].as_str().unwrap().contains("non-finite"));
}

#[test]
fn zero_workers_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = sampler().args(["run", "--config"]).arg(&cfg).args(["--workers", "0"]).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn rate_table_has_one_row_per_step_size() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "rate.toml",
        "preset = \"rate_1d\"\nn_chains = 2\nn_samples = 200\nsweep.dt = [0.1, 0.05, 0.025]\nsweep.burn_time = 10.0\n",
    );
    let dir = tmp.path().join("out");
    let out = sampler().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.join("rate_1d.csv")).unwrap();
    let mut lines = text.lines().skip(1);
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let dt_col = header.iter().position(|h| *h == "dt").unwrap();
    let err_col = header.iter().position(|h| *h == "abs_error").unwrap();
    let sampler_col = header.iter().position(|h| *h == "sampler").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    for name in ["hadamard", "myula"] {
        let mine: Vec<&Vec<&str>> = rows.iter().filter(|r| r[sampler_col] == name).collect();
        let dts: Vec<f64> = mine.iter().map(|r| r[dt_col].parse().unwrap()).collect();
        assert_eq!(dts, vec![0.1, 0.05, 0.025]);
        for r in mine {
            let e: f64 = r[err_col].parse().unwrap();
            assert!(e.is_finite() && e >= 0.0);
        }
    }
}
