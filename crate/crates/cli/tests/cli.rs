use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ksi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksi"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gaussian_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"{{
        "target": {{"gaussian": {{"mean": [1, -1], "covariance": [[1, 0.3], [0.3, 0.5]]}}}},
        "features": {{"type": "concat", "maps": ["linear", "monomials", "radial_quadratic"]}},
        "schedule": "trig",
        "steps": 100,
        "samples": 5000,
        "seed": 7{extra}
    }}"#
    );
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fit_generate_eval_round() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = gaussian_config(
        tmp.path(),
        r#", "generate": {"num_samples": 1000}, "metrics": ["mmd", "moments"]"#,
    );
    let cfg = cfg.to_str().unwrap();

    let a = ksi(&["fit", "--config", cfg, "--out", "run"], tmp.path());
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert!(stdout(&a).contains("eigenvalue ratio"));
    let table = fs::read(tmp.path().join("run/table.ksid")).unwrap();
    let decoded = ksi_core::io::decode_table(&table).unwrap();
    assert_eq!(decoded.etas.nrows(), 100);

    let b = ksi(&["fit", "--config", cfg, "--out", "again"], tmp.path());
    assert_eq!(code(&b), 0);
    assert_eq!(table, fs::read(tmp.path().join("again/table.ksid")).unwrap());

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/fit_manifest.json")).unwrap()).unwrap();
    assert_eq!(
        manifest["outputs"]["table.ksid"].as_str().unwrap(),
        ksi_cli::sha256_hex(&table)
    );
    assert_eq!(manifest["seed"], 7);

    let g = ksi(&["generate", "--config", cfg, "--out", "run"], tmp.path());
    assert_eq!(code(&g), 0, "{}", stderr(&g));
    let rows = csv_rows(&tmp.path().join("run/samples.csv"));
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r.len() == 2 && r.iter().all(|v| v.is_finite())));

    let e = ksi(&["eval", "--config", cfg, "--out", "run"], tmp.path());
    assert_eq!(code(&e), 0, "{}", stderr(&e));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("run/report.json")).unwrap()).unwrap();
    for (name, m) in report["metrics"].as_object().unwrap() {
        let z = m["value"].as_f64().unwrap() / m["std_error"].as_f64().unwrap();
        assert!(z.abs() < 5.0, "{name}: z = {z}");
    }
    assert!(report["metrics"].get("mmd2").is_some());
}

#[test]
fn zero_diffusion_uses_same_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = gaussian_config(tmp.path(), r#", "generate": {"num_samples": 200, "diffusion": "zero"}"#);
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&ksi(&["fit", "--config", cfg, "--out", "r"], tmp.path())), 0);
    let g = ksi(&["generate", "--config", cfg, "--out", "r"], tmp.path());
    assert_eq!(code(&g), 0, "{}", stderr(&g));
    assert!(stdout(&g).contains("zero diffusion"));
    assert_eq!(csv_rows(&tmp.path().join("r/samples.csv")).len(), 200);
}

#[test]
fn schedule_mismatch_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = gaussian_config(tmp.path(), "");
    assert_eq!(
        code(&ksi(
            &["fit", "--config", cfg.to_str().unwrap(), "--out", "r"],
            tmp.path()
        )),
        0
    );
    let text = fs::read_to_string(&cfg).unwrap().replace(r#""trig""#, r#""linear""#);
    let other = tmp.path().join("linear.json");
    fs::write(&other, text).unwrap();
    let table = tmp.path().join("r/table.ksid");
    let g = ksi(
        &[
            "generate",
            "--config",
            other.to_str().unwrap(),
            "--table",
            table.to_str().unwrap(),
            "--out",
            "r2",
        ],
        tmp.path(),
    );
    assert_eq!(code(&g), 2);
    let err = stderr(&g);
    assert!(err.contains("trig") && err.contains("linear"), "{err}");
}

#[test]
fn rank_deficient_fit_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = gaussian_config(tmp.path(), r#", "ridge": 0"#);
    let text = fs::read_to_string(&cfg).unwrap().replace(
        r#"["linear", "monomials", "radial_quadratic"]"#,
        r#"["linear", "linear"]"#,
    );
    fs::write(&cfg, text).unwrap();
    let o = ksi(&["fit", "--config", cfg.to_str().unwrap(), "--out", "r"], tmp.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("k=0"), "{}", stderr(&o));
    assert!(!tmp.path().join("r/table.ksid").exists());
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = gaussian_config(tmp.path(), "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace(r#""steps": 100"#, r#""steps": 0"#);
    fs::write(&cfg, text).unwrap();
    let o = ksi(&["fit", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/steps"), "{}", stderr(&o));

    let o = ksi(&["fit"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = ksi(&["fit", "--config", "missing.json"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = ksi(&["preset", "ensemble", "--threads", "0"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn eval_rejects_bad_metric_requests() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = gaussian_config(tmp.path(), "");
    let cfg = cfg.to_str().unwrap();
    fs::write(tmp.path().join("s.csv"), "1.0,2.0\n0.5,-1.0\n0.1,0.2\n").unwrap();

    let o = ksi(
        &["eval", "--config", cfg, "--samples", "s.csv", "--out", "r"],
        tmp.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no metrics"), "{}", stderr(&o));

    let o = ksi(
        &[
            "eval",
            "--config",
            cfg,
            "--samples",
            "s.csv",
            "--metrics",
            "leverage",
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("series"), "{}", stderr(&o));

    let o = ksi(
        &[
            "eval",
            "--config",
            cfg,
            "--samples",
            "s.csv",
            "--metrics",
            "entropy",
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn series_eval_writes_plot_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("series.json");
    fs::write(
        &cfg,
        r#"{
        "target": {"cascade": {"length": 64}},
        "features": {"type": "concat", "maps": [{"type": "haar_scatter", "levels": 3}, {"type": "lag_cross", "lags": 2}]},
        "schedule": "trig",
        "steps": 50,
        "samples": 64,
        "series": true,
        "generate": {"num_samples": 20},
        "metrics": ["leverage", "histogram", "mmd"],
        "eval": {"reference_samples": 20, "bins": 10, "max_lag": 3}
    }"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    for cmd in ["fit", "generate", "eval"] {
        let o = ksi(&[cmd, "--config", cfg, "--out", "r"], tmp.path());
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    let lev = fs::read_to_string(tmp.path().join("r/leverage.csv")).unwrap();
    assert_eq!(lev.lines().count(), 1 + 7);
    let hist = fs::read_to_string(tmp.path().join("r/histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 1 + 10);
}

#[test]
fn default_run_directory_is_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = gaussian_config(tmp.path(), "");
    let o = ksi(&["fit", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let runs: Vec<_> = fs::read_dir(tmp.path().join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(runs.len(), 1);
    assert!(runs[0].join("table.ksid").exists());
    let o = ksi(&["fit", "--config", cfg.to_str().unwrap(), "--seed", "8"], tmp.path());
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_dir(tmp.path().join("runs")).unwrap().count(), 2);
}

#[test]
fn unknown_preset_lists_names() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ksi(&["preset", "mnist"], tmp.path());
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    for name in ["gauss2d", "series1d", "ensemble"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn ensemble_preset_prints_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ksi(&["preset", "ensemble", "--out", "e", "--threads", "2"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("combined"));
    assert!(!out.contains("FAIL"));
    let rows = fs::read_to_string(tmp.path().join("e/ensemble.csv")).unwrap();
    for line in rows.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let best = v[1].min(v[2]).min(v[3]);
        assert!(v[4] <= best + 1e-6, "{line}");
    }
}

#[test]
fn series_preset_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = ksi(&["preset", "series1d", "--out", "a", "--seed", "0"], tmp.path());
    let b = ksi(&["preset", "series1d", "--out", "b", "--seed", "0"], tmp.path());
    assert_eq!(code(&a), code(&b));
    assert!(code(&a) == 0 || code(&a) == 1, "{}", stderr(&a));
    for f in ["density.csv", "leverage.csv", "samples.csv", "report.json"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}
