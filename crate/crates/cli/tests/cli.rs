use std::path::Path;
use std::process::{Command, Output};

use reprocs_core::io::read_rpca;
use serde_json::Value;

const SMALL: &str = r#"{"schema_version": 1, "scenario": "fig1", "s": 4,
 "model": {"n": 48, "t_max": 240, "r0": 2, "change_times": [20], "c_new": [1], "gamma": 1.0, "ramp": 120},
 "support": {"kind": "example1", "step": 2, "move_every": 8},
 "p0_noise": 1e-9, "alpha": 40, "K": 3}"#;

fn reprocs(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reprocs"))
        .args(args)
        .env("REPROCS_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    std::fs::write(&path, SMALL).unwrap();
    path.display().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = reprocs(
            &["run", "--config", &cfg, "--trials", "3", "--seed", "5", "--out", out.to_str().unwrap()],
            threads,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["reprocs_trial000.csv", "reprocs_trial002.csv", "reprocs_mean.csv", "reprocs_support.svg"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = std::fs::read_to_string(a.join("reprocs_trial000.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,se,x_err,rel_x_err,support_exact,solver_iters");
    assert_eq!(csv.lines().count(), 241);
    let agg = read_json(&a.join("aggregate.json"));
    assert_eq!(agg["reprocs"]["trials"], 3);
    assert!(agg["reprocs"]["support_exact_fraction"].as_f64().unwrap() > 0.95);
    let manifest = read_json(&a.join("manifest.json"));
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["config"]["alpha"], 40);
    assert_eq!(manifest["trial_seeds"].as_array().unwrap().len(), 3);
}

#[test]
fn compare_writes_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("cmp");
    let o = reprocs(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()], "1");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let agg = read_json(&out.join("aggregate.json"));
    assert!(agg["pcp_over_reprocs"].as_f64().unwrap() > 1.0);
    assert!(agg["pcp"]["final_snapshot_mean_rel_x_err"].as_f64().is_some());
    for name in ["compare.svg", "pcp_trial000.csv", "reprocs_errors.svg"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn gen_writes_readable_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("data");
    let o = reprocs(&["gen", "--config", &cfg, "--out", out.to_str().unwrap()], "1");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_rpca(&out.join("trial000/measurements.rpca")).unwrap();
    let x = read_rpca(&out.join("trial000/sparse.rpca")).unwrap();
    let l = read_rpca(&out.join("trial000/low_rank.rpca")).unwrap();
    assert_eq!(m.shape(), (48, 240));
    assert!((&x + &l - &m).amax() < 1e-12);
    // the written config reproduces the run
    let again = dir.path().join("again");
    let cfg2 = out.join("config.json");
    let o = reprocs(&["gen", "--config", cfg2.to_str().unwrap(), "--out", again.to_str().unwrap()], "1");
    assert!(o.status.success());
    assert_eq!(read_rpca(&again.join("trial000/measurements.rpca")).unwrap(), m);
}

#[test]
fn verify_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = reprocs(
        &["verify", "--suite", "all", "--instances", "30", "--out", dir.path().to_str().unwrap()],
        "1",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains(" PASS ")).count(), 5, "{stdout}");
    let report = read_json(&dir.path().join("verify.json"));
    assert_eq!(report["passed"], true);
    let suites = report["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 5);
    assert!(suites.iter().all(|s| s["failures"].as_array().unwrap().is_empty()));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema_version": 1, "scenario": "fig1", "alhpa": 3}"#).unwrap();
    let o = reprocs(&["run", "--config", bad.to_str().unwrap(), "--out", "unused"], "1");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alhpa"));

    let o = reprocs(&["run", "--preset", "fig7"], "1");
    assert_eq!(o.status.code(), Some(2));

    let missing = dir.path().join("nope.json");
    let o = reprocs(&["run", "--config", missing.to_str().unwrap()], "1");
    assert_eq!(o.status.code(), Some(1));

    // output directory path is an existing file
    let cfg = small_config(dir.path());
    let o = reprocs(&["run", "--config", &cfg, "--out", &cfg], "1");
    assert_eq!(o.status.code(), Some(1));
}

fn run_ok(args: &[&str]) {
    let o = reprocs(args, "2");
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn estimates_ignore_corrupted_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let p = |name: &str| dir.path().join(name).display().to_string();
    run_ok(&["gen", "--config", &cfg, "--seed", "3", "--out", &p("data")]);
    run_ok(&["gen", "--config", &cfg, "--seed", "4", "--out", &p("other")]);
    std::fs::create_dir_all(dir.path().join("bad/trial000")).unwrap();
    std::fs::copy(dir.path().join("data/config.json"), dir.path().join("bad/config.json")).unwrap();
    for name in ["measurements.rpca", "p0_hat.rpca", "trial.json"] {
        std::fs::copy(dir.path().join("data/trial000").join(name), dir.path().join("bad/trial000").join(name)).unwrap();
    }
    // truth from an unrelated trial
    for name in ["sparse.rpca", "low_rank.rpca", "basis.rpca", "supports.json"] {
        std::fs::copy(dir.path().join("other/trial000").join(name), dir.path().join("bad/trial000").join(name)).unwrap();
    }
    for data in ["data", "bad"] {
        let out = p(&format!("run_{data}"));
        run_ok(&["run", "--data", &p(data), "--emit", "csv,xhat", "--out", &out]);
    }
    let xhat = |d: &str| std::fs::read(dir.path().join(d).join("reprocs_xhat_trial000.rpca")).unwrap();
    assert_eq!(xhat("run_data"), xhat("run_bad"));
    let metrics = |d: &str| std::fs::read(dir.path().join(d).join("reprocs_trial000.csv")).unwrap();
    assert_ne!(metrics("run_data"), metrics("run_bad"));
    assert!(!dir.path().join("run_data/reprocs_errors.svg").exists());

    // the dataset run matches generating in memory with the same seed
    run_ok(&["run", "--config", &cfg, "--seed", "3", "--emit", "csv", "--out", &p("direct")]);
    assert_eq!(metrics("run_data"), metrics("direct"));
}

#[test]
fn csv_datasets_are_time_major() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let data = dir.path().join("data");
    run_ok(&["gen", "--config", &cfg, "--format", "csv", "--out", data.to_str().unwrap()]);
    let text = std::fs::read_to_string(data.join("trial000/measurements.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("t,m_1,m_2,") && header.ends_with(",m_48"), "{header}");
    assert_eq!(text.lines().count(), 241);
    let first: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(first, 1.0);
    let rpca = dir.path().join("rpca");
    run_ok(&["gen", "--config", &cfg, "--out", rpca.to_str().unwrap()]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["run", "--data", data.to_str().unwrap(), "--emit", "csv", "--out", a.to_str().unwrap()]);
    run_ok(&["run", "--data", rpca.to_str().unwrap(), "--emit", "csv", "--out", b.to_str().unwrap()]);
    assert_eq!(
        std::fs::read(a.join("reprocs_trial000.csv")).unwrap(),
        std::fs::read(b.join("reprocs_trial000.csv")).unwrap()
    );
}

#[test]
fn missing_dataset_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = reprocs(&["run", "--data", dir.path().join("none").to_str().unwrap()], "1");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a dataset"));
}

#[test]
fn zero_length_run_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    std::fs::write(
        &cfg,
        r#"{"schema_version": 1, "scenario": "fig1", "s": 4,
            "model": {"n": 32, "t_max": 0, "r0": 2, "change_times": [], "c_new": []},
            "support": {"kind": "example1", "step": 2, "move_every": 8}, "alpha": 20, "K": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let csv = std::fs::read_to_string(out.join("reprocs_trial000.csv")).unwrap();
    assert_eq!(csv, "t,se,x_err,rel_x_err,support_exact,solver_iters\n");
}

#[test]
fn compare_from_earlier_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let p = |name: &str| dir.path().join(name).display().to_string();
    run_ok(&["run", "--config", &cfg, "--algo", "reprocs", "--out", &p("r")]);
    run_ok(&["run", "--config", &cfg, "--algo", "pcp", "--out", &p("p")]);
    run_ok(&["compare", "--from", &p("r"), &p("p"), "--out", &p("c")]);
    let svg = std::fs::read_to_string(dir.path().join("c/compare.svg")).unwrap();
    assert!(svg.contains(">reprocs<") && svg.contains(">pcp<"));
    let report = read_json(&dir.path().join("c/compare.json"));
    assert!(report["pcp_over_reprocs"].as_f64().unwrap() > 1.0);
    assert_eq!(report["reprocs"]["trials"], 1);

    // one method present: an error unless restricted to it
    let o = reprocs(&["compare", "--from", &p("r"), "--out", &p("c1")], "1");
    assert_eq!(o.status.code(), Some(1));
    run_ok(&["compare", "--from", &p("r"), "--algo", "reprocs", "--out", &p("c2")]);
    let svg = std::fs::read_to_string(dir.path().join("c2/compare.svg")).unwrap();
    assert!(svg.contains(">reprocs<") && !svg.contains(">pcp<"));
}

#[test]
fn flags_override_file_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    let out_file = dir.path().join("from_file");
    let body = SMALL.replacen(
        "{",
        &format!(r#"{{"trials": 2, "seed": 11, "emit": ["json"], "out": {:?},"#, out_file.display().to_string()),
        1,
    );
    std::fs::write(&cfg, body).unwrap();
    run_ok(&["run", "--config", cfg.to_str().unwrap()]);
    let m = read_json(&out_file.join("manifest.json"));
    assert_eq!((m["trials"].as_u64(), m["seed"].as_u64()), (Some(2), Some(11)));
    assert!(!out_file.join("reprocs_trial000.csv").exists());
    assert!(out_file.join("aggregate.json").exists());

    let out = dir.path().join("flags");
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--trials", "1", "--seed", "12", "--out", out.to_str().unwrap()]);
    let m = read_json(&out.join("manifest.json"));
    assert_eq!((m["trials"].as_u64(), m["seed"].as_u64()), (Some(1), Some(12)));
}

#[test]
fn gen_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["gen", "--config", &cfg, "--out", a.to_str().unwrap()]);
    run_ok(&["gen", "--config", &cfg, "--out", b.to_str().unwrap()]);
    for name in ["trial000/measurements.rpca", "trial000/sparse.rpca", "trial000/supports.json", "config.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let ma = read_json(&a.join("manifest.json"));
    assert_eq!(ma["schema_version"], 1);
    assert_eq!(ma["seed"], 1);
}
