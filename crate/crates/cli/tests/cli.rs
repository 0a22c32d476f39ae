use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lidar-retrieve"));
    cmd.args(args).arg("--quiet").arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

const SMALL: &str = r#"{"scenario": {"grid": {"z_min": 119.0, "z_max": 15000.0, "n": 100}}"#;

fn rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn simulate_writes_seeded_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o = run(&["simulate", "--seed", "5"], None, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["truth.csv", "signal_noise_free.csv", "signal_noisy_000.csv", "system_function.csv", "effective_config.json"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 5);
    assert_eq!(rows(&out.join("truth.csv")), 2000);

    let again = dir.path().join("b");
    assert!(run(&["simulate", "--seed", "5"], None, &again).status.success());
    for name in ["signal_noisy_000.csv", "truth.csv", "effective_config.json"] {
        let same = std::fs::read(out.join(name)).unwrap() == std::fs::read(again.join(name)).unwrap();
        assert!(same || name == "effective_config.json", "{name}");
    }
    let other = dir.path().join("c");
    assert!(run(&["simulate", "--seed", "6"], None, &other).status.success());
    assert_ne!(
        std::fs::read(out.join("signal_noisy_000.csv")).unwrap(),
        std::fs::read(other.join("signal_noisy_000.csv")).unwrap()
    );
}

#[test]
fn clear_sky_signal_equals_system_function() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{"scenario": {"grid": {"z_min": 119.0, "z_max": 5000.0, "n": 50},
            "boundary_layer": {"amplitude": 0.0, "scale_height": 1000.0}, "layers": [], "c_mu": 1e10}}"#,
    );
    let out = dir.path().join("o");
    assert!(run(&["simulate"], Some(&config), &out).status.success());
    assert_eq!(
        std::fs::read(out.join("signal_noise_free.csv")).unwrap(),
        std::fs::read(out.join("system_function.csv")).unwrap()
    );
}

#[test]
fn retrieve_fans_out_over_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let config = write_config(dir.path(), "s.json", &format!("{SMALL}, \"snr_multiplier\": 10.0}}"));
    assert!(run(&["simulate"], Some(&config), &sim).status.success());
    let retrieve = write_config(
        dir.path(),
        "r.json",
        &format!(
            r#"{{"inputs": {{"signal": "{}", "system_function": "{}"}},
                "algorithms": [{{"algorithm": "kkt_l2", "gamma": 1e8}}]}}"#,
            sim.join("signal_noisy_000.csv").display(),
            sim.join("system_function.csv").display()
        ),
    );
    let one = dir.path().join("one");
    let o = run(&["retrieve"], Some(&retrieve), &one);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&one.join("estimate_kkt_l2.csv")), 100);
    let diagnostics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(one.join("diagnostics_kkt_l2.json")).unwrap()).unwrap();
    assert_eq!(diagnostics["config"]["gamma"], 1e8);
    assert!(diagnostics["objective_trace"].as_array().unwrap().len() > 1);

    let all = dir.path().join("all");
    let o = run(&["retrieve", "--algorithms", "kkt,kkt_l2,rl,tikhonov,weighted_tikhonov"], Some(&retrieve), &all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let estimates = std::fs::read_dir(&all)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("estimate_"))
        .count();
    assert_eq!(estimates, 5);
    // The configured γ survives the selection.
    let echoed = std::fs::read_to_string(all.join("effective_config.json")).unwrap();
    assert!(echoed.contains("100000000.0"));
}

#[test]
fn all_zero_signal_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let signal = dir.path().join("p.csv");
    let system = dir.path().join("d.csv");
    std::fs::write(&signal, "z_m,value\n100.0,0.0\n200.0,0.0\n300.0,0.0\n").unwrap();
    std::fs::write(&system, "z_m,value\n100.0,1e6\n200.0,1e6\n300.0,1e6\n").unwrap();
    let config = write_config(
        dir.path(),
        "r.json",
        &format!(
            r#"{{"inputs": {{"signal": "{}", "system_function": "{}"}}}}"#,
            signal.display(),
            system.display()
        ),
    );
    let o = run(&["retrieve", "--algorithms", "kkt"], Some(&config), &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(3));
    let message = String::from_utf8_lossy(&o.stderr);
    assert!(message.contains("kkt") && message.contains("truncating trailing zeros"), "{message}");

    std::fs::write(&system, "z_m,value\n100.0,1e6\n250.0,1e6\n300.0,1e6\n").unwrap();
    std::fs::write(&signal, "z_m,value\n100.0,5.0\n200.0,3.0\n300.0,1.0\n").unwrap();
    let o = run(&["retrieve"], Some(&config), &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid mismatch"));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"n_realisations": 3}"#);
    assert_eq!(run(&["simulate"], Some(&bad), &dir.path().join("o")).status.code(), Some(2));
    let gamma = write_config(dir.path(), "g.json", r#"{"algorithms": [{"algorithm": "tikhonov", "gamma": -1.0}]}"#);
    assert_eq!(run(&["simulate"], Some(&gamma), &dir.path().join("o")).status.code(), Some(2));
    assert_eq!(run(&["retrieve"], None, &dir.path().join("o")).status.code(), Some(2));
    assert_eq!(
        run(&["simulate"], Some(&dir.path().join("missing.json")), &dir.path().join("o")).status.code(),
        Some(2)
    );
}

#[test]
fn ensemble_shapes_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "e.json", &format!("{SMALL}, \"n_realizations\": 2}}"));
    let a = dir.path().join("a");
    let o = run(&["ensemble", "--seed", "3"], Some(&config), &a);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for m in ["1", "10", "100"] {
        assert_eq!(rows(&a.join(format!("ensemble_x{m}.csv"))), 5 * 100);
    }
    assert_eq!(rows(&a.join("summary.csv")), 15);
    let b = dir.path().join("b");
    assert!(run(&["ensemble", "--seed", "3"], Some(&config), &b).status.success());
    assert_eq!(std::fs::read(a.join("summary.csv")).unwrap(), std::fs::read(b.join("summary.csv")).unwrap());
}

#[test]
fn scan_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "s.json",
        &format!(r#"{SMALL}, "n_realizations": 3, "scan": {{"algorithm": "kkt", "values": [10.0, 40.0, 160.0]}}}}"#),
    );
    let out = dir.path().join("o");
    let o = run(&["scan"], Some(&config), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    assert!(text.starts_with("parameter,discrepancy\n10.0,"));
    assert_eq!(rows(&out.join("scan.csv")), 3);
    let echoed = std::fs::read_to_string(out.join("effective_config.json")).unwrap();
    assert!(echoed.contains("\"iterations\""));
}

#[test]
fn check_passes_and_detects_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check", "--seed", "4"], None, dir.path());
    assert!(o.status.success());
    let first = String::from_utf8_lossy(&o.stdout).to_string();
    assert_eq!(first.lines().filter(|l| l.starts_with("PASS")).count(), 5);
    let again = run(&["check", "--seed", "4"], None, dir.path());
    assert_eq!(String::from_utf8_lossy(&again.stdout), first);

    let o = run(&["check", "--inject-fault", "gradient-sign"], None, dir.path());
    assert_eq!(o.status.code(), Some(4));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL") && l.contains("gradient")));
}
