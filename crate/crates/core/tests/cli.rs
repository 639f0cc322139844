use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use heatadapt::cli::{read_trace, RunManifest, EXIT_BLOW_UP, EXIT_CFL, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE};

fn heatadapt(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatadapt"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HEATADAPT_OUT")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn manifest(dir: &Path) -> RunManifest {
    RunManifest::from_json(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cases: [(&[&str], i32); 5] = [
        (&["simulate", "--t-final", "0.1", "--out", "ok"], EXIT_OK),
        (&["simulate", "--dt", "0.0005", "--dx", "0.02", "--out", "cfl"], EXIT_CFL),
        (&["simulate", "--no-such-flag"], EXIT_USAGE),
        (&["simulate", "--scenario", "open-loop", "--t-final", "10", "--out", "boom"], EXIT_BLOW_UP),
        (&["simulate", "--t-final", "2", "--require-converged", "--out", "early"], EXIT_NOT_CONVERGED),
    ];
    for (args, expected) in cases {
        let out = heatadapt(args, d);
        assert_eq!(code(&out), expected, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(!d.join("cfl").join("trace.csv").exists());
    assert!(d.join("boom").join("trace.csv").exists());
}

#[test]
fn manifest_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = heatadapt(&["simulate", "--t-final", "0.2", "--out", "run"], tmp.path());
    assert_eq!(code(&out), EXIT_OK);
    let text = fs::read_to_string(tmp.path().join("run/manifest.json")).unwrap();
    let m = RunManifest::from_json(&text).unwrap();
    assert_eq!(m.to_json().unwrap() + "\n", text);
    assert!(m.files.iter().all(|f| f.exists() || tmp.path().join(f).exists()));
}

#[test]
fn snapshots_only_when_requested() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&heatadapt(&["simulate", "--t-final", "0.1", "--snapshot-stride", "0", "--out", "a"], d)), 0);
    assert!(!d.join("a/snapshots.csv").exists());
    assert_eq!(code(&heatadapt(&["simulate", "--t-final", "0.1", "--snapshot-stride", "500", "--out", "b"], d)), 0);
    let text = fs::read_to_string(d.join("b/snapshots.csv")).unwrap();
    assert!(text.starts_with("t,x,w,what\n"));
    // t = 0, 0.05, 0.1 on 51 nodes
    assert_eq!(text.lines().count(), 1 + 3 * 51);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("run.cfg"), "# short run\nc0 = 7\nt_final = 0.1\nsample-stride = 50\n").unwrap();
    let out = heatadapt(&["simulate", "--config", "run.cfg", "--c0", "3", "--out", "run"], d);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&d.join("run"));
    assert_eq!(m.params.c0(), 3.0);
    assert_eq!(m.config.t_final, 0.1);
    assert_eq!(m.config.sample_stride, 50);

    fs::write(d.join("bad.cfg"), "gain = 2\n").unwrap();
    assert_eq!(code(&heatadapt(&["simulate", "--config", "bad.cfg"], d)), EXIT_USAGE);
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_heatadapt"))
        .args(["simulate", "--t-final", "0.1"])
        .current_dir(tmp.path())
        .env("HEATADAPT_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&out), EXIT_OK);
    assert!(tmp.path().join("from-env/trace.csv").exists());
    assert!(!tmp.path().join("heatadapt-out").exists());
}

#[test]
fn analyze_reads_a_finished_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&heatadapt(&["simulate", "--t-final", "3", "--out", "run"], d)), EXIT_OK);
    let out = heatadapt(&["analyze", "--out", "run"], d);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("run/analysis.json")).unwrap()).unwrap();
    assert_eq!(report["samples"], 301);
    assert!(report["limits"]["quantities"].as_array().unwrap().len() >= 2);

    assert_eq!(code(&heatadapt(&["analyze", "--out", "missing"], d)), 1);
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = heatadapt(&["sweep", "--vary", "c0=1,2.5,4", "--t-final", "0.1", "--out", "sw"], d);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    for (dir, c0) in [("c0=1", 1.0), ("c0=2.5", 2.5), ("c0=4", 4.0)] {
        assert_eq!(manifest(&d.join("sw").join(dir)).params.c0(), c0);
    }
    assert!(d.join("sw/sweep.json").exists());
    assert_eq!(code(&heatadapt(&["sweep", "--vary", "nonsense=1"], d)), EXIT_USAGE);
}

#[test]
fn default_stabilization_settles() {
    let tmp = tempfile::tempdir().unwrap();
    let out = heatadapt(&["simulate", "--out", "run"], tmp.path());
    assert_eq!(code(&out), EXIT_OK);
    let samples = read_trace(&tmp.path().join("run/trace.csv")).unwrap();
    let last = samples.last().unwrap();
    assert_eq!(last.t, 5.0);
    assert!(last.wnorm <= 1e-2, "{:.3e}", last.wnorm);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("stabilize "));
}
