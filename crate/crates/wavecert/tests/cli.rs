//! End-to-end checks of the command line binary: output shapes, bundled
//! presets, override precedence, run manifests, determinism, exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn wavecert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavecert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn decay_reports_the_full_mode_reference_rate() {
    let out = wavecert(&[
        "decay", "--set", "c1=1", "--set", "g=3", "--set", "c2=1", "--set", "h=0.9", "--set",
        "q=5", "--set", "mode=full",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["mode"], "full");
    assert_eq!(v["feasible"], true);
    let alpha = v["alpha_star"].as_f64().unwrap();
    assert!(
        (alpha - 0.157).abs() < 5e-3,
        "alpha_star = {alpha}, expected 0.157 +- 5e-3"
    );
    // The reported alpha field carries the certified rate itself.
    assert_eq!(v["alpha"], v["alpha_star"]);
}

#[test]
fn certify_accepts_presets_with_overrides() {
    let out = wavecert(&["certify", "--config", "@antistable_q0", "--set", "alpha=0.1"]);
    let v = stdout_json(&out);
    assert_eq!(v["alpha"].as_f64().unwrap(), 0.1);
    assert_eq!(v["feasible"], true);
    assert_eq!(v["mode"], "reduced");
    let s = v["S"].as_array().unwrap();
    assert_eq!(s.len(), 4);
    assert!(s.iter().all(|x| x.as_f64().unwrap() > 0.0));
}

#[test]
fn certify_emits_key_value_csv_on_request() {
    let out = wavecert(&[
        "certify", "--config", "@antistable_q0", "--set", "alpha=0.1", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("key,value"));
    assert!(text.lines().any(|l| l == "feasible,true"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("margin,-")), "{text}");
}

#[test]
fn chart_output_is_deterministic() {
    let args = [
        "chart", "--set", "cg_min=-1.5", "--set", "cg_max=1.5", "--set", "ch_min=-1.5",
        "--set", "ch_max=1.5", "--set", "resolution=31",
    ];
    let a = wavecert(&args);
    let b = wavecert(&args);
    assert!(a.status.success() && b.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout, "two identical runs diverged");

    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("cg,ch,stable,delta_product"));
    assert_eq!(text.lines().count(), 1 + 31 * 31);
}

#[test]
fn simulate_writes_manifest_and_declared_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = wavecert(&[
        "simulate",
        "--config",
        "@antistable_q0",
        "--set",
        "T=2",
        "--set",
        "N=60",
        "--set",
        "snapshots=2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["verb"], "simulate");
    assert_eq!(manifest["config"]["T"], "2");
    assert_eq!(manifest["config"]["c1"], "1");
    let overrides: Vec<&str> = manifest["overrides"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(overrides, ["T=2", "N=60", "snapshots=2"]);
    assert!(manifest.get("timestamp").is_none());

    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for name in outputs {
        let p: &Path = &dir.path().join(name.as_str().unwrap());
        assert!(p.is_file(), "declared output {p:?} missing");
    }
    for required in ["trace.csv", "sim.json", "snapshot_0.csv", "snapshot_1.csv"] {
        assert!(
            outputs.iter().any(|n| n == required),
            "{required} not declared in {outputs:?}"
        );
    }

    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(
        trace.lines().next(),
        Some("t,seminorm_H,norm_H0,u0,w,y,v1")
    );
    let snap = std::fs::read_to_string(dir.path().join("snapshot_0.csv")).unwrap();
    assert_eq!(snap.lines().next(), Some("x,u,u_t,v,v_t"));
}

#[test]
fn robust_preset_certifies_and_records_the_implication() {
    let out = wavecert(&["robust", "--config", "@robust_band"]);
    let v = stdout_json(&out);
    assert_eq!(v["feasible"], true);
    let dm = v["worst"]["delta_max"].as_f64().unwrap();
    assert!((dm - 2.286_770_747_740_345).abs() < 1e-12);
    assert_eq!(v["implication"]["all_hold"], true);
    assert_eq!(v["implication"]["samples"], 50);
}

#[test]
fn spectrum_closed_form_lines_up_with_the_reference_rate() {
    let args = [
        "spectrum", "--set", "c1=1", "--set", "g=-0.27", "--set", "h=0.6", "--set", "q=0",
    ];
    let out = wavecert(&args);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re,im"));
    let mut count = 0;
    for line in lines {
        let re: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!((re + 0.208_141_678_952_422_6).abs() < 1e-12, "{line}");
        count += 1;
    }
    assert_eq!(count, 7);

    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let v = stdout_json(&wavecert(&json_args));
    assert_eq!(v["method"], "closed_form");
    assert_eq!(v["count"], 7);
}

#[test]
fn unknown_keys_and_subcommands_are_rejected() {
    let out = wavecert(&["certify", "--set", "c1=1", "--set", "bogus_key=3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus_key"), "stderr: {err}");

    let out = wavecert(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));

    let out = wavecert(&["certify", "--config", "@no_such_preset"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no_such_preset"), "stderr: {err}");

    let out = wavecert(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for verb in ["certify", "decay", "robust", "chart", "simulate", "spectrum", "compare"] {
        assert!(text.contains(verb), "help lost the {verb} verb");
    }
}

#[test]
fn reproduce_passes_every_claim() {
    let dir = tempfile::tempdir().unwrap();
    let out = wavecert(&["reproduce", "--out", dir.path().to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "exit {:?}:\n{text}",
        out.status.code()
    );
    assert!(!text.contains("FAIL"), "{text}");
    assert_eq!(text.matches("PASS ").count(), 16, "{text}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("reproduce.json")).unwrap())
            .unwrap();
    assert_eq!(report["failed"], 0);
    assert_eq!(report["claims"].as_array().unwrap().len(), 16);
}
