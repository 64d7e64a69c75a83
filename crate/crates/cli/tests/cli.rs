use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn olla(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_olla"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const STAR: &str = r#"{
  "problem": {"name": "star"},
  "sampler": {"name": "olla-h", "alpha": 100},
  "chains": 3, "steps": 60, "burn_in": 40, "thin": 10, "base_seed": 7
}"#;

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn run_is_byte_identical_across_repeats_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", STAR);
    let outs: Vec<_> = [("a", "1"), ("b", "1"), ("c", "4")]
        .iter()
        .map(|(name, threads)| {
            let out = tmp.path().join(name);
            let o = olla(&[
                "run",
                &cfg,
                "--out",
                out.to_str().unwrap(),
                "--threads",
                threads,
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            out
        })
        .collect();
    for f in ["samples.csv", "violations.csv"] {
        let first = fs::read(outs[0].join(f)).unwrap();
        for o in &outs[1..] {
            assert_eq!(first, fs::read(o.join(f)).unwrap(), "{f}");
        }
    }
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    assert_eq!(strip(summary(&outs[0])), strip(summary(&outs[2])));

    let samples = fs::read_to_string(outs[0].join("samples.csv")).unwrap();
    let lines: Vec<&str> = samples.lines().collect();
    assert_eq!(lines[0], "chain,step,x0,x1");
    // two retained states per chain, at zero-based steps 49 and 59
    assert_eq!(lines.len(), 1 + 6);
    assert!(
        lines[1].starts_with("0,49,")
            && lines[2].starts_with("0,59,")
            && lines[6].starts_with("2,59,")
    );
    let viol = fs::read_to_string(outs[0].join("violations.csv")).unwrap();
    assert_eq!(viol.lines().count(), 1 + 60);

    let s = summary(&outs[0]);
    assert_eq!(s["retained_samples"], 6);
    assert_eq!(s["all_diverged"], false);
    assert_eq!(s["config"]["sampler"]["probes"], 5);
    assert_eq!(s["config"]["sampler"]["epsilon"], 1.0);
    assert!(s["metrics"]["mean_abs_h"].as_f64().unwrap() >= 0.0);
    assert!(s["version"].as_str().unwrap().starts_with('v'));
}

#[test]
fn seed_override_changes_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", STAR);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(olla(&["run", &cfg, "--out", a.to_str().unwrap()])
        .status
        .success());
    assert!(
        olla(&["run", &cfg, "--out", b.to_str().unwrap(), "--seed", "8"])
            .status
            .success()
    );
    assert_ne!(
        fs::read(a.join("samples.csv")).unwrap(),
        fs::read(b.join("samples.csv")).unwrap()
    );
    assert_eq!(summary(&b)["config"]["base_seed"], 8);
}

#[test]
fn schema_errors_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    for (text, key) in [
        (
            r#"{"problem": {"name": "star"}, "sampler": {"name": "cghmc", "alpha": 1}, "chains": 1, "steps": 5}"#,
            "alpha",
        ),
        (
            r#"{"problem": {"name": "star"}, "sampler": {"name": "olla"}, "chains": 0, "steps": 5}"#,
            "chains",
        ),
        (
            r#"{"problem": {"name": "star"}, "sampler": {"name": "olla"}, "chains": 1, "steps": 5, "seeed": 1}"#,
            "seeed",
        ),
        (
            r#"{"problem": {"name": "star"}, "sampler": {"name": "olla"}, "chains": 1}"#,
            "steps",
        ),
    ] {
        let cfg = write_config(tmp.path(), "bad.json", text);
        let o = olla(&["run", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
        assert!(!o.status.success());
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(&format!("`{key}`")), "{err}");
    }
    let cfg = write_config(tmp.path(), "bad.json", "{ nope");
    assert!(!olla(&["run", &cfg]).status.success());
}

#[test]
fn reference_populates_distances_and_compare_agrees() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", STAR);
    let a = tmp.path().join("a");
    assert!(olla(&["run", &cfg, "--out", a.to_str().unwrap()])
        .status
        .success());
    let s = summary(&a);
    assert!(s["metrics"]["w2_squared"].is_null());

    let with_ref = STAR.replace(
        "\"base_seed\": 7",
        "\"base_seed\": 9, \"reference\": \"a/samples.csv\"",
    );
    let cfg2 = write_config(tmp.path(), "r.json", &with_ref);
    let b = tmp.path().join("b");
    let o = olla(&["run", &cfg2, "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = &summary(&b)["metrics"];
    let w2 = m["w2_squared"].as_f64().unwrap();
    let en = m["energy_distance"].as_f64().unwrap();
    assert!(w2 > 0.0 && en >= 0.0);

    let c = tmp.path().join("cmp");
    let o = olla(&[
        "compare",
        b.join("samples.csv").to_str().unwrap(),
        a.join("samples.csv").to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let cmp: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cmp["w2_squared"].as_f64().unwrap(), w2);
    assert_eq!(cmp["energy_distance"].as_f64().unwrap(), en);
    assert!(c.join("compare.json").exists());
}

#[test]
fn sweep_writes_one_report_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", STAR);
    let out = tmp.path().join("sweep");
    let o = olla(&[
        "sweep",
        &cfg,
        "--vary",
        "alpha=10,50",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for (dir, alpha) in [("alpha=10", 10.0), ("alpha=50", 50.0)] {
        assert_eq!(summary(&out.join(dir))["config"]["sampler"]["alpha"], alpha);
    }
    let o = olla(&[
        "sweep",
        &cfg,
        "--vary",
        "alpha",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}

#[test]
fn decay_writes_per_chain_series() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", STAR);
    let out = tmp.path().join("d");
    assert!(olla(&["decay", &cfg, "--out", out.to_str().unwrap()])
        .status
        .success());
    let text = fs::read_to_string(out.join("decay.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "chain,step,mean_abs_h,max_g_plus"
    );
    assert_eq!(text.lines().count(), 1 + 3 * 60);
}

#[test]
fn all_chain_divergence_exits_nonzero_with_empty_samples() {
    let tmp = tempfile::tempdir().unwrap();
    // α·dt = 10^4: the landing step overshoots without bound
    let text = STAR
        .replace("\"alpha\": 100", "\"alpha\": 1e4, \"dt\": 1")
        .replace(
            "\"steps\": 60, \"burn_in\": 40",
            "\"steps\": 300, \"burn_in\": 290",
        );
    let cfg = write_config(tmp.path(), "c.json", &text);
    let out = tmp.path().join("o");
    let o = olla(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        fs::read_to_string(out.join("samples.csv")).unwrap(),
        "chain,step,x0,x1\n"
    );
    let s = summary(&out);
    assert_eq!(s["all_diverged"], true);
    assert_eq!(s["diverged_chains"], 3);
    assert!(s["metrics"]["mean_abs_h"].is_null());
}

#[test]
fn summary_round_trips_through_parse() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", STAR);
    let out = tmp.path().join("o");
    assert!(olla(&["run", &cfg, "--out", out.to_str().unwrap()])
        .status
        .success());
    let text = fs::read_to_string(out.join("summary.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", text);
}
