use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stefan-lab"))
        .current_dir(dir)
        .env_remove("STEFANLAB_OUTPUT_ROOT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error record on stderr");
    serde_json::from_str(line).unwrap()
}

/// Relative path to SHA-256 of every file below `dir`.
fn tree(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, hex::encode(Sha256::digest(fs::read(&p).unwrap())));
            }
        }
    }
    out
}

#[test]
fn constant_preset_passes_every_check() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "preset = \"constant\"\noutput = \"out\"\n");
    let out = lab(tmp.path(), &["run", "c.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("out");
    let summary = json(&run.join("summary.json"));
    assert_eq!(summary["status"], "PASS");
    let checks = summary["checks"].as_array().unwrap();
    let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["caccioppoli", "truncation", "decay", "alternative", "modulus"]);
    for c in checks {
        assert_eq!(c["status"], "PASS");
        assert!(!c["anchor"].as_str().unwrap().is_empty());
    }
    for f in ["config.resolved.toml", "oscillation.csv", "fit.json", "inequalities.jsonl", "ledger.json"] {
        assert!(run.join(f).is_file(), "{f}");
        assert!(summary["files"][f].is_string(), "{f}");
    }
    let lines = fs::read_to_string(run.join("inequalities.jsonl")).unwrap();
    assert!(lines.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
    let header = fs::read_to_string(run.join("oscillation.csv")).unwrap();
    assert!(header.starts_with("r,T_r,osc,omega_r,ratio\n"));
    let ledger = json(&run.join("ledger.json"));
    assert_eq!(ledger["l"]["provenance"], "formula");
    assert_eq!(ledger["c_star"]["provenance"], "measured");
}

#[test]
fn snapshots_have_sidecars() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "preset = \"constant\"\noutput = \"out\"\nsnapshots = 3\n");
    assert_eq!(lab(tmp.path(), &["run", "c.toml"]).status.code(), Some(0));
    let snaps = tmp.path().join("out/snapshots");
    let mut sidecars: Vec<_> = fs::read_dir(&snaps)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    sidecars.sort();
    assert_eq!(sidecars.len(), 3);
    for s in &sidecars {
        let meta = json(s);
        let bytes = fs::read(snaps.join(meta["file"].as_str().unwrap())).unwrap();
        assert_eq!(bytes.len(), 8 * meta["shape"][0].as_u64().unwrap() as usize);
        let first = f64::from_le_bytes(bytes[..8].try_into().unwrap());
        assert!((first - 0.3).abs() < 1e-9);
        assert_eq!(meta["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn missing_p_is_a_config_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "bad.toml",
        r#"
[scenario]
t_end = 0.01
initial = { kind = "constant", value = 0.0 }
grid = { nodes = [11], length = 1.0 }
graph = { jump = 0.0, latent_heat = 1.0, eps = 0.1 }
boundary = { x_lo = "zero-flux", x_hi = "zero-flux" }
dt = { kind = "fixed", dt = 0.001 }
"#,
    );
    for verb in ["run", "validate"] {
        let out = lab(tmp.path(), &[verb, "bad.toml"]);
        assert_eq!(out.status.code(), Some(2));
        let rec = stderr_record(&out);
        assert_eq!(rec["status"], 2);
        assert_eq!(rec["kind"], "config");
        assert_eq!(rec["field"], "scenario.p");
    }
}

#[test]
fn unknown_keys_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "preset = \"constant\"\n[checks]\nfancy = true\n");
    let out = lab(tmp.path(), &["run", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_record(&out)["field"], "fancy");
}

#[test]
fn failing_check_exits_one_with_record() {
    let tmp = tempfile::tempdir().unwrap();
    // The ladder radius leaves the unit interval around its centre.
    write(
        tmp.path(),
        "f.toml",
        "preset = \"heat-smooth-1d\"\noutput = \"out\"\n[checks]\nenabled = [\"caccioppoli\", \"modulus\"]\ncaccioppoli.radius = 0.9\n",
    );
    let out = lab(tmp.path(), &["run", "f.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let rec = stderr_record(&out);
    assert_eq!(rec["kind"], "check");
    assert_eq!(rec["failed"][0], "caccioppoli");
    let summary = json(&tmp.path().join("out/summary.json"));
    assert_eq!(summary["status"], "FAIL");
    assert_eq!(summary["checks"][1]["status"], "PASS");
    assert!(tmp.path().join("out/error.json").is_file());
}

#[test]
fn solver_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.toml",
        "preset = \"stefan-1d-p3-twophase\"\noutput = \"out\"\n[scenario]\ndt = { kind = \"fixed\", dt = 0.05 }\ntolerances = { max_iterations = 1 }\n",
    );
    let out = lab(tmp.path(), &["run", "s.toml"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_record(&out)["kind"], "solver");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "r.toml",
        "preset = \"stefan-1d-p2-twophase\"\noutput = \"out\"\n[checks]\nenabled = [\"caccioppoli\", \"truncation\", \"decay\", \"alternative\", \"modulus\", \"induction\"]\n",
    );
    assert_eq!(lab(tmp.path(), &["run", "r.toml"]).status.code(), Some(0));
    let first = tree(&tmp.path().join("out"));
    assert_eq!(lab(tmp.path(), &["run", "r.toml"]).status.code(), Some(0));
    assert_eq!(first, tree(&tmp.path().join("out")));
    let summary = json(&tmp.path().join("out/summary.json"));
    for (name, hash) in summary["files"].as_object().unwrap() {
        assert_eq!(first[name], hash.as_str().unwrap(), "{name}");
    }
    assert_eq!(first.len(), summary["files"].as_object().unwrap().len() + 1);
    assert!(first.contains_key("certifier.csv"));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "preset = \"collapsing-bump-p3\"\noutput = \"a\"\n[constants]\ntheta1 = 0.05\n");
    assert_eq!(lab(tmp.path(), &["run", "c.toml"]).status.code(), Some(0));
    let a = tmp.path().join("a");
    let out = lab(tmp.path(), &["run", a.join("config.resolved.toml").to_str().unwrap(), "--out", "b"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(tree(&a), tree(&tmp.path().join("b")));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("root");
    write(tmp.path(), "c.toml", "preset = \"constant\"\noutput = \"nested/run\"\n");
    let out = Command::new(env!("CARGO_BIN_EXE_stefan-lab"))
        .current_dir(tmp.path())
        .env("STEFANLAB_OUTPUT_ROOT", &root)
        .args(["run", "c.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(root.join("nested/run/summary.json").is_file());
}

#[test]
fn presets_and_validate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lab(tmp.path(), &["presets"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["constant", "stefan-1d-p2-twophase", "neumann-melt-1d"] {
        assert!(text.contains(name));
    }
    let out = lab(tmp.path(), &["presets", "--json"]);
    let all: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(all["stefan-2d-p3-twophase"]["p"], 3.0);

    write(tmp.path(), "v.toml", "preset = \"stefan-2d-p3-twophase\"\noutput = \"never\"\n");
    let out = lab(tmp.path(), &["validate", "v.toml"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("weak-harnack"));
    assert!(!tmp.path().join("never").exists());
}

#[test]
fn empty_sweep_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "preset = \"heat-smooth-1d\"\n");
    assert_eq!(lab(tmp.path(), &["run", "c.toml", "--out", "run"]).status.code(), Some(0));
    assert_eq!(lab(tmp.path(), &["sweep", "c.toml", "--out", "sweep"]).status.code(), Some(0));
    assert_eq!(tree(&tmp.path().join("run")), tree(&tmp.path().join("sweep")));
}

fn csv_rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| header.iter().cloned().zip(rec.unwrap().iter().map(String::from)).collect())
        .collect()
}

#[test]
fn resolution_sweep_fills_stability_columns() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.toml",
        "preset = \"stefan-1d-p2-twophase\"\noutput = \"sw\"\n[sweep]\nresolution = [0, 1]\n",
    );
    let out = lab(tmp.path(), &["sweep", "s.toml", "--axis", "preset=stefan-1d-p2-twophase,jump-free-1d"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&tmp.path().join("sw/sweep.csv"));
    assert_eq!(rows.len(), 4);
    let order: Vec<(&str, &str)> = rows.iter().map(|r| (r["preset"].as_str(), r["resolution"].as_str())).collect();
    assert_eq!(
        order,
        [
            ("stefan-1d-p2-twophase", "0"),
            ("stefan-1d-p2-twophase", "1"),
            ("jump-free-1d", "0"),
            ("jump-free-1d", "1")
        ]
    );
    for r in &rows {
        for col in ["caccioppoli", "decay", "modulus", "c_star"] {
            let v: f64 = r[&format!("{col}_refinement")].parse().unwrap();
            assert!(v > 0.5 && v < 2.0, "{col}: {v}");
        }
        assert!(r["alpha_hat"].parse::<f64>().is_ok());
        assert_eq!(r["status"], "0");
    }
    for i in 0..4 {
        assert!(tmp.path().join(format!("sw/runs/{i:04}/summary.json")).is_file());
    }
    let before = tree(&tmp.path().join("sw"));
    lab(tmp.path(), &["sweep", "s.toml", "--axis", "preset=stefan-1d-p2-twophase,jump-free-1d", "--jobs", "1"]);
    assert_eq!(before, tree(&tmp.path().join("sw")));
}

#[test]
fn eps_sweep_feeds_the_regularization_study() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "e.toml",
        "preset = \"stefan-1d-p2-twophase\"\noutput = \"eps\"\n[sweep]\neps = [0.1, 0.05, 0.025]\n",
    );
    let out = lab(tmp.path(), &["sweep", "e.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&tmp.path().join("eps/sweep.csv"));
    let eps: Vec<&str> = rows.iter().map(|r| r["eps"].as_str()).collect();
    assert_eq!(eps, ["0.1", "0.05", "0.025"]);
    let studies = json(&tmp.path().join("eps/epsilon_study.json"));
    let study = &studies[0]["study"];
    assert_eq!(study["eps"].as_array().unwrap().len(), 3);
    assert_eq!(study["gaps"].as_array().unwrap().len(), 2);
    assert_eq!(study["gaps_decreasing"], true);
}

#[test]
fn draw_axis_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "d.toml",
        "preset = \"heat-smooth-1d\"\nseed = 11\n[sweep]\ndraw = [0, 1]\n[checks]\nenabled = [\"caccioppoli\", \"truncation\"]\n",
    );
    assert_eq!(lab(tmp.path(), &["sweep", "d.toml", "--out", "a"]).status.code(), Some(0));
    assert_eq!(lab(tmp.path(), &["sweep", "d.toml", "--out", "b"]).status.code(), Some(0));
    assert_eq!(tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
    let s0 = json(&tmp.path().join("a/runs/0000/summary.json"));
    let s1 = json(&tmp.path().join("a/runs/0001/summary.json"));
    assert_ne!(s0["scenario_hash"], s1["scenario_hash"]);
}

#[test]
fn bad_axis_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "preset = \"constant\"\n");
    let out = lab(tmp.path(), &["sweep", "c.toml", "--axis", "colour=red"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_record(&out)["field"], "sweep.colour");
}
