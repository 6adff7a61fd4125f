use std::path::{Path, PathBuf};
use std::process::Command;

use dynres::cli::execute;
use dynres::format::*;
use dynres_core::choi::{ChannelChoi, SystemPair};
use dynres_core::linalg::{c, max_abs_diff, phi_plus};
use dynres_core::supermap::SuperChoi;
use serde_json::Value;

const PPT_BELL: &str = r#"{"A0":"alpha","A1":"beta","B1":[1],"factors":{"B1":[2,2]}}"#;

fn dir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn write<T: serde::Serialize>(dir: &Path, name: &str, x: &T) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(x).unwrap()).unwrap();
    p
}

fn bell() -> ChannelChoi {
    ChannelChoi::preparation(&(phi_plus(2) / c(2.0))).unwrap()
}

fn run(args: &[&str]) -> (i32, Value) {
    let mut argv = vec!["dynres"];
    argv.extend_from_slice(args);
    let out = execute(argv);
    let v = serde_json::from_str(&out.stdout).unwrap_or(Value::Null);
    (out.code, v)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn identity_supermap_validates() {
    let d = dir();
    let theta = write(d.path(), "theta.json", &SuperChoiJson::new(&SuperChoi::identity(SystemPair::new(2, 2))));
    let (code, v) = run(&["validate-superchannel", "--in", s(&theta)]);
    assert_eq!(code, 0);
    assert_eq!(v["pass"], true);
}

#[test]
fn werner_line_distance_from_the_cli() {
    let d = dir();
    let dep = write(d.path(), "dep.json", &ChannelJson::new(&ChannelChoi::depolarizing(2, 2)));
    let phi = write(d.path(), "phi2.json", &ChannelJson::new(&bell()));
    let (code, v) =
        run(&["convert-distance", "--from", s(&dep), "--to", s(&phi), "--theory", "ppt", "--bipartition", PPT_BELL]);
    assert_eq!(code, 0, "{v}");
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!(v["gap"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["primal"]["status"], "optimal");
}

#[test]
fn realize_rejects_non_superchannels() {
    let d = dir();
    let mut t = SuperChoiJson::new(&SuperChoi::identity(SystemPair::new(2, 2)));
    for e in &mut t.choi.entries {
        e[0] *= 2.0;
    }
    let bad = write(d.path(), "bad.json", &t);
    let (code, v) = run(&["realize", "--in", s(&bad)]);
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], "invalid_superchannel");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["bogus"]).0, 2);
    assert_eq!(run(&["realize"]).0, 2);
    assert_eq!(run(&["realize", "--in", "/nonexistent/x.json"]).0, 2);
    assert_eq!(run(&["monotone", "--p", "x.json", "--kind", "h"]).0, 2);
}

#[test]
fn malformed_objects_exit_one() {
    let d = dir();
    let p = d.path().join("junk.json");
    std::fs::write(&p, "{\"sys\": [2, 2], \"choi\": {\"dims\": [2, 2], \"entries\": [[1, 0]]}}").unwrap();
    let (code, v) = run(&["validate-channel", "--in", s(&p)]);
    assert_eq!(code, 1);
    assert!(v["error"]["message"].as_str().unwrap().contains("entries"));
}

#[test]
fn samples_round_trip_and_are_seeded() {
    let kinds = [
        ("channel", vec![]),
        ("superchannel", vec![]),
        ("realization", vec![]),
        ("comb", vec!["--n", "2", "--sys-b", "1,2"]),
        ("free-superchannel", vec!["--theory", "ppt", "--bipartition", r#"{"A1":"beta","B1":"beta"}"#]),
    ];
    for (kind, extra) in kinds {
        let mut args = vec!["dynres", "sample", "--kind", kind, "--seed", "7"];
        args.extend(extra.iter().copied());
        let a = execute(args.clone());
        let b = execute(args);
        assert_eq!(a.code, 0, "{kind}: {}", a.stdout);
        assert_eq!(a.stdout, b.stdout, "{kind} is not reproducible");
        let v: Value = serde_json::from_str(&a.stdout).unwrap();
        let again = match kind {
            "channel" => serde_json::to_value(serde_json::from_value::<ChannelJson>(v.clone()).unwrap()),
            "realization" => serde_json::to_value(serde_json::from_value::<RealizationJson>(v.clone()).unwrap()),
            "comb" => serde_json::to_value(serde_json::from_value::<CombJson>(v.clone()).unwrap()),
            _ => serde_json::to_value(serde_json::from_value::<SuperChoiJson>(v.clone()).unwrap()),
        }
        .unwrap();
        assert_eq!(v, again, "{kind} does not round-trip");
    }
}

#[test]
fn realize_then_align_and_validate() {
    let d = dir();
    let out = execute(["dynres", "sample", "--kind", "superchannel", "--seed", "3"]);
    let theta = d.path().join("theta.json");
    std::fs::write(&theta, &out.stdout).unwrap();
    let (code, v) = run(&["validate-superchannel", "--in", s(&theta)]);
    assert_eq!((code, &v["pass"]), (0, &Value::Bool(true)));

    let r = execute(["dynres", "realize", "--in", s(&theta)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let real = d.path().join("r.json");
    std::fs::write(&real, &r.stdout).unwrap();
    let parsed: RealizationJson = serde_json::from_str(&r.stdout).unwrap();
    let raw: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(serde_json::to_value(&parsed).unwrap(), raw);

    let (code, v) = run(&["align", "--from", s(&real), "--to", s(&real)]);
    assert_eq!(code, 0);
    assert!(v["residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn apply_and_reps() {
    let d = dir();
    let theta = write(d.path(), "theta.json", &SuperChoiJson::new(&SuperChoi::identity(SystemPair::new(2, 2))));
    let dep = write(d.path(), "dep.json", &ChannelJson::new(&ChannelChoi::depolarizing(2, 2)));
    let (code, v) = run(&["apply", "--in", s(&theta), "--channel", s(&dep)]);
    assert_eq!(code, 0);
    let back: ChannelJson = serde_json::from_value(v).unwrap();
    let m = back.to_channel().unwrap();
    assert!(max_abs_diff(m.matrix(), ChannelChoi::depolarizing(2, 2).matrix()) < 1e-12);

    for rep in ["p", "q", "r"] {
        let (code, v) = run(&["rep", "--in", s(&theta), "--rep", rep]);
        assert_eq!(code, 0);
        assert_eq!(v["rep"], rep);
    }
}

#[test]
fn monotones_and_diamond() {
    let d = dir();
    let id = write(d.path(), "id.json", &ChannelJson::new(&ChannelChoi::identity(2)));
    let dep = write(d.path(), "dep.json", &ChannelJson::new(&ChannelChoi::depolarizing(2, 2)));
    let (code, v) = run(&["diamond", "--from", s(&id), "--to", s(&dep)]);
    assert_eq!(code, 0);
    // ½‖id − dep‖⋄ = 3/4 for the completely depolarizing qubit channel
    assert!((v["value"].as_f64().unwrap() - 0.75).abs() < 1e-6, "{v}");
    assert!(v["disagreement"].as_f64().unwrap() < 1e-6);

    let (code, v) = run(&["monotone", "--in", s(&dep), "--p", s(&dep), "--kind", "f"]);
    assert_eq!(code, 0);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let (code, v) = run(&["monotone", "--p", s(&dep), "--kind", "g"]);
    assert_eq!(code, 0, "{v}");
    let (code, v) = run(&["monotone", "--in", s(&id), "--p", s(&id), "--kind", "G"]);
    assert_eq!(code, 0);
    // the ALL theory makes every channel free, so G vanishes
    assert!(v["value"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn protocols_from_the_cli() {
    let d = dir();
    let phi = write(d.path(), "phi2.json", &ChannelJson::new(&bell()));
    let dep = write(d.path(), "dep.json", &ChannelJson::new(&ChannelChoi::depolarizing(2, 2)));
    let bell_parts = r#"{"out":[1],"factors":{"out":[2,2]}}"#;
    let (code, v) =
        run(&["cost", "--in", s(&phi), "--theory", "ppt", "--eps", "0.1", "--dmax", "2", "--bipartition", bell_parts]);
    assert_eq!(code, 0);
    assert_eq!(v["value"], 1.0);
    let (code, v) = run(&[
        "distill",
        "--in",
        s(&dep),
        "--theory",
        "ppt",
        "--eps",
        "0.4",
        "--dmax",
        "2",
        "--bipartition",
        r#"{"in":"alpha","out":"beta"}"#,
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["value"], 0.0);
    assert_eq!(v["table"].as_array().unwrap().len(), 2);
    let (code, v) = run(&[
        "adaptive",
        "--task",
        "cost",
        "--in",
        s(&phi),
        "--n",
        "1",
        "--theory",
        "ppt",
        "--eps",
        "0.1",
        "--dmax",
        "2",
        "--bipartition",
        bell_parts,
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["value"], 1.0);
    let (code, v) = run(&["adaptive", "--task", "cost", "--in", s(&phi), "--n", "3"]);
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], "unsupported");
    let (code, _) = run(&["cost", "--in", s(&phi), "--eps", "1.5"]);
    assert_eq!(code, 1);
}

#[test]
fn witness_separates() {
    let d = dir();
    let dep = write(d.path(), "dep.json", &ChannelJson::new(&ChannelChoi::depolarizing(2, 2)));
    let phi = write(d.path(), "phi2.json", &ChannelJson::new(&bell()));
    let (code, v) = run(&["witness", "--from", s(&dep), "--to", s(&phi), "--theory", "ppt", "--bipartition", PPT_BELL]);
    assert_eq!(code, 0, "{v}");
    assert!((v["objective"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!(v["margin"].as_f64().unwrap() > -1e-7);
    // nothing to witness when the conversion is free
    let (code, v) = run(&[
        "witness",
        "--from",
        s(&phi),
        "--to",
        s(&dep),
        "--theory",
        "ppt",
        "--bipartition",
        r#"{"A1":[1],"B0":"alpha","B1":"beta","factors":{"A1":[2,2]}}"#,
    ]);
    assert_eq!(code, 1, "{v}");
}

#[test]
fn out_file_and_summary_table() {
    let d = dir();
    let id = write(d.path(), "id.json", &ChannelJson::new(&ChannelChoi::identity(2)));
    let out = d.path().join("report.json");
    let o = execute(["dynres", "validate-channel", "--in", s(&id), "--out", s(&out)]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("pass: true"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn iteration_cap_from_the_environment() {
    let d = dir();
    let id = write(d.path(), "id.json", &ChannelJson::new(&ChannelChoi::identity(2)));
    let dep = write(d.path(), "dep.json", &ChannelJson::new(&ChannelChoi::depolarizing(2, 2)));
    let out = Command::new(env!("CARGO_BIN_EXE_dynres"))
        .args(["diamond", "--from", s(&id), "--to", s(&dep)])
        .env("DYNRES_SOLVER_ITERS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["kind"], "solver");

    let ok = Command::new(env!("CARGO_BIN_EXE_dynres"))
        .args(["diamond", "--from", s(&id), "--to", s(&dep)])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}
