use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn brach(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brach"))
        .arg("--quiet")
        .arg("--store")
        .arg(store)
        .args(args)
        .env_remove("BRACH_STORE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let mut out = vec![header];
    out.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    out
}

fn jsonl_lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.trim().is_empty()).count()
}

#[test]
fn size_sweep_resumes_from_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let first = brach(&store, &["sweep", "n", "--from", "2", "--to", "4", "--format", "csv"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let second = brach(&store, &["sweep", "n", "--from", "2", "--to", "6", "--format", "csv"]);
    assert_eq!(second.status.code(), Some(0));

    let profile = fs::read_dir(&store).unwrap().next().unwrap().unwrap().path();
    assert_eq!(profile.file_name().unwrap().len(), 64);
    for n in 2..=4 {
        assert_eq!(jsonl_lines(&profile.join(format!("n{:03}.jsonl", n))), 1, "N = {} re-solved", n);
    }
    for n in 5..=6 {
        assert_eq!(jsonl_lines(&profile.join(format!("n{:03}.jsonl", n))), 1);
    }

    let a = csv_rows(&stdout(&first));
    let b = csv_rows(&stdout(&second));
    assert_eq!(&b[0][..4], ["n", "j0_tau", "l0", "classical_bound"]);
    assert_eq!(a.len(), 4);
    assert_eq!(b.len(), 6);
    assert_eq!(a[1..], b[1..4]);
    let bound: f64 = b[5][3].parse().unwrap();
    assert!((bound - 1.13031 * 5.0).abs() < 1e-12);
    let fidelity_col = b[0].iter().position(|h| h == "fidelity").unwrap();
    for row in &b[1..] {
        assert!(row[fidelity_col].parse::<f64>().unwrap() >= 1.0 - 1e-6);
    }

    let again = brach(&store, &["sweep", "n", "--from", "3", "--to", "3", "--no-reuse", "--format", "csv"]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(jsonl_lines(&profile.join("n003.jsonl")), 2);
}

#[test]
fn solved_protocol_verifies_and_tampering_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let path = dir.path().join("p4.json");
    let csv = dir.path().join("p4.csv");
    let o = brach(
        &store,
        &["solve", "--n", "4", "--out", path.to_str().unwrap(), "--csv", csv.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&fs::read_to_string(&csv).unwrap());
    assert_eq!(rows[0].len(), 2 + 6);

    let v = brach(&store, &["verify", path.to_str().unwrap(), "--qbe"]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&v)).unwrap();
    assert!(report["fidelity"].as_f64().unwrap() >= 1.0 - 1e-6);
    assert!(report["qbe_coupling_deviation"].as_f64().unwrap() <= 1e-6);
    assert!((report["j0_tau"].as_f64().unwrap() - 3.4885).abs() < 5e-3);

    let mut p: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let tau = p["tau"].as_f64().unwrap();
    p["tau"] = serde_json::json!(0.8 * tau);
    for t in p["times"].as_array_mut().unwrap() {
        *t = serde_json::json!(0.8 * t.as_f64().unwrap());
    }
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&p).unwrap()).unwrap();
    let v = brach(&store, &["verify", bad.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&v.stderr).trim()).unwrap();
    assert_eq!(err["exit_code"], 3);
}

#[test]
fn four_site_trajectory_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = brach(&dir.path().join("s"), &["trajectories", "--n", "4", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 1 + 4);
    let labels: BTreeSet<&str> = rows[1..].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(labels, BTreeSet::from(["1,2,3,4", "1,2,4", "1,3,4", "1,4"]));
    for r in &rows[1..] {
        assert_eq!(r[4], "true");
    }
    let direct = rows[1..].iter().find(|r| r[1] == "1,4").unwrap();
    assert!((direct[3].parse::<f64>().unwrap() - 1.5 * std::f64::consts::PI).abs() < 1e-9);
}

#[test]
fn g_sweep_exports_comparison_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = brach(
        &dir.path().join("s"),
        &["sweep", "g", "--g-min", "2", "--g-max", "6", "--steps", "5", "--format", "csv", "--out-dir", out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("g-sweep.csv")).unwrap();
    let rows = csv_rows(&text);
    assert_eq!(rows[0], ["series", "x", "y"]);
    let series: BTreeSet<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert!(series.len() >= 3);
    assert!(series.contains("optimal"));
    for g in ["2.0", "6.0"] {
        let y = |s: &str| rows[1..].iter().find(|r| r[0] == s && r[1] == g).unwrap()[2].parse::<f64>().unwrap();
        assert!(y("optimal") <= y("direct-hop") + 1e-9);
        assert!(y("optimal") <= y("weighted-chain") + 1e-9);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s");
    assert_eq!(brach(&store, &["solve"]).status.code(), Some(4));
    assert_eq!(brach(&store, &["solve", "--n", "3", "--weights", "bogus"]).status.code(), Some(4));
    assert_eq!(brach(&store, &["verify", dir.path().join("missing.json").to_str().unwrap()]).status.code(), Some(1));
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[lattice]\nn = 3\nsurprise = 1\n").unwrap();
    assert_eq!(brach(&store, &["--config", cfg.to_str().unwrap(), "solve"]).status.code(), Some(4));
    let o = brach(&store, &["oracle", "classical-bound", "--n", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("4.52124"));
}
