//! Runs the `thermoquench` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermoquench"))
        .args(args)
        .current_dir(cwd)
        .env("THERMOQUENCH_THREADS", "2")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const QUENCH: &str = r#"
output = "out"
seed = 5

[model]
L = 4
g0 = [0.5, 1.5]

[quench]
g = 1.0
h = 1.0

[thermal]
beta = [1.0]

[truncation]
kind = "weight"
value = 0.9

[time]
t_max = 4.0
points = 9
"#;

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    names
}

#[test]
fn quench_writes_a_complete_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "q.toml", QUENCH);
    let out = run(&["quench", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let dir = tmp.path().join("out");
    let names = listing(&dir);
    for tag in ["b1_g0.5", "b1_g1.5"] {
        for prefix in ["series_", "exact_"] {
            assert!(names.contains(&format!("{prefix}{tag}.csv")), "{names:?}");
        }
        for prefix in ["truncation_", "plan_"] {
            assert!(names.contains(&format!("{prefix}{tag}.json")), "{names:?}");
        }
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "quench");
    assert_eq!(manifest["config"]["model"]["L"], 4);
    assert_eq!(manifest["points"].as_array().unwrap().len(), 2);
    let listed: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(listed.len() + 1, names.len());
    assert!(listed.iter().all(|a| names.iter().any(|n| n == a)));

    let series = fs::read_to_string(dir.join("series_b1_g0.5.csv")).unwrap();
    assert_eq!(series.lines().count(), 10);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let body = QUENCH.replace("[thermal]\nbeta = [1.0]", "[thermal]\nbeta = [0.5]\nsource = \"dmqmc\"\ndmqmc.n_psip = 3000\ndmqmc.n_loops = 2");
    let cfg = write_config(tmp.path(), "q.toml", &body);
    let (a, b) = (tmp.path().join("out"), tmp.path().join("first"));
    assert!(run(&["quench", &cfg], tmp.path()).status.success());
    fs::rename(&a, &b).unwrap();
    let out = run(&["quench", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(listing(&a), listing(&b));
    assert!(listing(&a).iter().any(|n| n.starts_with("dmqmc_")));
    for name in listing(&a) {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name} differs");
    }
}

#[test]
fn failed_runs_leave_no_partial_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    // The second point (beta = 0) has only 16 stored elements, so a count
    // target of 20 fails after the first point has been written.
    let body = QUENCH
        .replace("beta = [1.0]", "beta = [1.0, 0.0]")
        .replace("kind = \"weight\"\nvalue = 0.9", "kind = \"count\"\nvalue = 20");
    let cfg = write_config(tmp.path(), "q.toml", &body);
    let out = run(&["quench", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("out").exists());

    fs::create_dir(tmp.path().join("keep")).unwrap();
    let out = run(&["quench", &cfg, "-o", "keep"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(tmp.path().join("keep").exists());
    assert!(listing(&tmp.path().join("keep")).is_empty());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["quench"], tmp.path()).status.code(), Some(2));
    assert_eq!(run(&["quench", "missing.toml"], tmp.path()).status.code(), Some(2));

    let unknown = write_config(tmp.path(), "u.toml", &QUENCH.replace("seed = 5", "seed = 5\ncolour = 1"));
    assert_eq!(run(&["quench", &unknown], tmp.path()).status.code(), Some(2));

    let big = write_config(tmp.path(), "big.toml", &QUENCH.replace("L = 4", "L = 22"));
    assert_eq!(run(&["quench", &big], tmp.path()).status.code(), Some(3));

    let cfg = write_config(tmp.path(), "q.toml", QUENCH);
    fs::create_dir(tmp.path().join("busy")).unwrap();
    fs::write(tmp.path().join("busy/file"), "x").unwrap();
    assert_eq!(run(&["quench", &cfg, "-o", "busy"], tmp.path()).status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_thermoquench"))
        .args(["quench", &cfg, "-o", "t"])
        .current_dir(tmp.path())
        .env("THERMOQUENCH_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn circuit_prints_gates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["circuit", "--n", "0000", "--m", "1100", "--variant", "psi_minus"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("X 0\n---\nH 0\n---\nCNOT 0,1\n"), "{text}");

    let out = run(&["circuit", "--n", "0101", "--m", "0101"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn structure_orbits_and_tde() {
    let tmp = tempfile::tempdir().unwrap();
    let structure = write_config(
        tmp.path(),
        "s.toml",
        r#"
output = "nw"
w_target = 0.93

[grid]
L = [4, 6]
beta = [0.0, 2.0]
g0 = [0.5, 1.5]
"#,
    );
    let out = run(&["structure", &structure], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("nw/nw_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "L,beta,g0,h0,basis,w_target,N_w,achieved_w");
    assert_eq!(lines.count(), 2 * 2 * 2 * 2);

    let cfg = write_config(tmp.path(), "q.toml", QUENCH);
    let out = run(&["orbits", &cfg, "-o", "orbits"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("orbits/plan_b1_g0.5.json").exists());

    let out = run(&["tde", &cfg, "-o", "tde"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tde = fs::read_to_string(tmp.path().join("tde/tde.csv")).unwrap();
    assert_eq!(tde.lines().count(), 3);

    let out = run(&["dmqmc-sample", &cfg, "-o", "dm"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("dm/dmqmc_b1_g0.5.jsonl").exists());
}
