use std::path::Path;
use std::process::{Command, Output};

fn glosa_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glosa-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_vehicle_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ring.csv");
    let trace = dir.path().join("trace.csv");
    let o = glosa_sim(&[
        "run", "--scenario", "ring", "--veh-pen", "1", "--tls-pen", "1", "--seed", "0",
        "--trace", path(&trace), "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().count() >= 2);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["n_finished"], 1);
    assert!(summary.get("vehicles").is_none());
    assert!(std::fs::read_to_string(&trace).unwrap().starts_with("t,vehicle,position,speed,co2_rate"));
}

#[test]
fn usage_errors_exit_2() {
    let o = glosa_sim(&["run", "--scenario", "ring", "--veh-pen", "1", "--tls-pen", "1", "--seed", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(glosa_sim(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn invalid_values_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = glosa_sim(&[
        "run", "--scenario", "ring", "--veh-pen", "1.5", "--tls-pen", "1", "--seed", "0", "--out", path(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vehicle penetration out of range"));

    let o = glosa_sim(&[
        "run", "--scenario", "nowhere.json", "--veh-pen", "1", "--tls-pen", "1", "--seed", "0", "--out", path(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_is_byte_identical_and_reportable() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let o = glosa_sim(&[
            "sweep", "--scenario", "ring-traffic", "--veh-pens", "0.5,1", "--tls-pens", "0,1",
            "--seeds", "2", "--duration", "1200", "--out", path(d.path()), "--svg",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["results.csv", "summary.csv", "heatmap_wait.svg"] {
        let a = std::fs::read(dirs[0].path().join(file)).unwrap();
        let b = std::fs::read(dirs[1].path().join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let o = glosa_sim(&["report", "--in", path(dirs[0].path())]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("best cells for ring-traffic"));
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = glosa_sim(&["report", "--in", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing"));
}
