use std::path::Path;
use std::process::{Command, Output};

fn mimcfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mimcfem"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn selftest_passes_and_negative_control_fails() {
    let ok = mimcfem(&["selftest"]);
    assert!(ok.status.success(), "{}", stdout(&ok));
    let text = stdout(&ok);
    assert_eq!(
        text.lines().filter(|l| l.contains(" PASS ")).count(),
        5,
        "{text}"
    );
    assert!(text.ends_with("selftest PASSED\n"));

    let bad = mimcfem(&["selftest", "--corrupt-mode-order"]);
    assert_eq!(bad.status.code(), Some(1));
    let text = stdout(&bad);
    assert!(
        text.lines()
            .any(|l| l.starts_with("annihilation") && l.contains("FAIL")),
        "{text}"
    );
}

#[test]
fn convergence_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("square.csv");
    let o = mimcfem(&[
        "convergence",
        "--experiment",
        "square",
        "--variant",
        "symmetrized",
        "--n-max",
        "3",
        "--runs",
        "2",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("N,run,value,reference,rel_error,cost_model,walltime_s")
    );
    assert_eq!(lines.count(), 8);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("square.json")).unwrap())
            .unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["reference"]["n_ref"], 5);
    assert_eq!(summary["per_n"].as_array().map(Vec::len), Some(4));
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn run_resolves_paths_against_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.toml");
    write(
        &config,
        "experiment = \"square\"\nn_max = 2\nruns = 1\nworkers = 2\n[output]\ncsv = \"out.csv\"\n",
    );
    let o = mimcfem(&["run", "--config", config.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("out.csv").exists());
}

#[test]
fn invalid_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    write(&config, "runs = 0\n");
    let o = mimcfem(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("runs"));

    let o = mimcfem(&[
        "convergence",
        "--experiment",
        "cube",
        "--n-max",
        "1",
        "--out",
        "x.csv",
    ]);
    assert!(!o.status.success());
}

#[test]
fn mesh_stats_reports_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("mesh.txt");
    let scatter = dir.path().join("scatter.csv");
    let o = mimcfem(&[
        "mesh-stats",
        "--experiment",
        "lshape",
        "--level",
        "3",
        "--json",
        "--dump",
        dump.to_str().unwrap(),
        "--scatter",
        scatter.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["conforming"], true);
    assert_eq!(report["grading_violations"], 0);
    let n = report["n_triangles"].as_u64().unwrap() as usize;
    let mesh =
        mimcfem::mesh::read_mesh(std::io::BufReader::new(std::fs::File::open(&dump).unwrap()))
            .unwrap();
    assert_eq!(mesh.n_triangles(), n);
    let scatter = std::fs::read_to_string(&scatter).unwrap();
    assert_eq!(scatter.lines().next(), Some("distance,diameter"));
    assert_eq!(scatter.lines().count(), n + 1);

    let square = mimcfem(&["mesh-stats", "--experiment", "square", "--level", "2"]);
    assert!(stdout(&square).contains("32 triangles"));
}
