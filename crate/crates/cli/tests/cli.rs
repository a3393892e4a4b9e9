use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn momrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momrank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_str(&stdout_str(out)).expect("stdout is JSON")
}

#[test]
fn bound_json_reports_the_isp_value() {
    let out = momrank(&[
        "bound", "cp", "--matrix", "ex1", "--t", "1", "--mode", "isp", "--strength", "plain",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));
    let doc = json_stdout(&out);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["instance"]["kind"], "cp");
    assert_eq!(doc["instance"]["rows"], 5);
    let row = &doc["rows"][0];
    assert_eq!(row["status"], "optimal");
    assert!((row["value"].as_f64().unwrap() - 5.0).abs() < 0.05);
    assert!(doc["solver"]["max_iters"].as_u64().unwrap() > 0);
}

#[test]
fn bound_runs_are_deterministic() {
    let args = [
        "bound", "cp", "--matrix", "ex2", "--t", "1", "--mode", "wisp", "--strength", "plain",
        "--json",
    ];
    let a = json_stdout(&momrank(&args));
    let b = json_stdout(&momrank(&args));
    assert_eq!(a["rows"][0]["value"], b["rows"][0]["value"]);
}

#[test]
fn text_output_prints_six_significant_digits() {
    let out = momrank(&[
        "bound", "cp", "--matrix", "ex1", "--t", "1", "--mode", "isp", "--strength", "plain",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_str(&out).contains("value=5.00000"));
}

#[test]
fn infeasible_instances_exit_zero_with_certificate_status() {
    let out = momrank(&[
        "bound", "cp", "--matrix", "ex5", "--t", "1", "--mode", "isp", "--strength", "plain",
        "--csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let body = stdout_str(&out);
    let mut lines = body.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance,t,mode,strength,status,value,time_s,flat,atoms,residual"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("ex5,1,isp,plain,primal_infeasible,,"));
}

#[test]
fn csv_value_field_matches_the_json_rendering() {
    let base = [
        "bound", "cp", "--matrix", "ex1", "--t", "1", "--mode", "wisp", "--strength", "plain",
    ];
    let json_doc = json_stdout(&momrank(&[&base[..], &["--json"]].concat()));
    let csv_body = stdout_str(&momrank(&[&base[..], &["--csv"]].concat()));
    let json_value = json_doc["rows"][0]["value"].as_f64().unwrap();
    let csv_value = csv_body.lines().nth(1).unwrap().split(',').nth(5).unwrap();
    assert_eq!(csv_value, serde_json::to_string(&json_value).unwrap());
}

#[test]
fn nn_rejects_the_weak_sparse_mode() {
    let out = momrank(&[
        "bound", "nn", "--matrix", "edm(4)", "--t", "1", "--mode", "wisp", "--strength", "plain",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).contains("wisp"));
}

#[test]
fn unreadable_matrix_paths_exit_two() {
    let out = momrank(&[
        "bound", "cp", "--matrix", "/no/such/file.txt", "--t", "1", "--mode", "dense",
        "--strength", "plain",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_matrix_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    fs::write(&path, "2 2\n1.0 2.0\n3.0\n").unwrap();
    let out = momrank(&[
        "bound", "cp", "--matrix", path.to_str().unwrap(), "--t", "1", "--mode", "dense",
        "--strength", "plain",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn matrix_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    fs::write(&path, "2 2\n2.0 1.0\n1.0 2.0\n").unwrap();
    let out = momrank(&[
        "bound", "cp", "--matrix", path.to_str().unwrap(), "--t", "1", "--mode", "dense",
        "--strength", "plain", "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));
    assert_eq!(json_stdout(&out)["rows"][0]["status"], "optimal");
}

#[test]
fn extraction_reports_flat_blocks_and_atoms() {
    let out = momrank(&[
        "extract", "cp", "--matrix", "ex2", "--t", "2", "--mode", "isp", "--strength",
        "ddagger", "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));
    let doc = json_stdout(&out);
    assert_eq!(doc["flatness"]["overall_flat"], true);
    assert_eq!(doc["extraction"]["atoms"], 6);
    assert!(doc["extraction"]["residual"].as_f64().unwrap() <= 1e-6);
    for atom in doc["extraction"]["atom_rows"].as_array().unwrap() {
        assert!((atom["weight"].as_f64().unwrap() - 1.0).abs() < 1e-5);
        assert_eq!(atom["point"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn export_sdpa_round_trips_through_the_parser() {
    use momrank_core::momrelax::build_dense;
    use momrank_core::{conic, cprank, instances};

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ex1.dats");
    let out = momrank(&[
        "export-sdpa", "cp", "--matrix", "ex1", "--t", "1", "--mode", "dense", "--strength",
        "plain", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));

    let text = fs::read_to_string(&path).unwrap();
    let parsed = conic::parse_sdpa(&text).unwrap();
    let inst = instances::builtin_cp("ex1").unwrap();
    let spec = cprank::cp_spec(&inst, cprank::Strength::Plain);
    let (prog, _) = build_dense(&spec, 1).unwrap();
    assert!(conic::structural_eq(&prog, &parsed));
}

#[test]
fn export_sdpa_prunes_the_level_two_moment_block() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ex3.dats");
    let out = momrank(&[
        "export-sdpa", "cp", "--matrix", "ex3", "--t", "2", "--mode", "dense", "--strength",
        "plain", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    let dims: Vec<usize> = text
        .lines()
        .nth(2)
        .unwrap()
        .split_whitespace()
        .map(|w| w.parse().unwrap())
        .collect();
    assert_eq!(dims.first(), Some(&67));
}

#[test]
fn generated_instances_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.txt");
    let second = dir.path().join("b.txt");
    for path in [&first, &second] {
        let out = momrank(&[
            "gen", "--n", "5", "--m", "6", "--seed", "7", "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));
    }
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());

    let sidecar: Value =
        serde_json::from_str(&fs::read_to_string(first.with_extension("txt.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["seed"], 7);
    assert!(sidecar["nzd"].as_f64().unwrap() > 0.0);
    assert!(sidecar["factors"].as_u64().unwrap() > 0);

    let header = fs::read_to_string(&first).unwrap();
    assert!(header.starts_with("5 5\n"));
}

#[test]
fn generator_rejects_impossible_edge_counts() {
    let out = momrank(&["gen", "--n", "5", "--m", "200", "--seed", "1", "--out", "/tmp/x.txt"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repro_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = momrank(&[
        "repro", "figure3", "--a", "0.0", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("figure3.json")).unwrap())
            .unwrap();
    assert_eq!(report["passed"], 2);
    assert_eq!(report["failed"], 0);
    let csv = fs::read_to_string(dir.path().join("figure3.csv")).unwrap();
    assert!(csv.starts_with("label,family,t,mode,strength,expect,status,value,time_s,pass"));
}
