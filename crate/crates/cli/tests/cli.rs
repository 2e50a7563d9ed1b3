use std::fs;
use std::process::{Command, Output};

use gnn_certify::bounds::BoundReport;
use gnn_certify::report::Table;
use gnn_certify::{LocalizationReport, SampleBatch, ValidationReport};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gnn-certify"));
    cmd.env_remove("GNN_CERTIFY_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_record(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr carries one JSON error record")
}

const DEEP_RELU: &[&str] = &[
    "--activation", "relu", "--cb", "1", "--cw", "1", "--input", "0,0,0,0", "--widths", "10000,10000,10000", "--nout", "1",
];

#[test]
fn deep_convex_bound_matches_published_cell() {
    let mut args = vec!["bound", "deep"];
    args.extend_from_slice(DEEP_RELU);
    args.extend_from_slice(&["--metric", "convex"]);
    let report: BoundReport = serde_json::from_str(&stdout(&run(&args))).unwrap();
    assert!((report.value - 88.59).abs() < 0.005);
    assert!((report.constants["C1"] - 85.04).abs() < 0.005);
    assert_eq!(report.effective, 1.0);
}

#[test]
fn deep_bounds_without_metric_list_all_three() {
    let mut args = vec!["bound", "deep"];
    args.extend_from_slice(DEEP_RELU);
    let reports: Vec<BoundReport> = serde_json::from_str(&stdout(&run(&args))).unwrap();
    assert_eq!(reports.len(), 3);
}

#[test]
fn shallow_bounds_csv() {
    let out = stdout(&run(&[
        "--format", "csv", "bound", "shallow", "--activation", "relu", "--input", "0,0,0,0", "--widths", "100",
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "metric,provenance,value,effective");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("kolmogorov,shallow_variance,0.0745"));
}

#[test]
fn table4_csv_has_every_cell() {
    let out = stdout(&run(&["table", "--id", "4"]));
    assert_eq!(out.lines().count(), 25);
    assert!(out.contains(",14.80,14.80\n"));
    assert!(out.contains(",85.04,85.04\n"));
    assert_eq!(out, stdout(&run(&["table", "--id", "4"])));
}

#[test]
fn table_json_round_trips() {
    let text = stdout(&run(&["--format", "json", "table", "--id", "3"]));
    let table: Table = serde_json::from_str(&text).unwrap();
    assert_eq!(table.cells.len(), 144);
    assert_eq!(serde_json::to_string_pretty(&table).unwrap() + "\n", text);
}

#[test]
fn normalized_table2_cell() {
    let out = stdout(&run(&["table", "--id", "2", "--table2-normalized"]));
    assert!(out.contains("2,\"10\",1,1,1,total_variation,0.44,0.44\n"), "{out}");
}

#[test]
fn localize_round_trips() {
    let text = stdout(&run(&[
        "localize", "--activation", "relu", "--input", "0,0,0,0", "--widths", "10000", "--rect", "-inf:0",
    ]));
    let r: LocalizationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(r.p_limit, 0.5);
    assert!((r.c_bound - 0.014_907).abs() < 1e-6);
}

#[test]
fn validate_is_byte_identical_across_workers() {
    let a = stdout(&run(&["validate", "--preset", "shallow-relu", "--samples", "20000", "--seed", "42", "--workers", "1"]));
    let b = stdout(&run(&["validate", "--preset", "shallow-relu", "--samples", "20000", "--seed", "42", "--workers", "8"]));
    assert_eq!(a, b);
    let report: ValidationReport = serde_json::from_str(&a).unwrap();
    assert!(report.passed);
    assert!(report.check("ks_vs_kolmogorov_bound").unwrap().passed);
}

#[test]
fn simulate_writes_readable_batches() {
    let dir = tempfile::tempdir().unwrap();
    let bin_path = dir.path().join("draws.bin");
    let csv_path = dir.path().join("draws.csv");
    let common = ["--activation", "tanh", "--input", "0.5,-1", "--widths", "8,8", "--nout", "2", "--samples", "50", "--seed", "3"];
    for path in [&bin_path, &csv_path] {
        let mut args = vec!["simulate"];
        args.extend_from_slice(&common);
        args.extend_from_slice(&["--out", path.to_str().unwrap()]);
        stdout(&run(&args));
    }
    let from_bin = SampleBatch::read_binary(fs::File::open(&bin_path).unwrap()).unwrap();
    let from_csv = SampleBatch::read_csv(std::io::BufReader::new(fs::File::open(&csv_path).unwrap())).unwrap();
    assert_eq!((from_bin.m, from_bin.n_out), (50, 2));
    assert_eq!(from_bin.values, from_csv.values);
}

#[test]
fn simulate_collective_layer() {
    let text = stdout(&run(&[
        "simulate", "--activation", "relu", "--input", "0,0,0,0", "--widths", "100", "--layer", "1", "--samples", "2000",
    ]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["target"], 0.5);
    assert!((v["rms"]["value"].as_f64().unwrap() - 0.1118).abs() < 0.01);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"activation": "relu", "cb": 10, "cw": 1, "input": [0, 0, 0, 0], "widths": [10000, 10000, 10000], "metric": "convex"}"#,
    )
    .unwrap();
    let from_file: BoundReport =
        serde_json::from_str(&stdout(&run(&["bound", "deep", "--config", cfg.to_str().unwrap()]))).unwrap();
    assert!((from_file.value - 331.57).abs() < 0.005);
    let overridden: BoundReport =
        serde_json::from_str(&stdout(&run(&["bound", "deep", "--config", cfg.to_str().unwrap(), "--cb", "1"]))).unwrap();
    assert!((overridden.value - 88.59).abs() < 0.005);

    fs::write(&cfg, r#"{"activaton": "relu"}"#).unwrap();
    let out = run(&["bound", "deep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "parse");
}

#[test]
fn exit_codes_and_error_records() {
    let out = run(&["bound", "shallow", "--activation", "relu", "--input", "0", "--widths", "3,3"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_record(&out)["error"], "invalid_parameter");

    let out = run(&["bound", "deep", "--activation", "custom:sigmoid", "--input", "0", "--widths", "3,3"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_record(&out)["error"], "deep_bounds_unavailable");

    let out = run(&["localize", "--activation", "relu", "--input", "0", "--widths", "3", "--rect", "1:x"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["bound", "shallow", "--activation", "relu", "--widths", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["exit_code"], 2);

    let out = run(&["table", "--id", "7"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&[
        "simulate", "--activation", "relu", "--input", "0", "--widths", "1000,1000", "--samples", "1000000",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_record(&out)["error"], "resource_guard");
}

#[test]
fn thread_cap_must_be_a_positive_integer() {
    let out = bin()
        .env("GNN_CERTIFY_THREADS", "lots")
        .args(["validate", "--preset", "collective", "--samples", "10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .env("GNN_CERTIFY_THREADS", "2")
        .args(["simulate", "--activation", "relu", "--input", "0", "--widths", "4", "--samples", "10"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn compare_reports_both_families() {
    let text = stdout(&run(&["compare", "--activation", "monomial:3", "--input", "1", "--widths", "1"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["growth_envelope"]["total_variation"]["value"].as_f64().unwrap() > v["variance"]["total_variation"]["value"].as_f64().unwrap());

    let text = stdout(&run(&["compare", "--activation", "relu", "--input", "1", "--widths", "10"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["growth_envelope"].is_null());
    assert!(v["note"].is_string());
}
