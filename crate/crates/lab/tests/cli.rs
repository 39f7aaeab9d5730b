use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use stirpat_core::features::Drivers;
use stirpat_core::panel::{PanelDataset, PanelRecord};
use stirpat_lab::documents::load_model;
use stirpat_lab::panel_csv::{parse_panel_csv, write_panel_csv};

const BIN: &str = env!("CARGO_BIN_EXE_stirpat-lab");

// Small models keep the end-to-end runs quick.
const QUICK: [&str; 6] = ["--trees", "20", "--nn-epochs", "300", "--bandwidth", "0.5"];

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["synth", "--out", s(dir)];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("panel.csv")
}

fn fit_one(dir: &Path, panel: &Path, method: &str) -> PathBuf {
    let out_dir = dir.join("fit");
    let mut args = vec!["fit", "--input", s(panel), "--out", s(&out_dir), "--methods", method, "--variant", "city-differences"];
    args.extend_from_slice(&QUICK);
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    out_dir.join(format!("model_{method}_city_differences.json"))
}

fn scenario_json(label: &str, city: &str, growth: [f64; 4]) -> String {
    format!(
        r#"{{"label":"{label}","baseline":{{"city":"{city}","year":2019,"p":5000000,"a":90000,"i":0.4,"e":0.00006}},"horizon_end_year":2030,"growth":{{"p":{},"a":{},"i":{},"e":{}}}}}"#,
        growth[0], growth[1], growth[2], growth[3]
    )
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn report_cells(path: &Path) -> Vec<serde_json::Value> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["cells"].as_array().unwrap().clone()
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["ingest", "--input", s(&dir.path().join("nope.csv"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn bad_flag_is_a_usage_error() {
    assert_eq!(code(&run(&["compare", "--bogus"])), 2);
}

#[test]
fn ingest_sets_incomplete_rows_aside() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &["--cities", "3"]);
    let text = fs::read_to_string(&panel).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[5].split(',').collect();
    fields[2] = "";
    lines[5] = fields.join(",");
    let holed = dir.path().join("holed.csv");
    fs::write(&holed, lines.join("\n") + "\n").unwrap();

    let out_dir = dir.path().join("ing");
    let out = run(&["ingest", "--input", s(&holed), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("rejected rows: 1"), "{stdout}");
    let rejects = csv_rows(&out_dir.join("rejects.csv"));
    assert_eq!(rejects, [vec!["5".to_string(), "missing co2_tons".to_string()]]);
    assert_eq!(csv_rows(&out_dir.join("panel_clean.csv")).len(), 3 * 15 - 1);
}

#[test]
fn compare_writes_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &[]);
    let out_dir = dir.path().join("cmp");
    let mut args = vec!["compare", "--input", s(&panel), "--out", s(&out_dir), "--save-models", "--svg"];
    args.extend_from_slice(&QUICK);
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let cells = report_cells(&out_dir.join("report.json"));
    let fitting = cells.iter().filter(|c| c["task"] == "fitting").count();
    let predicting = cells.iter().filter(|c| c["task"].as_str().unwrap().starts_with("predict_")).count();
    assert_eq!((fitting, predicting), (4 * 2, 4 * 2 * 2));
    assert!(cells.iter().all(|c| c["outcome"]["status"] == "ok"));
    assert_eq!(csv_rows(&out_dir.join("fit_scatter.csv")).len(), 8 * 150);
    assert_eq!(csv_rows(&out_dir.join("pred_table.csv")).len(), 8 * 20);
    assert_eq!(fs::read_dir(out_dir.join("models")).unwrap().count(), 8);
    assert!(out_dir.join("fit_nn_pooled.svg").exists());
    assert!(out_dir.join("pred_linear_city_differences.svg").exists());
}

#[test]
fn compare_restricted_to_two_methods() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &[]);
    let out_dir = dir.path().join("cmp");
    let mut args = vec!["compare", "--input", s(&panel), "--out", s(&out_dir), "--methods", "nn,linear"];
    args.extend_from_slice(&QUICK);
    assert_eq!(code(&run(&args)), 0);
    let cells = report_cells(&out_dir.join("report.json"));
    assert_eq!(cells.len(), 2 * 2 * 3);
    assert!(cells.iter().all(|c| c["method"] == "nn" || c["method"] == "linear"));
}

#[test]
fn split_year_past_the_data_fails() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &["--cities", "3"]);
    let out = run(&["compare", "--input", s(&panel), "--out", s(&dir.path().join("c")), "--split-year", "2019"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn forecasts_and_overlay() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &[]);
    let model = fit_one(dir.path(), &panel, "linear");

    let flat = dir.path().join("flat.json");
    fs::write(&flat, scenario_json("flat", "City03", [0.0; 4])).unwrap();
    let growth = dir.path().join("growth.json");
    fs::write(&growth, scenario_json("growth", "City03", [0.0, 0.05, -0.01, -0.02])).unwrap();

    let out_dir = dir.path().join("fc");
    let out = run(&["forecast", "--model", s(&model), "--scenario", s(&flat), "--scenario", s(&growth), "--out", s(&out_dir), "--svg"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let rows = csv_rows(&out_dir.join("path_flat.csv"));
    assert_eq!(rows.len(), 2030 - 2019);
    assert_eq!(rows[0][0], "2020");
    let tons: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(tons.iter().all(|t| (t - tons[0]).abs() <= 1e-9 * tons[0]), "{tons:?}");
    assert!(out_dir.join("path_growth.csv").exists());
    assert!(out_dir.join("paths_overlay.svg").exists());
}

#[test]
fn forecast_errors() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &["--cities", "3"]);
    let model = fit_one(dir.path(), &panel, "linear");

    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, scenario_json("x", "Atlantis", [0.0; 4])).unwrap();
    let out = run(&["forecast", "--model", s(&model), "--scenario", s(&unknown), "--out", s(&dir.path().join("a"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Atlantis"));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, scenario_json("x", "City01", [0.0; 4]).replace("2019", "\"soon\"")).unwrap();
    let out = run(&["forecast", "--model", s(&model), "--scenario", s(&broken), "--out", s(&dir.path().join("b"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("baseline.year"));

    let truncated = dir.path().join("truncated.json");
    fs::write(&truncated, "{\"label\":").unwrap();
    let out = run(&["forecast", "--model", s(&model), "--scenario", s(&truncated), "--out", s(&dir.path().join("c"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sensitivity_table() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &[]);
    let model = fit_one(dir.path(), &panel, "linear");
    let base = dir.path().join("base.json");
    fs::write(&base, scenario_json("b", "City03", [0.0; 4])).unwrap();

    let out_dir = dir.path().join("s");
    assert_eq!(code(&run(&["sensitivity", "--model", s(&model), "--baseline", s(&base), "--out", s(&out_dir)])), 0);
    let rows = csv_rows(&out_dir.join("sensitivity.csv"));
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][0], "Baseline");

    let zero_dir = dir.path().join("z");
    let out = run(&["sensitivity", "--model", s(&model), "--baseline", s(&base), "--out", s(&zero_dir), "--epsilon", "0"]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&zero_dir.join("sensitivity.csv"));
    assert!(rows.iter().all(|r| r[5] == rows[0][5]));
}

#[test]
fn saved_models_predict_identically() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &["--cities", "4"]);
    for method in ["linear", "kernel", "forest", "nn"] {
        let path = fit_one(dir.path(), &panel, method);
        let model = load_model(&path).unwrap();
        let again: stirpat_core::FittedModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        let d = Drivers {
            p: 4.0e6,
            a: 6.0e4,
            i: 0.45,
            e: 8.0e-5,
        };
        let a = model.predict("City02", &d).unwrap();
        let b = again.predict("City02", &d).unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "{method}");
    }
}

fn record() -> impl Strategy<Value = PanelRecord> {
    (
        "[A-Za-z][A-Za-z ,\"]{0,8}[A-Za-z]",
        1990i32..2030,
        1e3f64..1e9,
        1e3f64..1e8,
        1e8f64..1e12,
        0.1f64..0.9,
        1e3f64..1e8,
    )
        .prop_map(|(city, year, co2, population, gdp, share, energy)| PanelRecord {
            city,
            year,
            co2,
            population,
            gdp,
            gdp_ind: gdp * share,
            energy,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn panel_csv_round_trip(records in prop::collection::vec(record(), 1..20)) {
        let mut seen = std::collections::HashSet::new();
        let records: Vec<PanelRecord> = records.into_iter().filter(|r| seen.insert((r.city.clone(), r.year))).collect();
        let ds = PanelDataset::from_records(records).unwrap();
        let text = write_panel_csv(&ds);
        let back = parse_panel_csv(&text).unwrap();
        prop_assert!(back.rejects.is_empty());
        prop_assert_eq!(&back.dataset, &ds);
        prop_assert_eq!(write_panel_csv(&back.dataset), text);
    }
}
