//! JSON documents: fitted models, scenarios, baselines, design sidecars.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;
use stirpat_core::features::{DesignMatrix, DesignTransform, RowKey};
use stirpat_core::scenario::{BaselineRow, ScenarioSpec};
use stirpat_core::FittedModel;

use crate::error::{LabError, Result};
use crate::fsutil::read_text;
use crate::tables::{num, CsvTable};

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn schema_error(path: &Path, prefix: &str, err: serde_path_to_error::Error<serde_json::Error>) -> LabError {
    let inner = err.path().to_string();
    let field = match (prefix.is_empty(), inner == ".") {
        (true, _) => inner,
        (false, true) => prefix.to_string(),
        (false, false) => format!("{prefix}.{inner}"),
    };
    LabError::Schema {
        path: path.to_path_buf(),
        field,
        message: err.into_inner().to_string(),
    }
}

fn from_value<T: DeserializeOwned>(value: Value, path: &Path, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| schema_error(path, prefix, e))
}

fn parse_value(text: &str, path: &Path) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| LabError::Schema {
        path: path.to_path_buf(),
        field: ".".into(),
        message: e.to_string(),
    })
}

/// Parses a JSON document, reporting the path of the first field that does
/// not fit `T`.
pub fn parse_document<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    from_value(parse_value(text, path)?, path, "")
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    parse_document(&read_text(path)?, path)
}

fn invalid(path: &Path, field: String, err: stirpat_core::Error) -> LabError {
    let message = match err {
        stirpat_core::Error::Scenario(m) => m,
        other => other.to_string(),
    };
    LabError::Schema {
        path: path.to_path_buf(),
        field,
        message,
    }
}

/// One scenario object, or an array of them.
pub fn parse_scenarios(text: &str, path: &Path) -> Result<Vec<ScenarioSpec>> {
    let items = match parse_value(text, path)? {
        Value::Array(items) => items.into_iter().enumerate().map(|(k, v)| (format!("[{k}]"), v)).collect(),
        v => vec![(String::new(), v)],
    };
    items
        .into_iter()
        .map(|(prefix, v)| {
            let spec: ScenarioSpec = from_value(v, path, &prefix)?;
            let field = if prefix.is_empty() { ".".into() } else { prefix };
            spec.validate().map_err(|e| invalid(path, field, e))?;
            Ok(spec)
        })
        .collect()
}

pub fn load_scenarios(path: &Path) -> Result<Vec<ScenarioSpec>> {
    parse_scenarios(&read_text(path)?, path)
}

/// A bare baseline object, or any document with a `baseline` member (such
/// as a scenario file).
pub fn parse_baseline(text: &str, path: &Path) -> Result<BaselineRow> {
    let (mut prefix, mut value) = (String::new(), parse_value(text, path)?);
    if let Value::Array(items) = &mut value {
        if items.len() != 1 {
            return Err(LabError::Schema {
                path: path.to_path_buf(),
                field: ".".into(),
                message: format!("expected one baseline, found an array of {}", items.len()),
            });
        }
        value = items.remove(0);
        prefix = "[0]".into();
    }
    if let Value::Object(map) = &mut value {
        if let Some(inner) = map.remove("baseline") {
            value = inner;
            prefix = if prefix.is_empty() { "baseline".into() } else { format!("{prefix}.baseline") };
        }
    }
    let row: BaselineRow = from_value(value, path, &prefix)?;
    let field = if prefix.is_empty() { ".".into() } else { prefix };
    row.validate().map_err(|e| invalid(path, field, e))?;
    Ok(row)
}

pub fn load_baseline(path: &Path) -> Result<BaselineRow> {
    parse_baseline(&read_text(path)?, path)
}

/// Design matrix as `city,year,<columns>,target` plus a JSON sidecar with
/// the column names, city encoding and normalization parameters.
pub fn design_to_files(design: &DesignMatrix) -> (String, String) {
    let mut header = vec!["city", "year"];
    header.extend(design.column_names().iter().map(String::as_str));
    header.push("target");
    let mut t = CsvTable::new(&header);
    for ((row, y), key) in design.rows().iter().zip(design.targets()).zip(design.keys()) {
        let mut fields = vec![key.city.clone(), key.year.to_string()];
        fields.extend(row.iter().map(|v| num(*v)));
        fields.push(num(*y));
        t.row(fields);
    }
    (t.finish(), to_json(design.transform()))
}

pub fn design_from_files(csv_text: &str, sidecar: &str, sidecar_path: &Path) -> Result<DesignMatrix> {
    let transform: DesignTransform = parse_document(sidecar, sidecar_path)?;
    let mut reader = csv::ReaderBuilder::new().from_reader(csv_text.as_bytes());
    let header = reader.headers().map_err(|e| LabError::Format {
        row: 0,
        message: e.to_string(),
    })?;
    let mut expected = vec!["city".to_string(), "year".to_string()];
    expected.extend(transform.column_names.iter().cloned());
    expected.push("target".into());
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(LabError::Header {
            expected: expected.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let (mut rows, mut targets, mut keys) = (Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| LabError::Format {
            row,
            message: e.to_string(),
        })?;
        let number = |j: usize| {
            rec[j].parse::<f64>().map_err(|_| LabError::Parse {
                row,
                column: expected[j].clone(),
                value: rec[j].into(),
                expected: "a number",
            })
        };
        let year = rec[1].parse::<i32>().map_err(|_| LabError::Parse {
            row,
            column: "year".into(),
            value: rec[1].into(),
            expected: "an integer year",
        })?;
        let values = (2..rec.len() - 1).map(number).collect::<Result<Vec<f64>>>()?;
        targets.push(number(rec.len() - 1)?);
        rows.push(values);
        keys.push(RowKey {
            city: rec[0].into(),
            year,
        });
    }
    Ok(DesignMatrix::from_parts(rows, targets, keys, transform)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use stirpat_core::features::{build_design, FeatureRow};

    fn p() -> &'static Path {
        Path::new("s.json")
    }

    const GOOD: &str = r#"{"label":"baseline","baseline":{"city":"Wuhu","year":2021,"p":3818000,"a":75001,"i":0.451,"e":0.4463},"horizon_end_year":2030,"growth":{"p":0,"a":0.05,"i":-0.01,"e":-0.02}}"#;

    #[test]
    fn scenario_object_and_array() {
        assert_eq!(parse_scenarios(GOOD, p()).unwrap().len(), 1);
        let two = format!("[{GOOD},{}]", GOOD.replace("\"baseline\",", "\"other\","));
        let specs = parse_scenarios(&two, p()).unwrap();
        assert_eq!(specs[1].label, "other");
    }

    #[test]
    fn schema_errors_name_the_field() {
        let bad = GOOD.replace("\"year\":2021", "\"year\":\"2021\"");
        match parse_scenarios(&bad, p()) {
            Err(LabError::Schema { field, .. }) => assert_eq!(field, "baseline.year"),
            other => panic!("{other:?}"),
        }
        let missing = GOOD.replace(",\"horizon_end_year\":2030", "");
        match parse_scenarios(&missing, p()) {
            Err(LabError::Schema { message, .. }) => assert!(message.contains("horizon_end_year")),
            other => panic!("{other:?}"),
        }
        let negative = GOOD.replace("\"a\":0.05", "\"a\":-1.5");
        match parse_scenarios(&negative, p()) {
            Err(e @ LabError::Schema { .. }) => {
                assert!(e.to_string().contains("growth.a"));
                assert_eq!(e.exit_code(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn baseline_from_scenario_or_bare() {
        let a = parse_baseline(GOOD, p()).unwrap();
        let b = parse_baseline(r#"{"city":"Wuhu","year":2021,"p":3818000,"a":75001,"i":0.451,"e":0.4463}"#, p()).unwrap();
        assert_eq!(a, b);
        assert!(matches!(parse_baseline("{\"city\":", p()), Err(LabError::Schema { .. })));
        assert_eq!(parse_baseline(&format!("[{GOOD}]"), p()).unwrap(), a);
        match parse_baseline(&format!("[{GOOD},{GOOD}]"), p()) {
            Err(LabError::Schema { message, .. }) => assert!(message.contains("array of 2")),
            other => panic!("{other:?}"),
        }
        let bad = GOOD.replace("\"year\":2021", "\"year\":true");
        match parse_baseline(&format!("[{bad}]"), p()) {
            Err(LabError::Schema { field, .. }) => assert_eq!(field, "[0].baseline.year"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn design_round_trip() {
        let rows: Vec<FeatureRow> = (0..6)
            .map(|k| FeatureRow {
                city: if k % 2 == 0 { "A".into() } else { "B".into() },
                year: 2000 + k / 2,
                p: 1.0e6 + 1.0e4 * f64::from(k),
                a: 3.0e4 * (1.0 + 0.1 * f64::from(k)),
                i: 0.4 + 0.01 * f64::from(k * k),
                e: 1.0e-4 / (1.0 + f64::from(k)),
                target: 1.0e7 * (1.0 + f64::from(k)),
            })
            .collect();
        let d = build_design(&rows, true, false, true).unwrap();
        let (csv_text, json) = design_to_files(&d);
        let back = design_from_files(&csv_text, &json, p()).unwrap();
        assert_eq!(back, d);
    }
}
