//! Panel CSV files.
//!
//! ```text
//! city,year,co2_tons,population,gdp_cny2005,gdp_ind_cny2005,energy_tce
//! Wuhu,2006,21500000,2300000,52000000000,26000000000,5100000
//! ```
//!
//! An empty cell is a missing value. Rows with a missing value are set
//! aside as rejects instead of failing the whole file. Row numbers count
//! data rows from 1, not counting the header.

use std::collections::HashSet;
use std::path::Path;

use stirpat_core::panel::{PanelDataset, PanelRecord};

use crate::error::{LabError, Result};
use crate::fsutil::read_text;
use crate::tables::{num, CsvTable};

pub const HEADER: [&str; 7] = [
    "city",
    "year",
    "co2_tons",
    "population",
    "gdp_cny2005",
    "gdp_ind_cny2005",
    "energy_tce",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPanel {
    pub dataset: PanelDataset,
    pub rejects: Vec<Reject>,
}

impl ParsedPanel {
    pub fn data_rows(&self) -> usize {
        self.dataset.len() + self.rejects.len()
    }
}

pub fn parse_panel_csv(text: &str) -> Result<ParsedPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader.headers().map_err(|e| LabError::Format {
        row: 0,
        message: e.to_string(),
    })?;
    if header.iter().ne(HEADER) {
        return Err(LabError::Header {
            expected: HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    let mut seen = HashSet::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| LabError::Format {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != HEADER.len() {
            return Err(LabError::Format {
                row,
                message: format!("expected {} fields, found {}", HEADER.len(), rec.len()),
            });
        }
        let missing: Vec<&str> = HEADER.iter().zip(rec.iter()).filter(|(_, v)| v.is_empty()).map(|(h, _)| *h).collect();
        if !missing.is_empty() {
            rejects.push(Reject {
                row,
                reason: format!("missing {}", missing.join(" ")),
            });
            continue;
        }

        let city = rec[0].to_string();
        let year: i32 = rec[1].parse().map_err(|_| LabError::Parse {
            row,
            column: HEADER[1].into(),
            value: rec[1].into(),
            expected: "an integer year",
        })?;
        let mut v = [0.0; 5];
        for (j, slot) in v.iter_mut().enumerate() {
            let raw = &rec[j + 2];
            *slot = raw
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| LabError::Parse {
                    row,
                    column: HEADER[j + 2].into(),
                    value: raw.into(),
                    expected: "a finite number",
                })?;
        }
        if !seen.insert((city.clone(), year)) {
            return Err(LabError::DuplicateKey { row, city, year });
        }
        records.push(PanelRecord {
            city,
            year,
            co2: v[0],
            population: v[1],
            gdp: v[2],
            gdp_ind: v[3],
            energy: v[4],
        });
    }

    Ok(ParsedPanel {
        dataset: PanelDataset::from_records(records)?,
        rejects,
    })
}

pub fn read_panel(path: &Path) -> Result<ParsedPanel> {
    parse_panel_csv(&read_text(path)?)
}

/// Renders a dataset in the input format. Numbers use the shortest
/// representation that parses back to the same value.
pub fn write_panel_csv(ds: &PanelDataset) -> String {
    let mut t = CsvTable::new(&HEADER);
    for r in ds.records() {
        t.row([
            r.city.clone(),
            r.year.to_string(),
            num(r.co2),
            num(r.population),
            num(r.gdp),
            num(r.gdp_ind),
            num(r.energy),
        ]);
    }
    t.finish()
}

pub fn write_rejects_csv(rejects: &[Reject]) -> String {
    let mut t = CsvTable::new(&["row", "reason"]);
    for r in rejects {
        t.row([r.row.to_string(), r.reason.clone()]);
    }
    t.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "city,year,co2_tons,population,gdp_cny2005,gdp_ind_cny2005,energy_tce\n";

    #[test]
    fn three_rows_one_city() {
        let text = format!(
            "{HEAD}Wuhu,2006,2.1e7,2300000,5.2e10,2.6e10,5100000\n\
             Wuhu,2007,2.2e7,2310000,5.9e10,3.0e10,5300000\n\
             Wuhu,2008,2.4e7,2320000,6.6e10,3.4e10,5600000\n"
        );
        let p = parse_panel_csv(&text).unwrap();
        assert_eq!(p.dataset.len(), 3);
        assert_eq!(p.dataset.cities(), ["Wuhu"]);
        assert!(p.rejects.is_empty());
    }

    #[test]
    fn missing_emissions_are_rejected_not_fatal() {
        let text = format!(
            "{HEAD}Wuhu,2005,,2290000,4.6e10,2.2e10,4900000\n\
             Wuhu,2006,2.1e7,2300000,5.2e10,2.6e10,5100000\n"
        );
        let p = parse_panel_csv(&text).unwrap();
        assert_eq!(p.dataset.len(), 1);
        assert_eq!(
            p.rejects,
            [Reject {
                row: 1,
                reason: "missing co2_tons".into()
            }]
        );
        assert_eq!(p.data_rows(), 2);
    }

    #[test]
    fn duplicate_key_names_the_pair() {
        let text = format!(
            "{HEAD}Wuhu,2010,1,1,1,1,1\n\
             Wuhu,2010,1,1,1,1,1\n"
        );
        match parse_panel_csv(&text) {
            Err(LabError::DuplicateKey { row, city, year }) => {
                assert_eq!((row, city.as_str(), year), (2, "Wuhu", 2010));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_header_and_bad_number() {
        assert!(matches!(
            parse_panel_csv("city,year,co2\nA,2000,1\n"),
            Err(LabError::Header { .. })
        ));
        match parse_panel_csv(&format!("{HEAD}A,2000,1,2,3,4,1,000\n")) {
            Err(LabError::Format { row: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_panel_csv(&format!("{HEAD}A,2000,1,two,3,2,1\n")) {
            Err(LabError::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (1, "population")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let text = format!("{HEAD}\"Ma, anshan\",2006,21500000.25,2300000,52000000000,26000000000,5100000\n");
        let p = parse_panel_csv(&text).unwrap();
        let again = write_panel_csv(&p.dataset);
        assert_eq!(parse_panel_csv(&again).unwrap(), p);
        assert_eq!(write_panel_csv(&parse_panel_csv(&again).unwrap().dataset), again);
    }
}
