//! CSV tables written by the commands.

use stirpat_core::protocol::{PredictionRow, ScatterRow};
use stirpat_core::scenario::{PathPoint, SensitivityRow};

/// Shortest decimal form that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// In-memory CSV builder with a fixed header.
pub struct CsvTable {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        CsvTable { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("writing to memory");
    }

    pub fn finish(self) -> String {
        let bytes = self.writer.into_inner().expect("writing to memory");
        String::from_utf8(bytes).expect("fields are UTF-8")
    }
}

pub fn scatter_csv(rows: &[ScatterRow]) -> String {
    let mut t = CsvTable::new(&["method", "variant", "city", "year", "actual", "fitted"]);
    for r in rows {
        t.row([
            r.method.name().to_string(),
            r.variant.name().to_string(),
            r.city.clone(),
            r.year.to_string(),
            num(r.actual),
            num(r.fitted),
        ]);
    }
    t.finish()
}

pub fn prediction_csv(rows: &[PredictionRow]) -> String {
    let mut t = CsvTable::new(&["method", "variant", "city", "year", "actual", "predicted"]);
    for r in rows {
        t.row([
            r.method.name().to_string(),
            r.variant.name().to_string(),
            r.city.clone(),
            r.year.to_string(),
            num(r.actual),
            num(r.predicted),
        ]);
    }
    t.finish()
}

pub fn path_csv(path: &[PathPoint]) -> String {
    let mut t = CsvTable::new(&["year", "p", "a", "i", "e", "forecast_tons", "extrapolated"]);
    for pt in path {
        let d = pt.drivers;
        t.row([
            pt.year.to_string(),
            num(d.p),
            num(d.a),
            num(d.i),
            num(d.e),
            num(pt.forecast),
            pt.extrapolated.to_string(),
        ]);
    }
    t.finish()
}

pub fn sensitivity_csv(rows: &[SensitivityRow]) -> String {
    let mut t = CsvTable::new(&["situation", "p", "a", "i", "e", "forecast_tons"]);
    for r in rows {
        let d = r.drivers;
        t.row([r.situation.clone(), num(d.p), num(d.a), num(d.i), num(d.e), num(r.forecast)]);
    }
    t.finish()
}
