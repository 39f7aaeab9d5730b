//! Raw city-year panel records.
//!
//! A [`PanelRecord`] holds the five observed quantities for one city and
//! year. Prices are expected at constant 2005 CNY; deflation is the data
//! supplier's job and is not checked here beyond positivity.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation of a city in a year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub city: String,
    pub year: i32,
    /// Emissions, tons CO2.
    pub co2: f64,
    /// Persons.
    pub population: f64,
    /// CNY, constant 2005 prices.
    pub gdp: f64,
    /// Secondary-industry value added, CNY, constant 2005 prices.
    pub gdp_ind: f64,
    /// Tons of standard coal equivalent.
    pub energy: f64,
}

/// Inclusive range of admissible calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub first: i32,
    pub last: i32,
}

impl Default for YearRange {
    fn default() -> Self {
        YearRange {
            first: 1990,
            last: 2100,
        }
    }
}

impl YearRange {
    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }
}

/// An unbalanced panel with unique `(city, year)` keys.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<PanelRecord>", into = "Vec<PanelRecord>")]
pub struct PanelDataset {
    records: Vec<PanelRecord>,
    cities: Vec<String>,
    years: Vec<i32>,
}

impl PanelDataset {
    /// Builds a dataset, keeping record order. Cities are listed in order of
    /// first appearance and years sorted ascending.
    pub fn from_records(records: Vec<PanelRecord>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut cities: Vec<String> = Vec::new();
        let mut years = BTreeSet::new();
        for r in &records {
            if !seen.insert((r.city.as_str(), r.year)) {
                return Err(Error::DuplicateKey {
                    city: r.city.clone(),
                    year: r.year,
                });
            }
            if !cities.iter().any(|c| c == &r.city) {
                cities.push(r.city.clone());
            }
            years.insert(r.year);
        }
        Ok(PanelDataset {
            cities,
            years: years.into_iter().collect(),
            records,
        })
    }

    pub fn records(&self) -> &[PanelRecord] {
        &self.records
    }

    pub fn cities(&self) -> &[String] {
        &self.cities
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<PanelRecord> {
        self.records
    }
}

impl TryFrom<Vec<PanelRecord>> for PanelDataset {
    type Error = Error;

    fn try_from(records: Vec<PanelRecord>) -> Result<Self> {
        PanelDataset::from_records(records)
    }
}

impl From<PanelDataset> for Vec<PanelRecord> {
    fn from(ds: PanelDataset) -> Self {
        ds.records
    }
}

/// Names a numeric column of [`PanelRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Field {
    Co2,
    Population,
    Gdp,
    GdpInd,
    Energy,
}

impl Field {
    pub const ALL: [Field; 5] = [
        Field::Co2,
        Field::Population,
        Field::Gdp,
        Field::GdpInd,
        Field::Energy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Co2 => "co2",
            Field::Population => "population",
            Field::Gdp => "gdp",
            Field::GdpInd => "gdp_ind",
            Field::Energy => "energy",
        }
    }

    pub fn get(self, r: &PanelRecord) -> f64 {
        match self {
            Field::Co2 => r.co2,
            Field::Population => r.population,
            Field::Gdp => r.gdp,
            Field::GdpInd => r.gdp_ind,
            Field::Energy => r.energy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ViolationKind {
    NotPositive { field: Field, value: f64 },
    IndustryExceedsGdp { gdp_ind: f64, gdp: f64 },
    YearOutOfRange { range: YearRange },
}

/// A broken record invariant. `index` is the position in `records()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub city: String,
    pub year: i32,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}): ", self.city, self.year)?;
        match &self.kind {
            ViolationKind::NotPositive { field, value } => {
                write!(f, "{} must be > 0, got {}", field.name(), value)
            }
            ViolationKind::IndustryExceedsGdp { gdp_ind, gdp } => {
                write!(f, "gdp_ind {gdp_ind} exceeds gdp {gdp}")
            }
            ViolationKind::YearOutOfRange { range } => {
                write!(f, "year outside {}..={}", range.first, range.last)
            }
        }
    }
}

/// Lists every record-invariant violation under the default year range.
pub fn validate_dataset(ds: &PanelDataset) -> Vec<Violation> {
    validate_dataset_in(ds, YearRange::default())
}

pub fn validate_dataset_in(ds: &PanelDataset, range: YearRange) -> Vec<Violation> {
    let mut out = Vec::new();
    for (index, r) in ds.records().iter().enumerate() {
        let mut push = |kind| {
            out.push(Violation {
                index,
                city: r.city.clone(),
                year: r.year,
                kind,
            })
        };
        // NaN fails `> 0.0` as well
        for field in Field::ALL {
            let value = field.get(r);
            if !(value > 0.0 && value.is_finite()) {
                push(ViolationKind::NotPositive { field, value });
            }
        }
        if r.gdp_ind > r.gdp {
            push(ViolationKind::IndustryExceedsGdp {
                gdp_ind: r.gdp_ind,
                gdp: r.gdp,
            });
        }
        if !range.contains(r.year) {
            push(ViolationKind::YearOutOfRange { range });
        }
    }
    out
}
