//! Driver sensitivity and compounded what-if paths.
//!
//! All changes are multiplicative, including for the industry share `I`:
//! "+1%" means `I × 1.01`, not one percentage point.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Drivers;
use crate::math;
use crate::model::{DriverRange, FittedModel};

/// Anything that maps a city and its drivers to tons of CO2.
pub trait Forecaster {
    fn forecast(&self, city: &str, drivers: &Drivers) -> Result<f64>;

    /// Fails when the model cannot handle `city` at all.
    fn check_city(&self, _city: &str) -> Result<()> {
        Ok(())
    }

    /// Driver range seen in training for `city`, if known.
    fn observed_range(&self, _city: &str) -> Option<DriverRange> {
        None
    }
}

impl Forecaster for FittedModel {
    fn forecast(&self, city: &str, drivers: &Drivers) -> Result<f64> {
        self.predict(city, drivers)
    }

    fn check_city(&self, city: &str) -> Result<()> {
        FittedModel::check_city(self, city)
    }

    fn observed_range(&self, city: &str) -> Option<DriverRange> {
        Some(*FittedModel::observed_range(self, city))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    P,
    A,
    I,
    E,
}

impl Driver {
    pub const ALL: [Driver; 4] = [Driver::P, Driver::A, Driver::I, Driver::E];

    pub fn label(self) -> &'static str {
        match self {
            Driver::P => "P",
            Driver::A => "A",
            Driver::I => "I",
            Driver::E => "E",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineRow {
    pub city: String,
    pub year: i32,
    pub p: f64,
    pub a: f64,
    pub i: f64,
    pub e: f64,
}

impl BaselineRow {
    pub fn drivers(&self) -> Drivers {
        Drivers {
            p: self.p,
            a: self.a,
            i: self.i,
            e: self.e,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("a", self.a), ("e", self.e)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Scenario(format!("baseline.{name} must be positive, got {v}")));
            }
        }
        if !(self.i > 0.0 && self.i <= 1.0) {
            return Err(Error::Scenario(format!("baseline.i must lie in (0, 1], got {}", self.i)));
        }
        Ok(())
    }
}

/// Annual growth rates as fractions (`-0.02` is a 2% yearly decrease).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthRates {
    pub p: f64,
    pub a: f64,
    pub i: f64,
    pub e: f64,
}

impl GrowthRates {
    fn to_array(self) -> [f64; 4] {
        [self.p, self.a, self.i, self.e]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub label: String,
    pub baseline: BaselineRow,
    pub horizon_end_year: i32,
    pub growth: GrowthRates,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.baseline.validate()?;
        if self.horizon_end_year <= self.baseline.year {
            return Err(Error::Scenario(format!(
                "horizon_end_year {} must be after baseline.year {}",
                self.horizon_end_year, self.baseline.year
            )));
        }
        for (name, g) in ["p", "a", "i", "e"].into_iter().zip(self.growth.to_array()) {
            if !(g > -1.0 && g.is_finite()) {
                return Err(Error::Scenario(format!("growth.{name} must be greater than -1, got {g}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    /// `Baseline` or e.g. `P×101%`.
    pub situation: String,
    pub driver: Option<Driver>,
    pub drivers: Drivers,
    pub forecast: f64,
    /// Forecast minus the baseline forecast.
    pub delta: f64,
    /// `delta` as a percentage of the baseline forecast.
    pub delta_pct: f64,
}

fn percent_label(epsilon: f64) -> String {
    let pct = math::round((1.0 + epsilon) * 100.0 * 1e6) / 1e6;
    format!("{pct}%")
}

/// Baseline forecast, then one row per driver with only that driver scaled
/// by `1 + epsilon`.
pub fn sensitivity<F: Forecaster + ?Sized>(
    model: &F,
    baseline: &BaselineRow,
    epsilon: f64,
) -> Result<Vec<SensitivityRow>> {
    model.check_city(&baseline.city)?;
    if !(epsilon > -1.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be greater than -1, got {epsilon}")));
    }
    let base = baseline.drivers();
    let base_forecast = model.forecast(&baseline.city, &base)?;
    let mut rows = Vec::with_capacity(5);
    rows.push(SensitivityRow {
        situation: "Baseline".into(),
        driver: None,
        drivers: base,
        forecast: base_forecast,
        delta: 0.0,
        delta_pct: 0.0,
    });
    let pct = percent_label(epsilon);
    for driver in Driver::ALL {
        let mut v = base.to_array();
        v[driver.index()] *= 1.0 + epsilon;
        let drivers = Drivers::from_array(v);
        let forecast = model.forecast(&baseline.city, &drivers)?;
        let delta = forecast - base_forecast;
        rows.push(SensitivityRow {
            situation: format!("{}×{}", driver.label(), pct),
            driver: Some(driver),
            drivers,
            forecast,
            delta,
            delta_pct: 100.0 * delta / base_forecast,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub year: i32,
    pub drivers: Drivers,
    pub forecast: f64,
    /// Some driver lies outside the range observed in training for this city.
    pub extrapolated: bool,
}

/// Years `baseline.year + 1 ..= horizon_end_year` with
/// `driver_t = driver_0 (1 + g)^t`.
pub fn forecast_path<F: Forecaster + ?Sized>(model: &F, spec: &ScenarioSpec) -> Result<Vec<PathPoint>> {
    spec.validate()?;
    let city = &spec.baseline.city;
    model.check_city(city)?;
    let range = model.observed_range(city);
    let base = spec.baseline.drivers().to_array();
    let growth = spec.growth.to_array();
    let steps = spec.horizon_end_year - spec.baseline.year;
    let mut path = Vec::with_capacity(steps as usize);
    for t in 1..=steps {
        let mut v = base;
        for k in 0..4 {
            v[k] *= math::powi(1.0 + growth[k], t);
        }
        let drivers = Drivers::from_array(v);
        let year = spec.baseline.year + t;
        let forecast = model.forecast(city, &drivers)?;
        if !forecast.is_finite() {
            return Err(Error::NonFinite { year });
        }
        path.push(PathPoint {
            year,
            drivers,
            forecast,
            extrapolated: range.is_some_and(|r| !r.contains(&drivers)),
        });
    }
    Ok(path)
}

/// Year of the global maximum (earliest on ties), or `None` when the
/// maximum sits at the last year.
pub fn detect_peak(path: &[(i32, f64)]) -> Option<i32> {
    let (mut best_k, mut best) = (0, path.first()?.1);
    for (k, &(_, v)) in path.iter().enumerate().skip(1) {
        if v > best {
            best = v;
            best_k = k;
        }
    }
    if best_k + 1 == path.len() {
        None
    } else {
        Some(path[best_k].0)
    }
}

/// [`detect_peak`] over a forecast path.
pub fn path_peak(path: &[PathPoint]) -> Option<i32> {
    let series: Vec<(i32, f64)> = path.iter().map(|p| (p.year, p.forecast)).collect();
    detect_peak(&series)
}
