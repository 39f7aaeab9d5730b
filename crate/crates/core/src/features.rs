//! STIRPAT drivers and design matrices.
//!
//! Column layout of a design is always
//! `[intercept?] p a i e [city dummies...]`, with the driver columns renamed
//! `log_p` etc. under the log transform. Dummies are never logged or
//! z-scored. When an intercept is present the first city is the reference
//! level and gets no dummy column.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SplitSide};
use crate::math;
use crate::panel::PanelDataset;

pub const DRIVER_NAMES: [&str; 4] = ["p", "a", "i", "e"];
pub const INTERCEPT: &str = "intercept";

/// The four STIRPAT drivers of one city-year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drivers {
    /// Population, persons.
    pub p: f64,
    /// Affluence, CNY per capita.
    pub a: f64,
    /// Industrial structure, share of GDP in (0, 1].
    pub i: f64,
    /// Energy intensity, tce per CNY.
    pub e: f64,
}

impl Drivers {
    pub fn to_array(self) -> [f64; 4] {
        [self.p, self.a, self.i, self.e]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Drivers {
            p: v[0],
            a: v[1],
            i: v[2],
            e: v[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub city: String,
    pub year: i32,
    pub p: f64,
    pub a: f64,
    pub i: f64,
    pub e: f64,
    /// Emissions, tons CO2.
    pub target: f64,
}

impl FeatureRow {
    pub fn drivers(&self) -> Drivers {
        Drivers {
            p: self.p,
            a: self.a,
            i: self.i,
            e: self.e,
        }
    }
}

/// One feature row per record. The dataset is expected to be valid
/// (see [`crate::panel::validate_dataset`]).
pub fn derive_features(ds: &PanelDataset) -> Vec<FeatureRow> {
    ds.records()
        .iter()
        .map(|r| FeatureRow {
            city: r.city.clone(),
            year: r.year,
            p: r.population,
            a: r.gdp / r.population,
            i: r.gdp_ind / r.gdp,
            e: r.energy / r.gdp,
            target: r.co2,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DesignOptions {
    pub with_city: bool,
    pub log_transform: bool,
    pub normalize: bool,
    /// Prepend a column of ones and drop the first city's dummy.
    pub intercept: bool,
}

/// Mean and population standard deviation of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: f64,
    pub sd: f64,
}

impl ColumnScaling {
    fn fit(column: &str, values: impl Iterator<Item = f64> + Clone) -> Result<Self> {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = math::sqrt(var);
        if !(sd > 1e-12 * mean.abs()) || !sd.is_finite() {
            return Err(Error::DegenerateColumn {
                column: column.to_string(),
            });
        }
        Ok(ColumnScaling { mean, sd })
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }

    #[inline]
    pub fn invert(&self, z: f64) -> f64 {
        z * self.sd + self.mean
    }
}

/// Z-score parameters, one slot per design column (`None` for the intercept
/// and for dummies) plus the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    None,
    ZScore {
        columns: Vec<Option<ColumnScaling>>,
        target: Option<ColumnScaling>,
    },
}

impl Normalization {
    pub fn apply_row(&self, row: &mut [f64]) {
        if let Normalization::ZScore { columns, .. } = self {
            for (v, s) in row.iter_mut().zip(columns) {
                if let Some(s) = s {
                    *v = s.apply(*v);
                }
            }
        }
    }

    pub fn invert_row(&self, row: &mut [f64]) {
        if let Normalization::ZScore { columns, .. } = self {
            for (v, s) in row.iter_mut().zip(columns) {
                if let Some(s) = s {
                    *v = s.invert(*v);
                }
            }
        }
    }

    pub fn target(&self) -> Option<&ColumnScaling> {
        match self {
            Normalization::ZScore { target, .. } => target.as_ref(),
            Normalization::None => None,
        }
    }

    pub fn is_active(&self) -> bool {
        matches!(self, Normalization::ZScore { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CityEncoding {
    None,
    /// `cities[k]` owns dummy column `k` (shifted by one when the reference
    /// level is dropped).
    OneHot {
        cities: Vec<String>,
        reference_dropped: bool,
    },
}

/// Everything needed to turn a city plus drivers into a design row, and a
/// model output back into tons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTransform {
    pub options: DesignOptions,
    pub column_names: Vec<String>,
    pub city_encoding: CityEncoding,
    pub normalization: Normalization,
}

impl DesignTransform {
    pub fn ncols(&self) -> usize {
        self.column_names.len()
    }

    pub fn knows_city(&self, city: &str) -> bool {
        match &self.city_encoding {
            CityEncoding::None => true,
            CityEncoding::OneHot { cities, .. } => cities.iter().any(|c| c == city),
        }
    }

    /// Design row before z-scoring: intercept, (logged) drivers, dummies.
    pub fn raw_row(&self, city: &str, d: &Drivers) -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(self.ncols());
        if self.options.intercept {
            row.push(1.0);
        }
        for v in d.to_array() {
            row.push(if self.options.log_transform { math::ln(v) } else { v });
        }
        if let CityEncoding::OneHot {
            cities,
            reference_dropped,
        } = &self.city_encoding
        {
            let pos = cities
                .iter()
                .position(|c| c == city)
                .ok_or_else(|| Error::UnknownCity(city.to_string()))?;
            let skip = usize::from(*reference_dropped);
            for k in skip..cities.len() {
                row.push(if k == pos { 1.0 } else { 0.0 });
            }
        }
        Ok(row)
    }

    /// Design row exactly as the model saw it during training.
    pub fn encode(&self, city: &str, d: &Drivers) -> Result<Vec<f64>> {
        let mut row = self.raw_row(city, d)?;
        self.normalization.apply_row(&mut row);
        Ok(row)
    }

    /// Tons to model scale.
    pub fn encode_target(&self, y: f64) -> f64 {
        let y = if self.options.log_transform { math::ln(y) } else { y };
        match self.normalization.target() {
            Some(s) => s.apply(y),
            None => y,
        }
    }

    /// Model scale back to tons. No retransformation correction is applied
    /// after the log: exp(E[log C]) underestimates E[C] when residuals are
    /// spread out.
    pub fn decode_target(&self, z: f64) -> f64 {
        let y = match self.normalization.target() {
            Some(s) => s.invert(z),
            None => z,
        };
        if self.options.log_transform {
            math::exp(y)
        } else {
            y
        }
    }
}

/// (city, year) key of a design row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub city: String,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    keys: Vec<RowKey>,
    transform: DesignTransform,
}

impl DesignMatrix {
    /// Wraps an already-encoded matrix with no normalization and no city
    /// encoding. Keys are synthesised from the row index.
    pub fn from_raw(rows: Vec<Vec<f64>>, targets: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: targets.len(),
            });
        }
        let width = column_names.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Layout {
                expected: width,
                found: bad.len(),
            });
        }
        let intercept = column_names.first().is_some_and(|c| c == INTERCEPT);
        let keys = (0..rows.len())
            .map(|k| RowKey {
                city: String::new(),
                year: k as i32,
            })
            .collect();
        Ok(DesignMatrix {
            rows,
            targets,
            keys,
            transform: DesignTransform {
                options: DesignOptions {
                    intercept,
                    ..DesignOptions::default()
                },
                column_names,
                city_encoding: CityEncoding::None,
                normalization: Normalization::None,
            },
        })
    }

    /// Reassembles a design from stored pieces, e.g. a CSV body and its
    /// transform sidecar.
    pub fn from_parts(
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        keys: Vec<RowKey>,
        transform: DesignTransform,
    ) -> Result<Self> {
        if rows.len() != targets.len() || rows.len() != keys.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: if rows.len() != targets.len() { targets.len() } else { keys.len() },
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != transform.ncols()) {
            return Err(Error::Layout {
                expected: transform.ncols(),
                found: bad.len(),
            });
        }
        Ok(DesignMatrix {
            rows,
            targets,
            keys,
            transform,
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    pub fn column_names(&self) -> &[String] {
        &self.transform.column_names
    }

    pub fn transform(&self) -> &DesignTransform {
        &self.transform
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.transform.ncols()
    }

    /// Encodes new rows with this design's stored parameters. Cities not
    /// seen when the design was built are rejected.
    pub fn apply_to(&self, rows: &[FeatureRow]) -> Result<DesignMatrix> {
        encode_rows(&self.transform, rows)
    }
}

fn encode_rows(transform: &DesignTransform, rows: &[FeatureRow]) -> Result<DesignMatrix> {
    let mut out = Vec::with_capacity(rows.len());
    let mut targets = Vec::with_capacity(rows.len());
    let mut keys = Vec::with_capacity(rows.len());
    for r in rows {
        out.push(transform.encode(&r.city, &r.drivers())?);
        targets.push(transform.encode_target(r.target));
        keys.push(RowKey {
            city: r.city.clone(),
            year: r.year,
        });
    }
    Ok(DesignMatrix {
        rows: out,
        targets,
        keys,
        transform: transform.clone(),
    })
}

/// [`build_design_with`] without an intercept column.
pub fn build_design(
    rows: &[FeatureRow],
    with_city: bool,
    log_transform: bool,
    normalize: bool,
) -> Result<DesignMatrix> {
    build_design_with(
        rows,
        DesignOptions {
            with_city,
            log_transform,
            normalize,
            intercept: false,
        },
    )
}

pub fn build_design_with(rows: &[FeatureRow], options: DesignOptions) -> Result<DesignMatrix> {
    if rows.is_empty() {
        return Err(Error::Empty("design needs at least one row"));
    }
    let mut column_names = Vec::new();
    if options.intercept {
        column_names.push(INTERCEPT.to_string());
    }
    for name in DRIVER_NAMES {
        column_names.push(if options.log_transform {
            format!("log_{name}")
        } else {
            name.to_string()
        });
    }
    let city_encoding = if options.with_city {
        let mut cities: Vec<String> = Vec::new();
        for r in rows {
            if !cities.contains(&r.city) {
                cities.push(r.city.clone());
            }
        }
        let skip = usize::from(options.intercept);
        column_names.extend(cities.iter().skip(skip).map(|c| format!("city:{c}")));
        CityEncoding::OneHot {
            cities,
            reference_dropped: options.intercept,
        }
    } else {
        CityEncoding::None
    };

    let mut transform = DesignTransform {
        options,
        column_names,
        city_encoding,
        normalization: Normalization::None,
    };

    if options.normalize {
        let raw: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| transform.raw_row(&r.city, &r.drivers()))
            .collect::<Result<_>>()?;
        let first = usize::from(options.intercept);
        let mut columns = Vec::with_capacity(transform.ncols());
        for k in 0..transform.ncols() {
            if k < first || k >= first + DRIVER_NAMES.len() {
                columns.push(None);
            } else {
                let s = ColumnScaling::fit(&transform.column_names[k], raw.iter().map(|r| r[k]))?;
                columns.push(Some(s));
            }
        }
        let target = if options.log_transform {
            None
        } else {
            Some(ColumnScaling::fit("target", rows.iter().map(|r| r.target))?)
        };
        transform.normalization = Normalization::ZScore { columns, target };
    }

    encode_rows(&transform, rows)
}

/// Partitions rows into `year <= last_train_year` and the rest, keeping
/// order.
pub fn split_by_year(rows: &[FeatureRow], last_train_year: i32) -> Result<(Vec<FeatureRow>, Vec<FeatureRow>)> {
    if rows.is_empty() {
        return Err(Error::Empty("nothing to split"));
    }
    let (train, test): (Vec<_>, Vec<_>) = rows.iter().cloned().partition(|r| r.year <= last_train_year);
    if train.is_empty() {
        return Err(Error::EmptySplit {
            side: SplitSide::Train,
            last_train_year,
        });
    }
    if test.is_empty() {
        return Err(Error::EmptySplit {
            side: SplitSide::Test,
            last_train_year,
        });
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelRecord;
    use alloc::vec;

    fn row(city: &str, year: i32, p: f64, a: f64, i: f64, e: f64, target: f64) -> FeatureRow {
        FeatureRow {
            city: city.into(),
            year,
            p,
            a,
            i,
            e,
            target,
        }
    }

    fn record(gdp: f64, population: f64, gdp_ind: f64) -> PanelRecord {
        PanelRecord {
            city: "Wuhu".into(),
            year: 2021,
            co2: 3.0e7,
            population,
            gdp,
            gdp_ind,
            energy: 0.5 * gdp,
        }
    }

    #[test]
    fn affluence_is_gdp_per_capita() {
        let ds = PanelDataset::from_records(vec![record(100.0, 10.0, 40.0)]).unwrap();
        let f = derive_features(&ds);
        assert_eq!(f[0].a, 10.0);
        assert_eq!(f[0].i, 0.4);
        assert_eq!(f[0].e, 0.5);
        assert_eq!(f[0].target, 3.0e7);
    }

    #[test]
    fn industry_share_one_when_all_gdp_is_industrial() {
        let ds = PanelDataset::from_records(vec![record(100.0, 10.0, 100.0)]).unwrap();
        assert_eq!(derive_features(&ds)[0].i, 1.0);
    }

    #[test]
    fn wuhu_baseline_affluence_identity() {
        let p = 3_818_000.0;
        let ds = PanelDataset::from_records(vec![record(75_001.0 * p, p, 0.451 * 75_001.0 * p)]).unwrap();
        let f = &derive_features(&ds)[0];
        assert!((f.a - 75_001.0).abs() <= 75_001.0 * 1e-12);
        assert!((f.a * f.p - 75_001.0 * p).abs() <= 75_001.0 * p * 1e-12);
    }

    #[test]
    fn city_columns_follow_drivers() {
        let rows = vec![
            row("B", 2005, 1.0, 2.0, 0.5, 0.1, 1.0),
            row("A", 2005, 2.0, 3.0, 0.4, 0.2, 2.0),
        ];
        let d = build_design(&rows, true, false, false).unwrap();
        assert_eq!(d.column_names(), &["p", "a", "i", "e", "city:B", "city:A"]);
        assert_eq!(d.rows()[0], vec![1.0, 2.0, 0.5, 0.1, 1.0, 0.0]);
        assert_eq!(d.rows()[1][4..], [0.0, 1.0]);
    }

    #[test]
    fn intercept_drops_reference_city() {
        let rows = vec![
            row("B", 2005, 1.0, 2.0, 0.5, 0.1, 1.0),
            row("A", 2005, 2.0, 3.0, 0.4, 0.2, 2.0),
        ];
        let opts = DesignOptions {
            with_city: true,
            log_transform: true,
            normalize: false,
            intercept: true,
        };
        let d = build_design_with(&rows, opts).unwrap();
        assert_eq!(
            d.column_names(),
            &["intercept", "log_p", "log_a", "log_i", "log_e", "city:A"]
        );
        assert_eq!(d.rows()[0][5], 0.0);
        assert_eq!(d.rows()[1][5], 1.0);
        assert_eq!(d.targets()[1], math::ln(2.0));
    }

    #[test]
    fn log_transform_of_e_squared_is_two() {
        let rows = vec![row("A", 2005, 1.0, math::exp(2.0), 0.5, 0.1, 1.0)];
        let d = build_design(&rows, false, true, false).unwrap();
        assert!((d.rows()[0][1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zscore_uses_population_sd() {
        let rows = vec![
            row("A", 2005, 1.0, 1.0, 0.2, 0.1, 1.0),
            row("A", 2006, 3.0, 2.0, 0.3, 0.3, 5.0),
        ];
        let d = build_design(&rows, false, false, true).unwrap();
        assert_eq!(d.rows()[0][0], -1.0);
        assert_eq!(d.rows()[1][0], 1.0);
        assert_eq!(d.targets(), &[-1.0, 1.0]);
    }

    #[test]
    fn dummies_are_not_normalized() {
        let rows = vec![
            row("A", 2005, 1.0, 1.0, 0.2, 0.1, 1.0),
            row("B", 2006, 3.0, 2.0, 0.3, 0.3, 5.0),
        ];
        let d = build_design(&rows, true, false, true).unwrap();
        assert_eq!(d.rows()[0][4..], [1.0, 0.0]);
        match &d.transform().normalization {
            Normalization::ZScore { columns, .. } => {
                assert!(columns[..4].iter().all(Option::is_some));
                assert!(columns[4..].iter().all(Option::is_none));
            }
            Normalization::None => panic!("expected z-score"),
        }
    }

    #[test]
    fn log_normalized_target_is_not_zscored() {
        let rows = vec![
            row("A", 2005, 1.0, 1.0, 0.2, 0.1, 1.0),
            row("A", 2006, 3.0, 2.0, 0.3, 0.3, math::exp(1.0)),
        ];
        let d = build_design(&rows, false, true, true).unwrap();
        assert_eq!(d.targets()[0], 0.0);
        assert!((d.targets()[1] - 1.0).abs() < 1e-15);
        assert!(d.transform().normalization.target().is_none());
    }

    #[test]
    fn constant_column_is_degenerate_under_normalize() {
        let rows = vec![
            row("A", 2005, 1.0, 1.0, 0.5, 0.1, 1.0),
            row("A", 2006, 3.0, 2.0, 0.5, 0.3, 5.0),
        ];
        let err = build_design(&rows, false, false, true).unwrap_err();
        assert_eq!(err, Error::DegenerateColumn { column: "i".into() });
        // without normalization the same rows are fine
        assert!(build_design(&rows, false, false, false).is_ok());
    }

    #[test]
    fn unseen_city_is_rejected_on_apply() {
        let train = vec![row("A", 2005, 1.0, 1.0, 0.2, 0.1, 1.0)];
        let d = build_design(&train, true, false, false).unwrap();
        let test = vec![row("Z", 2006, 1.0, 1.0, 0.2, 0.1, 1.0)];
        assert_eq!(d.apply_to(&test).unwrap_err(), Error::UnknownCity("Z".into()));
        let pooled = build_design(&train, false, false, false).unwrap();
        assert!(pooled.apply_to(&test).is_ok());
    }

    #[test]
    fn empty_design_is_an_error() {
        assert!(matches!(build_design(&[], false, false, false), Err(Error::Empty(_))));
    }

    fn years(range: core::ops::RangeInclusive<i32>) -> Vec<FeatureRow> {
        range.map(|y| row("A", y, 1.0, 1.0, 0.5, 0.1, 1.0)).collect()
    }

    #[test]
    fn split_holds_out_the_last_two_years() {
        let (train, test) = split_by_year(&years(2005..=2019), 2017).unwrap();
        assert_eq!(train.len(), 13);
        assert_eq!(test.iter().map(|r| r.year).collect::<Vec<_>>(), vec![2018, 2019]);
    }

    #[test]
    fn split_with_empty_side_fails() {
        let rows = years(2005..=2019);
        assert_eq!(
            split_by_year(&rows, 2019).unwrap_err(),
            Error::EmptySplit {
                side: SplitSide::Test,
                last_train_year: 2019
            }
        );
        assert_eq!(
            split_by_year(&rows, 2000).unwrap_err(),
            Error::EmptySplit {
                side: SplitSide::Train,
                last_train_year: 2000
            }
        );
    }

    #[test]
    fn split_one_and_one() {
        let (train, test) = split_by_year(&years(2010..=2011), 2010).unwrap();
        assert_eq!((train.len(), test.len()), (1, 1));
    }
}
