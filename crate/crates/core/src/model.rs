//! A fitted regressor of any of the four kinds behind one predict contract:
//! city plus raw drivers in, tons of CO2 out.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::features::Drivers;
use crate::features::{build_design_with, DesignOptions, DesignTransform, FeatureRow};
use crate::forest::{ForestModel, ForestParams};
use crate::kernel::{BandwidthPolicy, KernelModel};
use crate::linreg::{fit_ols, predict_ols, OlsModel};
use crate::nn::{predict_mlp, train_mlp, Activation, MlpModel, MlpSpec, TrainingSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Linear,
    Kernel,
    Forest,
    Nn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Linear, Method::Kernel, Method::Forest, Method::Nn];

    pub fn name(self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::Kernel => "kernel",
            Method::Forest => "forest",
            Method::Nn => "nn",
        }
    }

    /// How a design is prepared for this method.
    pub fn design_options(self, variant: Variant) -> DesignOptions {
        let with_city = variant == Variant::CityDifferences;
        match self {
            Method::Linear => DesignOptions {
                with_city,
                log_transform: true,
                normalize: false,
                intercept: true,
            },
            Method::Kernel | Method::Nn => DesignOptions {
                with_city,
                log_transform: false,
                normalize: true,
                intercept: false,
            },
            // splits only depend on the ordering of each feature
            Method::Forest => DesignOptions {
                with_city,
                log_transform: false,
                normalize: false,
                intercept: false,
            },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(alloc::format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One-hot city columns added to the drivers.
    CityDifferences,
    /// Drivers only.
    Pooled,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::CityDifferences, Variant::Pooled];

    pub fn name(self) -> &'static str {
        match self {
            Variant::CityDifferences => "city_differences",
            Variant::Pooled => "pooled",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidInput(alloc::format!("unknown variant `{s}`")))
    }
}

/// Network settings independent of the input width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnSettings {
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub training: TrainingSpec,
    pub seed: u64,
}

impl Default for NnSettings {
    fn default() -> Self {
        let base = MlpSpec::emissions_default(1);
        NnSettings {
            hidden: base.layer_sizes[1..base.layer_sizes.len() - 1].to_vec(),
            hidden_activation: base.hidden_activation,
            output_activation: base.output_activation,
            training: base.training,
            seed: base.seed,
        }
    }
}

impl NnSettings {
    pub fn spec(&self, input_dim: usize) -> MlpSpec {
        let mut layer_sizes = Vec::with_capacity(self.hidden.len() + 2);
        layer_sizes.push(input_dim);
        layer_sizes.extend_from_slice(&self.hidden);
        layer_sizes.push(1);
        MlpSpec {
            layer_sizes,
            hidden_activation: self.hidden_activation,
            output_activation: self.output_activation,
            seed: self.seed,
            training: self.training,
        }
    }
}

/// Hyperparameters for every method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSettings {
    pub kernel: BandwidthPolicy,
    pub forest: ForestParams,
    pub nn: NnSettings,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            kernel: BandwidthPolicy::LoocvGrid,
            forest: ForestParams::default(),
            nn: NnSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum ModelBody {
    Linear(OlsModel),
    Kernel(KernelModel),
    Forest(ForestModel),
    Nn(MlpModel),
}

/// Componentwise bounds of observed drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverRange {
    pub min: Drivers,
    pub max: Drivers,
}

impl DriverRange {
    fn of(d: &Drivers) -> Self {
        DriverRange { min: *d, max: *d }
    }

    fn widen(&mut self, d: &Drivers) {
        let (lo, hi, v) = (self.min.to_array(), self.max.to_array(), d.to_array());
        let mut nlo = lo;
        let mut nhi = hi;
        for k in 0..4 {
            nlo[k] = lo[k].min(v[k]);
            nhi[k] = hi[k].max(v[k]);
        }
        self.min = Drivers::from_array(nlo);
        self.max = Drivers::from_array(nhi);
    }

    pub fn contains(&self, d: &Drivers) -> bool {
        let (lo, hi, v) = (self.min.to_array(), self.max.to_array(), d.to_array());
        (0..4).all(|k| lo[k] <= v[k] && v[k] <= hi[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityRange {
    pub city: String,
    pub range: DriverRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub method: Method,
    pub variant: Variant,
    pub transform: DesignTransform,
    pub body: ModelBody,
    /// Training driver ranges per city, in first-appearance order.
    pub observed: Vec<CityRange>,
    /// Training driver range over all cities.
    pub overall: DriverRange,
    /// First and last training year.
    pub years: (i32, i32),
}

impl FittedModel {
    pub fn fit(method: Method, variant: Variant, rows: &[FeatureRow], settings: &MethodSettings) -> Result<Self> {
        let design = build_design_with(rows, method.design_options(variant))?;
        let body = match method {
            Method::Linear => ModelBody::Linear(fit_ols(&design)?),
            Method::Kernel => ModelBody::Kernel(crate::kernel::fit_kernel(&design, &settings.kernel)?),
            Method::Forest => ModelBody::Forest(crate::forest::fit_forest(&design, &settings.forest)?),
            Method::Nn => ModelBody::Nn(train_mlp(&design, &settings.nn.spec(design.ncols()))?),
        };

        let mut observed: Vec<CityRange> = Vec::new();
        let mut overall = DriverRange::of(&rows[0].drivers());
        for r in rows {
            let d = r.drivers();
            overall.widen(&d);
            match observed.iter_mut().find(|c| c.city == r.city) {
                Some(c) => c.range.widen(&d),
                None => observed.push(CityRange {
                    city: r.city.clone(),
                    range: DriverRange::of(&d),
                }),
            }
        }
        let first = rows.iter().map(|r| r.year).min().unwrap_or_default();
        let last = rows.iter().map(|r| r.year).max().unwrap_or_default();

        Ok(FittedModel {
            method,
            variant,
            transform: design.transform().clone(),
            body,
            observed,
            overall,
            years: (first, last),
        })
    }

    pub fn predict(&self, city: &str, drivers: &Drivers) -> Result<f64> {
        let tons = match &self.body {
            ModelBody::Linear(m) => predict_ols(m, &[self.transform.encode(city, drivers)?])?[0],
            ModelBody::Kernel(m) => {
                let z = m.predict_one(&self.transform.encode(city, drivers)?)?;
                self.transform.decode_target(z)
            }
            ModelBody::Forest(m) => {
                let z = m.predict_one(&self.transform.encode(city, drivers)?)?;
                self.transform.decode_target(z)
            }
            ModelBody::Nn(m) => predict_mlp(m, &[self.transform.raw_row(city, drivers)?])?[0],
        };
        Ok(tons)
    }

    pub fn predict_rows(&self, rows: &[FeatureRow]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(&r.city, &r.drivers())).collect()
    }

    /// Cities the model can predict for; empty for pooled models, which
    /// accept any city.
    pub fn cities(&self) -> Vec<String> {
        match &self.transform.city_encoding {
            crate::features::CityEncoding::OneHot { cities, .. } => cities.clone(),
            crate::features::CityEncoding::None => Vec::new(),
        }
    }

    pub fn check_city(&self, city: &str) -> Result<()> {
        if self.transform.knows_city(city) {
            Ok(())
        } else {
            Err(Error::UnknownCity(city.to_string()))
        }
    }

    /// The observed range for `city`, or the all-city range when the city
    /// was not in the training data.
    pub fn observed_range(&self, city: &str) -> &DriverRange {
        self.observed
            .iter()
            .find(|c| c.city == city)
            .map_or(&self.overall, |c| &c.range)
    }
}
