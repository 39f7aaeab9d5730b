//! Fit/predict comparison of every method under both variants.
//!
//! - Fitting task: train on all years, score in-sample.
//! - Prediction task: train on `year <= last_train_year`, score each
//!   held-out year separately.
//!
//! A method that fails is reported as failed; the rest still run. Cells are
//! independent, so callers may evaluate them in parallel with [`run_cell`]
//! and merge with [`assemble`].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{derive_features, split_by_year, FeatureRow};
use crate::kernel::BandwidthPolicy;
use crate::math::mix_seed;
use crate::metrics;
use crate::model::{FittedModel, Method, MethodSettings, Variant};
use crate::panel::{validate_dataset, PanelDataset};

pub const BIAS_DEFINITION: &str = "bias = mean absolute error, mean(|predicted - actual|), tons";

const FOREST_STREAM: u64 = 1;
const NN_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub last_train_year: i32,
    pub methods: Vec<Method>,
    pub variants: Vec<Variant>,
    /// Root seed; forest and network seeds are derived from it.
    pub seed: u64,
    pub settings: MethodSettings,
}

impl ProtocolConfig {
    pub fn new(last_train_year: i32, seed: u64) -> Self {
        ProtocolConfig {
            last_train_year,
            methods: Method::ALL.to_vec(),
            variants: Variant::ALL.to_vec(),
            seed,
            settings: MethodSettings::default(),
        }
    }

    /// Settings with component seeds fanned out from the root seed.
    pub fn seeded_settings(&self) -> MethodSettings {
        let mut s = self.settings.clone();
        s.forest.seed = mix_seed(self.seed, FOREST_STREAM);
        s.nn.seed = mix_seed(self.seed, NN_STREAM);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Fitting,
    Prediction { year: i32 },
}

impl Task {
    pub fn label(&self) -> String {
        match self {
            Task::Fitting => "fitting".into(),
            Task::Prediction { year } => format!("predict_{year}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok { mse: f64, bias: f64, n: usize },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub method: Method,
    pub variant: Variant,
    pub task: String,
    pub outcome: CellOutcome,
}

impl ReportCell {
    pub fn metrics(&self) -> Option<(f64, f64)> {
        match self.outcome {
            CellOutcome::Ok { mse, bias, .. } => Some((mse, bias)),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessingNote {
    pub method: Method,
    pub log_transform: bool,
    pub normalize: bool,
    pub city_columns: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub bias_definition: String,
    pub fitting_scope: String,
    pub last_train_year: i32,
    pub held_out_years: Vec<i32>,
    pub seed: u64,
    pub forest_seed: u64,
    pub nn_seed: u64,
    pub settings: MethodSettings,
    pub preprocessing: Vec<PreprocessingNote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: ReportMetadata,
    pub cells: Vec<ReportCell>,
}

impl EvalReport {
    pub fn cell(&self, method: Method, variant: Variant, task: &Task) -> Option<&ReportCell> {
        let label = task.label();
        self.cells
            .iter()
            .find(|c| c.method == method && c.variant == variant && c.task == label)
    }
}

/// One point of a fitted-versus-actual plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub method: Method,
    pub variant: Variant,
    pub city: String,
    pub year: i32,
    pub actual: f64,
    pub fitted: f64,
}

/// A held-out city-year with its forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub method: Method,
    pub variant: Variant,
    pub city: String,
    pub year: i32,
    pub actual: f64,
    pub predicted: f64,
}

/// Features and split shared by all cells.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub all: Vec<FeatureRow>,
    pub train: Vec<FeatureRow>,
    pub test: Vec<FeatureRow>,
    pub held_out_years: Vec<i32>,
}

pub fn prepare(ds: &PanelDataset, config: &ProtocolConfig) -> Result<Prepared> {
    if let Some(v) = validate_dataset(ds).first() {
        return Err(Error::InvalidInput(v.to_string()));
    }
    let all = derive_features(ds);
    let (train, test) = split_by_year(&all, config.last_train_year)?;
    let mut held_out_years: Vec<i32> = test.iter().map(|r| r.year).collect();
    held_out_years.sort_unstable();
    held_out_years.dedup();
    Ok(Prepared {
        all,
        train,
        test,
        held_out_years,
    })
}

/// Everything produced for one (method, variant) pair.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub method: Method,
    pub variant: Variant,
    pub cells: Vec<ReportCell>,
    pub scatter: Vec<ScatterRow>,
    pub predictions: Vec<PredictionRow>,
    /// Model trained on all years, when fitting succeeded.
    pub full_model: Option<FittedModel>,
}

pub fn run_cell(prep: &Prepared, method: Method, variant: Variant, config: &ProtocolConfig) -> CellRun {
    let settings = config.seeded_settings();
    let annotate = |e: Error| format!("{method}/{variant}: {e}");
    let mut cells = Vec::new();
    let mut scatter = Vec::new();
    let mut predictions = Vec::new();

    let fitting = FittedModel::fit(method, variant, &prep.all, &settings).and_then(|m| {
        let fitted = m.predict_rows(&prep.all)?;
        Ok((m, fitted))
    });
    let full_model = match fitting {
        Ok((model, fitted)) => {
            let actual: Vec<f64> = prep.all.iter().map(|r| r.target).collect();
            cells.push(cell(method, variant, Task::Fitting, score(&fitted, &actual)));
            scatter.extend(prep.all.iter().zip(&fitted).map(|(r, f)| ScatterRow {
                method,
                variant,
                city: r.city.clone(),
                year: r.year,
                actual: r.target,
                fitted: *f,
            }));
            Some(model)
        }
        Err(e) => {
            cells.push(cell(method, variant, Task::Fitting, Err(annotate(e))));
            None
        }
    };

    let trained = FittedModel::fit(method, variant, &prep.train, &settings);
    for &year in &prep.held_out_years {
        let task = Task::Prediction { year };
        let rows: Vec<FeatureRow> = prep.test.iter().filter(|r| r.year == year).cloned().collect();
        let predicted = match &trained {
            Ok(m) => m.predict_rows(&rows).map_err(annotate),
            Err(e) => Err(annotate(e.clone())),
        };
        match predicted {
            Ok(p) => {
                let actual: Vec<f64> = rows.iter().map(|r| r.target).collect();
                cells.push(cell(method, variant, task, score(&p, &actual)));
                predictions.extend(rows.iter().zip(&p).map(|(r, p)| PredictionRow {
                    method,
                    variant,
                    city: r.city.clone(),
                    year: r.year,
                    actual: r.target,
                    predicted: *p,
                }));
            }
            Err(msg) => cells.push(cell(method, variant, task, Err(msg))),
        }
    }

    CellRun {
        method,
        variant,
        cells,
        scatter,
        predictions,
        full_model,
    }
}

fn score(pred: &[f64], actual: &[f64]) -> core::result::Result<(f64, f64, usize), String> {
    if pred.iter().any(|p| !p.is_finite()) {
        return Err("non-finite prediction".into());
    }
    let mse = metrics::mse(pred, actual).map_err(|e| e.to_string())?;
    let bias = metrics::bias(pred, actual).map_err(|e| e.to_string())?;
    Ok((mse, bias, pred.len()))
}

fn cell(
    method: Method,
    variant: Variant,
    task: Task,
    outcome: core::result::Result<(f64, f64, usize), String>,
) -> ReportCell {
    ReportCell {
        method,
        variant,
        task: task.label(),
        outcome: match outcome {
            Ok((mse, bias, n)) => CellOutcome::Ok { mse, bias, n },
            Err(error) => CellOutcome::Failed { error },
        },
    }
}

/// The (method, variant) pairs a config asks for, in report order.
pub fn plan(config: &ProtocolConfig) -> Vec<(Method, Variant)> {
    let mut out = Vec::new();
    for &m in &config.methods {
        for &v in &config.variants {
            out.push((m, v));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ProtocolOutput {
    pub report: EvalReport,
    pub scatter: Vec<ScatterRow>,
    pub predictions: Vec<PredictionRow>,
    /// All-years models of the successful cells, in report order.
    pub models: Vec<FittedModel>,
}

/// Merges cell runs in plan order, whatever order they finished in.
pub fn assemble(prep: &Prepared, config: &ProtocolConfig, mut runs: Vec<CellRun>) -> ProtocolOutput {
    let order = plan(config);
    runs.sort_by_key(|r| order.iter().position(|p| *p == (r.method, r.variant)));
    let settings = config.seeded_settings();
    let preprocessing = config
        .methods
        .iter()
        .map(|&m| {
            let o = m.design_options(Variant::CityDifferences);
            PreprocessingNote {
                method: m,
                log_transform: o.log_transform,
                normalize: o.normalize,
                city_columns: if o.intercept {
                    "one-hot, first city as reference".into()
                } else {
                    "one-hot, all cities".into()
                },
            }
        })
        .collect();
    let metadata = ReportMetadata {
        bias_definition: BIAS_DEFINITION.into(),
        fitting_scope: "fitting task trains and scores on all years in-sample".into(),
        last_train_year: config.last_train_year,
        held_out_years: prep.held_out_years.clone(),
        seed: config.seed,
        forest_seed: settings.forest.seed,
        nn_seed: settings.nn.seed,
        settings,
        preprocessing,
    };
    let mut out = ProtocolOutput {
        report: EvalReport {
            metadata,
            cells: Vec::new(),
        },
        scatter: Vec::new(),
        predictions: Vec::new(),
        models: Vec::new(),
    };
    for run in runs {
        out.report.cells.extend(run.cells);
        out.scatter.extend(run.scatter);
        out.predictions.extend(run.predictions);
        out.models.extend(run.full_model);
    }
    out
}

/// Runs every cell sequentially.
pub fn run_protocol(ds: &PanelDataset, config: &ProtocolConfig) -> Result<ProtocolOutput> {
    if config.methods.is_empty() || config.variants.is_empty() {
        return Err(Error::InvalidInput("no methods or variants selected".into()));
    }
    let prep = prepare(ds, config)?;
    let runs = plan(config)
        .into_iter()
        .map(|(m, v)| run_cell(&prep, m, v, config))
        .collect();
    Ok(assemble(&prep, config, runs))
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig::new(2017, 42)
    }
}

impl ProtocolConfig {
    /// Replaces the kernel bandwidth policy.
    pub fn with_kernel(mut self, policy: BandwidthPolicy) -> Self {
        self.settings.kernel = policy;
        self
    }
}
