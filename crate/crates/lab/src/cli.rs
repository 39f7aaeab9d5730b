//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use stirpat_core::features::{build_design_with, derive_features, split_by_year, FeatureRow};
use stirpat_core::kernel::BandwidthPolicy;
use stirpat_core::model::{ModelBody, Variant};
use stirpat_core::nn::{Activation, BatchMode};
use stirpat_core::panel::{validate_dataset, PanelDataset};
use stirpat_core::protocol::{CellOutcome, ProtocolConfig};
use stirpat_core::scenario::{forecast_path, path_peak, sensitivity};
use stirpat_core::synth::{synth_panel, Process, SynthConfig};
use stirpat_core::{metrics, FittedModel, Method};

use crate::documents::{design_to_files, load_baseline, load_model, load_scenarios, to_json};
use crate::error::{LabError, Result};
use crate::fsutil::{slug, write_text};
use crate::panel_csv::{read_panel, write_panel_csv, write_rejects_csv};
use crate::runner::run_parallel;
use crate::svg::{self, Series};
use crate::tables::{self, num, CsvTable};

#[derive(Debug, Parser)]
#[command(name = "stirpat-lab", version, about = "STIRPAT emission models: fit, compare, forecast")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic city panel
    Synth(SynthArgs),
    /// Parse and check a panel CSV
    Ingest(IngestArgs),
    /// Fit models and save them as JSON
    Fit(FitArgs),
    /// Run the fit/predict comparison of all methods
    Compare(CompareArgs),
    /// Forecast emissions along growth scenarios
    Forecast(ForecastArgs),
    /// Perturb one driver at a time around a baseline
    Sensitivity(SensitivityArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProcessArg {
    Interaction,
    LogLinear,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "interaction")]
    pub process: ProcessArg,
    /// Strength of the intensity interaction term
    #[arg(long, default_value_t = 0.3)]
    pub gamma: f64,
    /// Standard deviation of log-scale noise
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    #[arg(long, default_value_t = 10)]
    pub cities: usize,
    #[arg(long, default_value_t = 2005)]
    pub first_year: i32,
    #[arg(long, default_value_t = 2019)]
    pub last_year: i32,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for rejects.csv and the cleaned panel
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    CityDifferences,
    Pooled,
    Both,
}

impl VariantArg {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantArg::CityDifferences => vec![Variant::CityDifferences],
            VariantArg::Pooled => vec![Variant::Pooled],
            VariantArg::Both => Variant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Sigmoid,
    Identity,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Sigmoid => Activation::Sigmoid,
            ActivationArg::Identity => Activation::Identity,
        }
    }
}

/// Method selection, seed and hyperparameter overrides.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Comma-separated subset of linear,kernel,forest,nn
    #[arg(long, value_delimiter = ',', default_value = "linear,kernel,forest,nn")]
    pub methods: Vec<Method>,
    #[arg(long, value_enum, default_value = "both")]
    pub variant: VariantArg,
    /// Root seed for the forest and network
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Kernel scale for every dimension, or `loocv` to pick it from a grid
    #[arg(long, default_value = "loocv")]
    pub bandwidth: String,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub features_per_split: Option<usize>,
    /// Hidden layer widths, e.g. `16,16`
    #[arg(long, value_delimiter = ',')]
    pub nn_hidden: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub nn_activation: Option<ActivationArg>,
    #[arg(long, value_enum)]
    pub nn_output: Option<ActivationArg>,
    #[arg(long)]
    pub nn_epochs: Option<usize>,
    #[arg(long)]
    pub nn_lr: Option<f64>,
    /// Mini-batch size; full batch when omitted
    #[arg(long)]
    pub nn_batch: Option<usize>,
}

impl ModelArgs {
    fn config(&self, last_train_year: i32) -> Result<ProtocolConfig> {
        let mut c = ProtocolConfig::new(last_train_year, self.seed);
        let mut methods = self.methods.clone();
        methods.dedup();
        c.methods = methods;
        c.variants = self.variant.variants();
        c.settings.kernel = match self.bandwidth.as_str() {
            "loocv" => BandwidthPolicy::LoocvGrid,
            s => match s.parse::<f64>() {
                Ok(h) if h > 0.0 && h.is_finite() => BandwidthPolicy::Uniform(h),
                _ => return Err(LabError::Usage(format!("--bandwidth expects `loocv` or a positive number, got `{s}`"))),
            },
        };
        let f = &mut c.settings.forest;
        if let Some(v) = self.trees {
            f.n_trees = v;
        }
        if let Some(v) = self.min_leaf {
            f.min_leaf = v;
        }
        f.max_depth = self.max_depth.or(f.max_depth);
        f.features_per_split = self.features_per_split.or(f.features_per_split);
        let n = &mut c.settings.nn;
        if let Some(h) = &self.nn_hidden {
            n.hidden = h.clone();
        }
        if let Some(a) = self.nn_activation {
            n.hidden_activation = a.into();
        }
        if let Some(a) = self.nn_output {
            n.output_activation = a.into();
        }
        if let Some(e) = self.nn_epochs {
            n.training.epochs = e;
        }
        if let Some(lr) = self.nn_lr {
            n.training.learning_rate = lr;
        }
        if let Some(b) = self.nn_batch {
            n.training.batch = BatchMode::Size(b);
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Train only on years up to and including this one
    #[arg(long)]
    pub split_year: Option<i32>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write each design matrix as CSV with a JSON sidecar
    #[arg(long)]
    pub save_design: bool,
    /// Write the kernel or forest weights of this training row, `CITY:YEAR`
    #[arg(long)]
    pub audit_weights: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Last training year of the prediction task
    #[arg(long, default_value_t = 2017)]
    pub split_year: i32,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Save the all-years model of every successful cell
    #[arg(long)]
    pub save_models: bool,
    /// Write SVG scatter plots
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Scenario JSON file; repeat the flag or use a JSON array for several
    #[arg(long, required = true)]
    pub scenario: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write an SVG of each path
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Baseline JSON, either bare or inside a scenario document
    #[arg(long, alias = "scenario")]
    pub baseline: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Forecast(a) => cmd_forecast(&a),
        Command::Sensitivity(a) => cmd_sensitivity(&a),
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    if a.cities == 0 || a.last_year < a.first_year {
        return Err(LabError::Usage("need at least one city and first_year <= last_year".into()));
    }
    let cfg = SynthConfig {
        cities: a.cities,
        first_year: a.first_year,
        last_year: a.last_year,
        seed: a.seed,
        process: match a.process {
            ProcessArg::Interaction => Process::Interaction { gamma: a.gamma },
            ProcessArg::LogLinear => Process::LogLinear,
        },
        noise_sd: a.noise,
    };
    let ds = synth_panel(&cfg);
    let path = a.out.join("panel.csv");
    write_text(&path, &write_panel_csv(&ds))?;
    println!("wrote {} ({} rows, {} cities)", path.display(), ds.len(), ds.cities().len());
    Ok(())
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let parsed = read_panel(&a.input)?;
    let ds = &parsed.dataset;
    let years = ds.years();
    println!("rows: {}", ds.len());
    println!("cities: {}", ds.cities().len());
    match (years.first(), years.last()) {
        (Some(first), Some(last)) => println!("years: {first}-{last}"),
        _ => println!("years: none"),
    }
    println!("rejected rows: {}", parsed.rejects.len());
    for r in &parsed.rejects {
        println!("  row {}: {}", r.row, r.reason);
    }
    let violations = validate_dataset(ds);
    println!("invariant violations: {}", violations.len());
    for v in &violations {
        println!("  {v}");
    }
    if let Some(out) = &a.out {
        write_text(&out.join("rejects.csv"), &write_rejects_csv(&parsed.rejects))?;
        write_text(&out.join("panel_clean.csv"), &write_panel_csv(ds))?;
    }
    Ok(())
}

/// Reads a panel and refuses data that breaks record invariants.
fn load_clean_panel(path: &Path) -> Result<PanelDataset> {
    let parsed = read_panel(path)?;
    if !parsed.rejects.is_empty() {
        eprintln!("note: {} incomplete rows skipped", parsed.rejects.len());
    }
    let violations = validate_dataset(&parsed.dataset);
    if let Some(first) = violations.first() {
        return Err(LabError::Format {
            row: first.index + 1,
            message: format!("{first} ({} violations in total)", violations.len()),
        });
    }
    Ok(parsed.dataset)
}

fn model_file_name(method: Method, variant: Variant) -> String {
    format!("model_{}_{}.json", method.name(), variant.name())
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let ds = load_clean_panel(&a.input)?;
    let all = derive_features(&ds);
    let rows: Vec<FeatureRow> = match a.split_year {
        Some(y) => split_by_year(&all, y)?.0,
        None => all,
    };
    let config = a.model.config(a.split_year.unwrap_or(i32::MAX))?;
    let settings = config.seeded_settings();
    let audit = a.audit_weights.as_deref().map(parse_city_year).transpose()?;

    let mut fitted = 0;
    for &method in &config.methods {
        for &variant in &config.variants {
            let model = match FittedModel::fit(method, variant, &rows, &settings) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("{method}/{variant}: {e}");
                    continue;
                }
            };
            let pred = model.predict_rows(&rows)?;
            let actual: Vec<f64> = rows.iter().map(|r| r.target).collect();
            println!(
                "{method}/{variant}: in-sample mse {:.6e}, bias {:.6e}",
                metrics::mse(&pred, &actual)?,
                metrics::bias(&pred, &actual)?
            );
            write_text(&a.out.join(model_file_name(method, variant)), &to_json(&model))?;
            if a.save_design {
                let design = build_design_with(&rows, method.design_options(variant))?;
                let (csv_text, sidecar) = design_to_files(&design);
                let stem = format!("design_{}_{}", method.name(), variant.name());
                write_text(&a.out.join(format!("{stem}.csv")), &csv_text)?;
                write_text(&a.out.join(format!("{stem}.json")), &sidecar)?;
            }
            if let Some((city, year)) = &audit {
                write_weights(&a.out, &model, &rows, city, *year)?;
            }
            fitted += 1;
        }
    }
    if fitted == 0 {
        return Err(LabError::Failed("no model could be fitted".into()));
    }
    Ok(())
}

fn parse_city_year(s: &str) -> Result<(String, i32)> {
    s.rsplit_once(':')
        .and_then(|(c, y)| Some((c.to_string(), y.parse().ok()?)))
        .ok_or_else(|| LabError::Usage(format!("--audit-weights expects CITY:YEAR, got `{s}`")))
}

fn write_weights(out: &Path, model: &FittedModel, rows: &[FeatureRow], city: &str, year: i32) -> Result<()> {
    let Some(query) = rows.iter().find(|r| r.city == city && r.year == year) else {
        return Err(LabError::Usage(format!("no training row for {city}:{year}")));
    };
    let x = model.transform.encode(&query.city, &query.drivers())?;
    let weights = match &model.body {
        ModelBody::Kernel(k) => k.weights(&x)?,
        ModelBody::Forest(f) => f.weights(&x)?,
        _ => return Ok(()),
    };
    let mut t = CsvTable::new(&["row", "city", "year", "weight"]);
    for (k, (r, w)) in rows.iter().zip(&weights).enumerate() {
        t.row([k.to_string(), r.city.clone(), r.year.to_string(), num(*w)]);
    }
    let name = format!("weights_{}_{}.csv", model.method.name(), model.variant.name());
    write_text(&out.join(name), &t.finish())
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let ds = load_clean_panel(&a.input)?;
    let config = a.model.config(a.split_year)?;
    let out = run_parallel(&ds, &config)?;
    let report = &out.report;

    write_text(&a.out.join("report.json"), &to_json(report))?;
    write_text(&a.out.join("fit_scatter.csv"), &tables::scatter_csv(&out.scatter))?;
    write_text(&a.out.join("pred_table.csv"), &tables::prediction_csv(&out.predictions))?;

    println!("{}", stirpat_core::protocol::BIAS_DEFINITION);
    println!("{:<8} {:<17} {:<13} {:>14} {:>14}", "method", "variant", "task", "mse", "bias");
    for c in &report.cells {
        match &c.outcome {
            CellOutcome::Ok { mse, bias, .. } => println!(
                "{:<8} {:<17} {:<13} {:>14.6e} {:>14.6e}",
                c.method.name(),
                c.variant.name(),
                c.task,
                mse,
                bias
            ),
            CellOutcome::Failed { error } => println!(
                "{:<8} {:<17} {:<13} failed: {error}",
                c.method.name(),
                c.variant.name(),
                c.task
            ),
        }
    }

    if a.save_models {
        for m in &out.models {
            write_text(&a.out.join("models").join(model_file_name(m.method, m.variant)), &to_json(m))?;
        }
    }
    if a.svg {
        for &(method, variant) in &stirpat_core::protocol::plan(&config) {
            let tag = format!("{}_{}", method.name(), variant.name());
            let fit: Vec<(f64, f64)> = out
                .scatter
                .iter()
                .filter(|r| r.method == method && r.variant == variant)
                .map(|r| (r.actual, r.fitted))
                .collect();
            if !fit.is_empty() {
                let title = format!("{method} / {variant}: fitted vs actual");
                write_text(&a.out.join(format!("fit_{tag}.svg")), &svg::scatter(&title, "actual (t)", "fitted (t)", &fit))?;
            }
            let pred: Vec<(f64, f64)> = out
                .predictions
                .iter()
                .filter(|r| r.method == method && r.variant == variant)
                .map(|r| (r.actual, r.predicted))
                .collect();
            if !pred.is_empty() {
                let title = format!("{method} / {variant}: predicted vs actual");
                write_text(&a.out.join(format!("pred_{tag}.svg")), &svg::scatter(&title, "actual (t)", "predicted (t)", &pred))?;
            }
        }
    }

    if report.cells.iter().all(|c| c.metrics().is_none()) {
        return Err(LabError::Failed("every method failed".into()));
    }
    Ok(())
}

fn cmd_forecast(a: &ForecastArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let mut specs = Vec::new();
    for path in &a.scenario {
        specs.extend(load_scenarios(path)?);
    }
    let mut names: Vec<String> = specs.iter().map(|s| slug(&s.label)).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(LabError::Usage("scenario labels must be distinct".into()));
    }

    let mut series = Vec::new();
    for spec in &specs {
        let path = forecast_path(&model, spec)?;
        let name = slug(&spec.label);
        write_text(&a.out.join(format!("path_{name}.csv")), &tables::path_csv(&path))?;
        let peak = path_peak(&path).map_or("none (maximum at the horizon)".into(), |y| y.to_string());
        let flagged = path.iter().filter(|p| p.extrapolated).count();
        println!("{}: {} years, peak {peak}, {flagged} extrapolated", spec.label, path.len());
        let points = path.iter().map(|p| (f64::from(p.year), p.forecast)).collect();
        let s = Series {
            label: spec.label.clone(),
            points,
        };
        if a.svg {
            let title = format!("{} ({})", spec.label, spec.baseline.city);
            write_text(&a.out.join(format!("path_{name}.svg")), &svg::lines(&title, "year", "CO2 (t)", std::slice::from_ref(&s)))?;
        }
        series.push(s);
    }
    if series.len() > 1 {
        write_text(&a.out.join("paths_overlay.svg"), &svg::lines("Scenario forecasts", "year", "CO2 (t)", &series))?;
    }
    Ok(())
}

fn cmd_sensitivity(a: &SensitivityArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let baseline = load_baseline(&a.baseline)?;
    if !(a.epsilon > -1.0 && a.epsilon.is_finite()) {
        return Err(LabError::Usage(format!("--epsilon must be greater than -1, got {}", a.epsilon)));
    }
    let rows = sensitivity(&model, &baseline, a.epsilon)?;
    write_text(&a.out.join("sensitivity.csv"), &tables::sensitivity_csv(&rows))?;
    for r in &rows {
        println!("{:<10} {:>16.1} {:>+14.1} {:>+9.4}%", r.situation, r.forecast, r.delta, r.delta_pct);
    }
    Ok(())
}
