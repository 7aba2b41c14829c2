//! Command-line front end.
//!
//! Every run is configured by flags, optionally layered over a JSON file
//! given with `--config` whose keys are the long flag names in snake_case.
//! Flags win over file values. Exit codes: 0 success, 2 configuration,
//! 3 data or solver, 4 training divergence, 5 model file.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fem_surrogate_core::beam::{BeamError, CrossSection, Material};
use fem_surrogate_core::dataset::{DatasetError, ScaleScheme};
use fem_surrogate_core::grid::GridError;
use fem_surrogate_core::mlp::{MlpError, Optimizer};
use fem_surrogate_core::oscillator::{self, OscillatorError};
use fem_surrogate_core::surrogate::{
    self, Experiment, ExperimentConfig, ExperimentReport, Surrogate, SurrogateError,
};
use fem_surrogate_core::{BeamSpec, FrequencyGrid, OscillatorParams, RayleighDamping};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{self, DataError};
use crate::model_file::{self, ModelFileError};
use crate::{plot, report, sweep};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_MODEL: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("model file: {0}")]
    Model(#[from] ModelFileError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Diverged(_) => EXIT_DIVERGED,
            CliError::Model(_) => EXIT_MODEL,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        config_err(format!("grid: {e}"))
    }
}

impl From<OscillatorError> for CliError {
    fn from(e: OscillatorError) -> Self {
        match e {
            OscillatorError::InvalidParams { .. } => config_err(e.to_string()),
            other => CliError::Data(format!("oscillator: {other}")),
        }
    }
}

impl From<BeamError> for CliError {
    fn from(e: BeamError) -> Self {
        match e {
            BeamError::InvalidSpec { .. } | BeamError::InvalidDamping { .. } => {
                config_err(e.to_string())
            }
            other => CliError::Data(format!("solver: {other}")),
        }
    }
}

impl From<MlpError> for CliError {
    fn from(e: MlpError) -> Self {
        match e {
            MlpError::NanLoss { .. } => CliError::Diverged(e.to_string()),
            MlpError::InvalidConfig(_) | MlpError::InvalidArchitecture(_) => {
                config_err(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidFraction(_) => config_err(e.to_string()),
            other => CliError::Data(format!("dataset: {other}")),
        }
    }
}

impl From<SurrogateError> for CliError {
    fn from(e: SurrogateError) -> Self {
        let stage = e.stage();
        let inner = match e {
            SurrogateError::Grid(e) => e.into(),
            SurrogateError::Oscillator(e) => e.into(),
            SurrogateError::Beam(e) => e.into(),
            SurrogateError::Dataset(e) => e.into(),
            SurrogateError::Mlp(e) => e.into(),
            SurrogateError::InvalidConfig(m) => config_err(m),
            other => CliError::Data(other.to_string()),
        };
        match inner {
            CliError::Config(m) => CliError::Config(format!("[{stage}] {m}")),
            CliError::Data(m) => CliError::Data(format!("[{stage}] {m}")),
            CliError::Diverged(m) => CliError::Diverged(format!("[{stage}] {m}")),
            model => model,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fem-surrogate",
    version,
    about = "Generate FEM ground truth, train MLP surrogates, and compare response curves"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a ground-truth response CSV for the selected problem.
    Generate(GenerateArgs),
    /// Train a surrogate on a ground-truth CSV and save the model.
    Train(TrainArgs),
    /// Evaluate a saved model at one frequency or over a grid.
    Predict(PredictArgs),
    /// Run a full experiment and write curves, metrics and optional plots.
    Eval(EvalArgs),
}

/// Problem and training overrides shared by flags and the JSON config file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// example1 (oscillator) or example2 (beam).
    #[arg(long)]
    pub experiment: Option<String>,
    /// Seed for initialization, splitting and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Lowest grid frequency in Hz.
    #[arg(long)]
    pub f_min: Option<f64>,
    /// Highest grid frequency in Hz.
    #[arg(long)]
    pub f_max: Option<f64>,
    /// Number of uniform grid points.
    #[arg(long)]
    pub points: Option<usize>,

    /// Oscillator mass in kg.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Oscillator viscous damping in N·s/m.
    #[arg(long)]
    pub damping_coef: Option<f64>,
    /// Oscillator stiffness in N/m.
    #[arg(long)]
    pub stiffness: Option<f64>,
    /// Oscillator force amplitude in N.
    #[arg(long)]
    pub force: Option<f64>,

    /// Beam length in m.
    #[arg(long)]
    pub length: Option<f64>,
    /// Section width in m.
    #[arg(long)]
    pub width: Option<f64>,
    /// Section height in m.
    #[arg(long)]
    pub height: Option<f64>,
    #[arg(long)]
    pub youngs_modulus: Option<f64>,
    #[arg(long)]
    pub poisson_ratio: Option<f64>,
    /// Density in kg/m³.
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub n_elements: Option<usize>,
    /// Beam axis direction as x,y,z.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub axis: Option<Vec<f64>>,
    /// Tip load in N as x,y,z.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub tip_load: Option<Vec<f64>>,

    /// Modal damping ratio at the first natural frequency (stiffness proportional).
    #[arg(long, conflicts_with_all = ["rayleigh_alpha", "rayleigh_beta"])]
    pub damping_ratio: Option<f64>,
    /// Mass-proportional Rayleigh coefficient.
    #[arg(long)]
    pub rayleigh_alpha: Option<f64>,
    /// Stiffness-proportional Rayleigh coefficient.
    #[arg(long)]
    pub rayleigh_beta: Option<f64>,

    /// Hidden layer widths, e.g. 100,100.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// sgd or adam.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Target scaling: log10 or linear_minmax.
    #[arg(long)]
    pub target_scaling: Option<String>,
}

const OSCILLATOR_KEYS: [&str; 4] = ["mass", "damping_coef", "stiffness", "force"];
const BEAM_KEYS: [&str; 12] = [
    "length",
    "width",
    "height",
    "youngs_modulus",
    "poisson_ratio",
    "density",
    "n_elements",
    "axis",
    "tip_load",
    "damping_ratio",
    "rayleigh_alpha",
    "rayleigh_beta",
];

impl Overrides {
    fn to_map(&self) -> serde_json::Map<String, serde_json::Value> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => serde_json::Map::new(),
        }
    }

    /// File values with every flag that was given laid on top.
    fn layered(self, config: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = config else {
            return Ok(self);
        };
        let text =
            fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let file: Overrides = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut merged = file.to_map();
        for (k, v) in self.to_map() {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
        serde_json::from_value(serde_json::Value::Object(merged))
            .map_err(|e| config_err(e.to_string()))
    }

    fn given(&self, keys: &[&str]) -> Vec<String> {
        let map = self.to_map();
        keys.iter()
            .filter(|k| map.get(**k).is_some_and(|v| !v.is_null()))
            .map(|k| format!("--{}", k.replace('_', "-")))
            .collect()
    }

    fn experiment(&self) -> Result<Experiment, CliError> {
        let name = self
            .experiment
            .as_deref()
            .ok_or_else(|| config_err("--experiment is required (example1 or example2)"))?;
        Experiment::from_name(name).ok_or_else(|| {
            config_err(format!(
                "unknown experiment `{name}` (expected example1 or example2)"
            ))
        })
    }

    /// Rejects flags that belong to the other experiment.
    fn check_applicable(&self, experiment: Experiment) -> Result<(), CliError> {
        let foreign = match experiment {
            Experiment::Example1 => self.given(&BEAM_KEYS),
            Experiment::Example2 => self.given(&OSCILLATOR_KEYS),
        };
        if foreign.is_empty() {
            Ok(())
        } else {
            Err(config_err(format!(
                "{} cannot be used with --experiment {}",
                foreign.join(", "),
                experiment.name()
            )))
        }
    }

    fn grid(&self, experiment: Experiment) -> Result<FrequencyGrid, CliError> {
        let d = experiment.default_grid();
        Ok(FrequencyGrid::uniform(
            self.f_min.unwrap_or(d.first()),
            self.f_max.unwrap_or(d.last()),
            self.points.unwrap_or(d.len()),
        )?)
    }

    fn oscillator(&self) -> Result<OscillatorParams, CliError> {
        let d = OscillatorParams::example1();
        Ok(OscillatorParams::new(
            self.mass.unwrap_or(d.mass),
            self.damping_coef.unwrap_or(d.damping),
            self.stiffness.unwrap_or(d.stiffness),
            self.force.unwrap_or(d.force_amplitude),
        )?)
    }

    fn beam(&self) -> Result<BeamSpec, CliError> {
        let d = BeamSpec::example2();
        let vec3 = |v: &Option<Vec<f64>>, name: &str, default: [f64; 3]| match v {
            None => Ok(default),
            Some(v) => <[f64; 3]>::try_from(v.as_slice()).map_err(|_| {
                config_err(format!(
                    "--{name} needs exactly three comma-separated values"
                ))
            }),
        };
        let spec = BeamSpec {
            length: self.length.unwrap_or(d.length),
            section: CrossSection {
                width: self.width.unwrap_or(d.section.width),
                height: self.height.unwrap_or(d.section.height),
            },
            material: Material {
                youngs_modulus: self.youngs_modulus.unwrap_or(d.material.youngs_modulus),
                poisson_ratio: self.poisson_ratio.unwrap_or(d.material.poisson_ratio),
                density: self.density.unwrap_or(d.material.density),
            },
            n_elements: self.n_elements.unwrap_or(d.n_elements),
            axis_direction: vec3(&self.axis, "axis", d.axis_direction)?,
            tip_load: vec3(&self.tip_load, "tip-load", d.tip_load)?,
            height_direction: d.height_direction,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `None` means the default: 1% of critical at the first mode.
    fn explicit_damping(&self) -> Result<Option<DampingChoice>, CliError> {
        if let Some(z) = self.damping_ratio {
            if !(z > 0.0 && z.is_finite()) {
                return Err(config_err(format!(
                    "--damping-ratio must be positive, got {z}"
                )));
            }
            return Ok(Some(DampingChoice::Ratio(z)));
        }
        if self.rayleigh_alpha.is_some() || self.rayleigh_beta.is_some() {
            let d = RayleighDamping::new(
                self.rayleigh_alpha.unwrap_or(0.0),
                self.rayleigh_beta.unwrap_or(0.0),
            )?;
            return Ok(Some(DampingChoice::Coefficients(d)));
        }
        Ok(None)
    }

    fn experiment_config(&self, experiment: Experiment) -> Result<ExperimentConfig, CliError> {
        let mut c = ExperimentConfig::for_experiment(experiment);
        if let Some(seed) = self.seed {
            c = c.with_seed(seed);
        }
        if let Some(h) = &self.hidden {
            if h.is_empty() || h.contains(&0) {
                return Err(config_err("--hidden needs positive layer widths"));
            }
            c.hidden_layers = h.clone();
        }
        if let Some(name) = &self.optimizer {
            c.train.optimizer = Optimizer::from_name(name).ok_or_else(|| {
                config_err(format!("unknown optimizer `{name}` (expected sgd or adam)"))
            })?;
        }
        if let Some(v) = self.learning_rate {
            c.train.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            c.train.batch_size = v;
        }
        if let Some(v) = self.epochs {
            c.train.epochs = v;
        }
        if let Some(v) = self.test_fraction {
            if !(v > 0.0 && v < 1.0) {
                return Err(config_err(format!(
                    "--test-fraction must lie in (0, 1), got {v}"
                )));
            }
            c.test_fraction = v;
        }
        if let Some(s) = &self.target_scaling {
            c.target_scheme = match s.as_str() {
                "log10" => ScaleScheme::log10_floored(),
                "linear_minmax" | "linear" => ScaleScheme::LinearMinMax,
                other => {
                    return Err(config_err(format!(
                        "unknown target scaling `{other}` (expected log10 or linear_minmax)"
                    )))
                }
            };
        }
        c.train.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy)]
enum DampingChoice {
    Ratio(f64),
    Coefficients(RayleighDamping),
}

fn resolve_damping(
    spec: &BeamSpec,
    choice: Option<DampingChoice>,
) -> Result<RayleighDamping, CliError> {
    match choice {
        Some(DampingChoice::Coefficients(d)) => Ok(d),
        Some(DampingChoice::Ratio(z)) => {
            let base = surrogate::default_damping(spec)?;
            // default_damping is stiffness proportional: beta = 2·zeta0/ω1.
            Ok(RayleighDamping::new(
                0.0,
                base.beta * z / surrogate::DEFAULT_MODAL_DAMPING,
            )?)
        }
        None => Ok(surrogate::default_damping(spec)?),
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// JSON file with default values for any of the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ground-truth CSV written by `generate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    pub model: PathBuf,
    /// Optional `epoch,train_mse,test_mse` CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Single frequency in Hz; prints one CSV row.
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    pub freq: Option<f64>,
    /// Uniform grid as start,end,points; writes a curve CSV.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Output path for grid mode (stdout when absent).
    #[arg(long, requires = "grid")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Curves CSV path (default `<experiment>_curves.csv`).
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Metrics path (default `<experiment>_metrics.txt`).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Optional SVG plot path.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Optional model output path.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Optional training history CSV path.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

fn check_output(path: &Path) -> Result<(), CliError> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(dir) if !dir.is_dir() => Err(config_err(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn out_line(out: &mut impl Write, line: &str) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::Data(format!("stdout: {e}")))
}

pub fn run(cli: Cli, out: &mut impl Write, err: &mut impl Write) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => generate(a, out),
        Command::Train(a) => train(a, out),
        Command::Predict(a) => predict(a, out, err),
        Command::Eval(a) => eval(a, out),
    }
}

fn generate(args: GenerateArgs, out: &mut impl Write) -> Result<(), CliError> {
    let o = args.overrides.layered(args.config.as_deref())?;
    let experiment = o.experiment()?;
    o.check_applicable(experiment)?;
    check_output(&args.out)?;
    let grid = o.grid(experiment)?;
    let samples = match experiment {
        Experiment::Example1 => oscillator::sweep_oscillator(&o.oscillator()?, &grid)?,
        Experiment::Example2 => {
            let spec = o.beam()?;
            let damping = resolve_damping(&spec, o.explicit_damping()?)?;
            data::table_samples(&sweep::parallel_frequency_sweep(&spec, &grid, damping)?)
        }
    };
    data::write_samples(&args.out, experiment, &samples)?;
    out_line(out, &format!("rows={}", samples.len()))?;
    out_line(out, &format!("f_min_hz={}", grid.first()))?;
    out_line(out, &format!("f_max_hz={}", grid.last()))
}

fn train(args: TrainArgs, out: &mut impl Write) -> Result<(), CliError> {
    let o = args.overrides.layered(args.config.as_deref())?;
    let mut problem_keys = vec!["f_min", "f_max", "points"];
    problem_keys.extend(OSCILLATOR_KEYS);
    problem_keys.extend(BEAM_KEYS);
    let given = o.given(&problem_keys);
    if !given.is_empty() {
        return Err(config_err(format!(
            "{} only apply to generate and eval",
            given.join(", ")
        )));
    }
    check_output(&args.model)?;
    if let Some(h) = &args.history {
        check_output(h)?;
    }
    let file = data::read_samples(&args.data)?;
    if o.experiment.is_some() && o.experiment()? != file.experiment {
        return Err(config_err(format!(
            "--experiment {} does not match the columns of {}",
            o.experiment.as_deref().unwrap_or_default(),
            args.data.display()
        )));
    }
    let config = o.experiment_config(file.experiment)?;
    let fit = surrogate::fit_surrogate(&file.samples, &config)?;
    model_file::save_model(&args.model, &fit.surrogate)?;
    if let Some(h) = &args.history {
        write_file(h, &report::history_csv(&fit.history))?;
    }
    out_line(out, &format!("epochs={}", fit.history.train_mse.len()))?;
    out_line(
        out,
        &format!("train_mse_scaled={:.6e}", fit.train_mse_scaled),
    )?;
    out_line(out, &format!("test_mse_scaled={:.6e}", fit.test_mse_scaled))
}

fn channel_names(model: &Surrogate) -> Vec<String> {
    let n = model.mlp.n_outputs();
    [Experiment::Example1, Experiment::Example2]
        .into_iter()
        .find(|e| e.channel_names().len() == n)
        .map(|e| e.channel_names().iter().map(|s| s.to_string()).collect())
        .unwrap_or_else(|| (1..=n).map(|i| format!("out_{i}")).collect())
}

fn predict(args: PredictArgs, out: &mut impl Write, err: &mut impl Write) -> Result<(), CliError> {
    let grid = match (&args.freq, &args.grid) {
        (Some(f), _) => FrequencyGrid::single(*f)?,
        (None, Some(g)) => match g.as_slice() {
            &[start, end, points] if points >= 2.0 && points.fract() == 0.0 => {
                FrequencyGrid::uniform(start, end, points as usize)?
            }
            _ => {
                return Err(config_err(
                    "--grid needs start,end,points with an integer point count ≥ 2",
                ))
            }
        },
        (None, None) => return Err(config_err("give --freq or --grid")),
    };
    if let Some(p) = &args.out {
        check_output(p)?;
    }
    let model = model_file::load_model(&args.model)?;
    let names = channel_names(&model);
    let mut csv = format!("freq_hz,{}\n", names.join(","));
    let mut outside = Vec::new();
    for &f in grid.values() {
        let p = model.predict(f)?;
        if p.extrapolated {
            outside.push(f);
        }
        csv += &format!("{f:.16e}");
        for v in &p.values {
            csv += &format!(",{v:.16e}");
        }
        csv.push('\n');
    }
    if !outside.is_empty() {
        let (lo, hi) = model.trained_range().unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(
            err,
            "warning: {} frequenc{} outside the trained range [{lo}, {hi}] Hz (first {} Hz); values are extrapolated",
            outside.len(),
            if outside.len() == 1 { "y" } else { "ies" },
            outside[0]
        );
    }
    match &args.out {
        Some(p) => write_file(p, &csv),
        None => out
            .write_all(csv.as_bytes())
            .map_err(|e| CliError::Data(format!("stdout: {e}"))),
    }
}

fn eval(args: EvalArgs, out: &mut impl Write) -> Result<(), CliError> {
    let o = args.overrides.layered(args.config.as_deref())?;
    let experiment = o.experiment()?;
    o.check_applicable(experiment)?;
    let name = experiment.name();
    let curves = args
        .curves
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{name}_curves.csv")));
    let metrics = args
        .metrics
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{name}_metrics.txt")));
    let outputs: Vec<&PathBuf> = [
        Some(&curves),
        Some(&metrics),
        args.plot.as_ref(),
        args.model.as_ref(),
        args.history.as_ref(),
    ]
    .into_iter()
    .flatten()
    .collect();
    for (i, p) in outputs.iter().enumerate() {
        check_output(p)?;
        if outputs[..i].contains(p) {
            return Err(config_err(format!(
                "{} is given for two different outputs",
                p.display()
            )));
        }
    }
    let grid = o.grid(experiment)?;
    let config = o.experiment_config(experiment)?;

    let result: ExperimentReport = match experiment {
        Experiment::Example1 => surrogate::run_example1(&o.oscillator()?, &grid, &config)?,
        Experiment::Example2 => {
            let spec = o.beam()?;
            let choice = o.explicit_damping()?;
            let damping = resolve_damping(&spec, choice)?;
            let table = sweep::parallel_frequency_sweep(&spec, &grid, damping)?;
            surrogate::run_example2_on_table(&spec, &grid, damping, &table, &config)?
        }
    };

    let metrics_doc = report::metrics_text(&result);
    write_file(&curves, &report::curves_csv(&result))?;
    write_file(&metrics, &metrics_doc)?;
    if let Some(p) = &args.plot {
        write_file(p, &plot::render_svg(&result))?;
    }
    if let Some(p) = &args.model {
        model_file::save_model(p, &result.surrogate)?;
    }
    if let Some(p) = &args.history {
        write_file(p, &report::history_csv(&result.history))?;
    }
    out.write_all(metrics_doc.as_bytes())
        .map_err(|e| CliError::Data(format!("stdout: {e}")))
}

/// Parses `argv`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let stdout = io::stdout();
    let stderr = io::stderr();
    match run(cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr.lock(), "error: {e}");
            e.exit_code()
        }
    }
}
