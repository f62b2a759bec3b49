//! Run configuration: JSON schema, validation with field paths, and
//! construction of the model objects.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sqzspec_core::cavity::{Detuning, RingCavity};
use sqzspec_core::estimator::{FitParameter, FitSpec, ModelParams, QuadratureSelection};
use sqzspec_core::synth::{MeasurementConfig, SpurModel};
use sqzspec_core::two_photon::{DetectionModel, InputSqueezingModel, TablePoint};

#[derive(Debug, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl ToString) -> Self {
        Self { path: path.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cavity: CavityBlock,
    pub detuning: DetuningBlock,
    pub squeezing: SqueezingBlock,
    pub detection: DetectionBlock,
    #[serde(default)]
    pub measurement: MeasurementBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub fit: FitBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityBlock {
    /// Input-mirror power reflectivity R1.
    pub r1_sq: f64,
    /// Combined power reflectivity product R2*R3.
    pub r2r3_sq: f64,
    /// Input-mirror power transmission; defaults to 1 - R1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    pub fsr_hz: f64,
    pub carrier_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningBlock {
    pub omega_d_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SqueezingBlock {
    Constant { v1: f64, v2: f64 },
    OpoLorentzian { pump_x: f64, opo_linewidth_hz: f64, escape_purity: f64 },
    Tabulated { rows: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionBlock {
    pub eta_c: f64,
    #[serde(default)]
    pub eta_m: f64,
    /// Defaults to 1 - eta_c - eta_m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_l: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementBlock {
    pub rbw_hz: f64,
    pub n_averages: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spur: Option<SpurBlock>,
}

impl Default for MeasurementBlock {
    fn default() -> Self {
        Self { rbw_hz: 100e3, n_averages: 100, seed: 0, spur: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpurBlock {
    pub center_hz: f64,
    pub height_linear: f64,
    pub width_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self { start_hz: 5e6, stop_hz: 20e6, points: 151 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    /// Names of floated parameters (see `sqzspec fit --help` for the list).
    pub float: Vec<String>,
    /// Starting-value overrides by parameter name; everything else starts
    /// from the cavity/detuning/squeezing/detection blocks.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub initial: BTreeMap<String, f64>,
    /// Box-constraint overrides `[lo, hi]` by parameter name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bounds: BTreeMap<String, [f64; 2]>,
    /// Frequency intervals `[lo_hz, hi_hz]` excluded from the residual.
    #[serde(default)]
    pub masks: Vec<[f64; 2]>,
    #[serde(default)]
    pub quadrature: QuadratureArg,
    #[serde(default)]
    pub unit_weights: bool,
    #[serde(default = "default_true")]
    pub try_both_detuning_signs: bool,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_true() -> bool {
    true
}

fn default_max_iterations() -> usize {
    500
}

impl Default for FitBlock {
    fn default() -> Self {
        Self {
            float: vec![
                "sqrt_r1".to_string(),
                "sqrt_r1r2r3".to_string(),
                "omega_d_hz".to_string(),
            ],
            initial: BTreeMap::new(),
            bounds: BTreeMap::new(),
            masks: Vec::new(),
            quadrature: QuadratureArg::Both,
            unit_weights: false,
            try_both_detuning_signs: true,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureArg {
    #[serde(rename = "1")]
    #[clap(name = "1")]
    First,
    #[serde(rename = "2")]
    #[clap(name = "2")]
    Second,
    #[default]
    Both,
}

impl From<QuadratureArg> for QuadratureSelection {
    fn from(q: QuadratureArg) -> Self {
        match q {
            QuadratureArg::First => QuadratureSelection::First,
            QuadratureArg::Second => QuadratureSelection::Second,
            QuadratureArg::Both => QuadratureSelection::Both,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub trace: String,
    pub model: String,
    pub report: String,
    pub residuals: String,
    pub sweep: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            trace: "trace.txt".to_string(),
            model: "model.txt".to_string(),
            report: "report.json".to_string(),
            residuals: "residuals.txt".to_string(),
            sweep: "sweep.csv".to_string(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError::at("config", format!("cannot parse JSON: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, crate::CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::CliError::io(path, e))?;
        Ok(Self::from_json(&text)?)
    }

    /// Revalidate every embedded invariant, reporting the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.cavity()?;
        self.detuning()?;
        self.squeezing()?;
        self.detection()?;
        self.measurement()?;
        self.grid()?;
        self.validate_fit_block()?;
        Ok(())
    }

    pub fn cavity(&self) -> Result<RingCavity, ConfigError> {
        let t1 = self.cavity.t1.unwrap_or(1.0 - self.cavity.r1_sq);
        RingCavity::with_input_transmission(
            self.cavity.r1_sq,
            self.cavity.r2r3_sq,
            t1,
            self.cavity.fsr_hz,
            self.cavity.carrier_hz,
        )
        .map_err(|e| ConfigError::at("cavity", e))
    }

    pub fn detuning(&self) -> Result<Detuning, ConfigError> {
        Detuning::new(self.detuning.omega_d_hz)
            .map_err(|e| ConfigError::at("detuning.omega_d_hz", e))
    }

    pub fn squeezing(&self) -> Result<InputSqueezingModel, ConfigError> {
        match &self.squeezing {
            SqueezingBlock::Constant { v1, v2 } => InputSqueezingModel::constant(*v1, *v2),
            SqueezingBlock::OpoLorentzian { pump_x, opo_linewidth_hz, escape_purity } => {
                InputSqueezingModel::opo_lorentzian(*pump_x, *opo_linewidth_hz, *escape_purity)
            }
            SqueezingBlock::Tabulated { rows } => InputSqueezingModel::tabulated(
                rows.iter()
                    .map(|[f, v1, v2]| TablePoint { freq_hz: *f, v1: *v1, v2: *v2 })
                    .collect(),
            ),
        }
        .map_err(|e| ConfigError::at("squeezing", e))
    }

    pub fn detection(&self) -> Result<DetectionModel, ConfigError> {
        let eta_l = self
            .detection
            .eta_l
            .unwrap_or(1.0 - self.detection.eta_c - self.detection.eta_m);
        if eta_l < 0.0 {
            return Err(ConfigError::at(
                "detection",
                "eta_c + eta_m exceeds 1 with no explicit eta_l",
            ));
        }
        DetectionModel::new(self.detection.eta_c, self.detection.eta_m, eta_l)
            .map_err(|e| ConfigError::at("detection", e))
    }

    pub fn measurement(&self) -> Result<MeasurementConfig, ConfigError> {
        let spur = self.measurement.spur.as_ref().map(|s| SpurModel {
            center_hz: s.center_hz,
            height_linear: s.height_linear,
            width_hz: s.width_hz,
        });
        MeasurementConfig::new(
            self.measurement.rbw_hz,
            self.measurement.n_averages,
            spur,
            self.measurement.seed,
        )
        .map_err(|e| ConfigError::at("measurement", e))
    }

    pub fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        let g = &self.grid;
        if !(g.start_hz.is_finite() && g.start_hz >= 0.0) {
            return Err(ConfigError::at("grid.start_hz", "must be finite and nonnegative"));
        }
        if !(g.stop_hz.is_finite() && g.stop_hz > g.start_hz) {
            return Err(ConfigError::at("grid.stop_hz", "must exceed grid.start_hz"));
        }
        if g.points < 2 {
            return Err(ConfigError::at("grid.points", "need at least 2 points"));
        }
        let step = (g.stop_hz - g.start_hz) / (g.points - 1) as f64;
        Ok((0..g.points).map(|i| g.start_hz + i as f64 * step).collect())
    }

    fn validate_fit_block(&self) -> Result<(), ConfigError> {
        if self.fit.float.is_empty() {
            return Err(ConfigError::at("fit.float", "no parameters floated"));
        }
        for (i, name) in self.fit.float.iter().enumerate() {
            let param = FitParameter::from_name(name).ok_or_else(|| {
                ConfigError::at(format!("fit.float[{i}]"), format!("unknown parameter {name:?}"))
            })?;
            if self.fit.float[..i].contains(name) {
                return Err(ConfigError::at(
                    format!("fit.float[{i}]"),
                    format!("{} floated twice", param.name()),
                ));
            }
        }
        for name in self.fit.initial.keys() {
            if FitParameter::from_name(name).is_none() {
                return Err(ConfigError::at(
                    format!("fit.initial.{name}"),
                    "unknown parameter",
                ));
            }
        }
        for (name, [lo, hi]) in &self.fit.bounds {
            if FitParameter::from_name(name).is_none() {
                return Err(ConfigError::at(format!("fit.bounds.{name}"), "unknown parameter"));
            }
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ConfigError::at(
                    format!("fit.bounds.{name}"),
                    "bounds must be finite with lo < hi",
                ));
            }
        }
        for (i, [lo, hi]) in self.fit.masks.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(ConfigError::at(format!("fit.masks[{i}]"), "must be finite"));
            }
        }
        Ok(())
    }

    /// Parameter set straight from the model blocks (no fit overrides).
    /// Requires the `opo_lorentzian` input model, which is the one the
    /// parametric fit and sweep machinery understand.
    pub fn model_params(&self) -> Result<ModelParams, ConfigError> {
        let (pump_x, opo_linewidth_hz, escape_purity) = match &self.squeezing {
            SqueezingBlock::OpoLorentzian { pump_x, opo_linewidth_hz, escape_purity } => {
                (*pump_x, *opo_linewidth_hz, *escape_purity)
            }
            _ => {
                return Err(ConfigError::at(
                    "squeezing.kind",
                    "the fit model requires the opo_lorentzian input model",
                ))
            }
        };
        Ok(ModelParams {
            sqrt_r1: self.cavity.r1_sq.sqrt(),
            sqrt_r1r2r3: (self.cavity.r1_sq * self.cavity.r2r3_sq).sqrt(),
            omega_d_hz: self.detuning.omega_d_hz,
            fsr_hz: self.cavity.fsr_hz,
            pump_x,
            opo_linewidth_hz,
            escape_purity,
            eta_c: self.detection.eta_c,
            eta_m: self.detection.eta_m,
            carrier_hz: self.cavity.carrier_hz,
        })
    }

    /// Starting parameter set for the fit: model blocks plus any
    /// `fit.initial` overrides.
    pub fn initial_params(&self) -> Result<ModelParams, ConfigError> {
        let mut params = self.model_params()?;
        for (name, value) in &self.fit.initial {
            let param = FitParameter::from_name(name)
                .ok_or_else(|| ConfigError::at(format!("fit.initial.{name}"), "unknown parameter"))?;
            params.set(param, *value);
        }
        Ok(params)
    }

    /// Fit specification with `extra_masks` and an optional quadrature
    /// override merged in.
    pub fn fit_spec(
        &self,
        extra_masks: &[(f64, f64)],
        quadrature: Option<QuadratureArg>,
    ) -> Result<FitSpec, ConfigError> {
        self.validate_fit_block()?;
        let float: Vec<FitParameter> = self
            .fit
            .float
            .iter()
            .map(|n| FitParameter::from_name(n).expect("validated"))
            .collect();
        let mut spec = FitSpec::new(self.initial_params()?, float);
        spec.bounds = self
            .fit
            .bounds
            .iter()
            .map(|(n, [lo, hi])| (FitParameter::from_name(n).expect("validated"), *lo, *hi))
            .collect();
        spec.masks = self.fit.masks.iter().map(|[lo, hi]| (*lo, *hi)).collect();
        spec.masks.extend_from_slice(extra_masks);
        spec.quadrature = quadrature.unwrap_or(self.fit.quadrature).into();
        spec.unit_weights = self.fit.unit_weights;
        spec.try_both_detuning_signs = self.fit.try_both_detuning_signs;
        spec.max_iterations = self.fit.max_iterations;
        Ok(spec)
    }

    /// Pretty JSON of the fully resolved configuration (defaults expanded).
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
