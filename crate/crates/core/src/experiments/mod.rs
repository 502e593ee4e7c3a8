//! Reproducible runs, sweeps over them, and reporting.
//!
//! A [`RunSpec`] is a flat description of one training run. Everything
//! else (reference grid, sample sets, network) is derived from it
//! deterministically, so its hash doubles as the run identifier.

mod config;
mod report;
mod sweep;

pub use config::{parse_config, ConfigFile};
pub use report::{models_in, report, ReportKind};
pub use sweep::{
    activation_study, record_run, robustness_study, robustness_summary, run_plan, sweep_lambda, ArmSummary, ResultRow,
    ResultsTable, RobustnessSummary, RunFailure, RunnerOptions, SweepOutcome, SweepPlan, CSV_HEADER, DEFAULT_LAMBDA_GRID,
    RESULTS_FILE, SPECS_FILE, median,
};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{normalize_labels, sample_collocation, sample_training, DatasetError, SampleSet};
use crate::network::{Activation, MlpConfig};
use crate::pde::PdeKind;
use crate::solvers::{
    eval_advdiff_analytic, solve_burgers_spectral, solve_wave_fd, AdvDiffConfig, BurgersConfig, SolutionGrid,
    SolverError, WaveConfig,
};
use crate::training::{train, RunResult, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("plotting failed: {0}")]
    Plot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Burgers,
    Wave,
    Advdiff,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Burgers, ModelKind::Wave, ModelKind::Advdiff];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Burgers => "burgers",
            ModelKind::Wave => "wave",
            ModelKind::Advdiff => "advdiff",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "burgers" => Ok(ModelKind::Burgers),
            "wave" => Ok(ModelKind::Wave),
            "advdiff" | "advection-diffusion" | "advection_diffusion" => Ok(ModelKind::Advdiff),
            other => Err(ExperimentError::Usage(format!("unknown model {other:?} (burgers, wave, advdiff)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Reduced settings that finish in minutes on one core.
    Desk,
    /// The full published settings.
    Paper,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        })
    }
}

impl FromStr for Scale {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(ExperimentError::Usage(format!("unknown scale {other:?} (desk, paper)"))),
        }
    }
}

/// Per-model defaults at a given scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub layers: usize,
    pub width: usize,
    pub lr: f64,
    pub epochs: usize,
    pub n_u_list: Vec<usize>,
    pub n_f: usize,
    /// Physics weight of the "with physics" arm of the robustness study.
    pub lambda_on: f64,
    /// Training-set size used by the activation study.
    pub activation_n_u: usize,
    /// Validation-set size of the published setup, kept as metadata.
    pub published_n_val: usize,
}

pub fn preset(model: ModelKind, scale: Scale) -> Preset {
    let paper = match model {
        ModelKind::Burgers => Preset {
            layers: 8,
            width: 20,
            lr: 1e-3,
            epochs: 25_000,
            n_u_list: vec![100, 200, 500],
            n_f: 12_800,
            lambda_on: 0.1,
            activation_n_u: 200,
            published_n_val: 25_600,
        },
        ModelKind::Advdiff => Preset {
            layers: 3,
            width: 40,
            lr: 2e-3,
            epochs: 20_000,
            n_u_list: vec![100, 500, 2500],
            n_f: 5_000,
            lambda_on: 0.5,
            activation_n_u: 500,
            published_n_val: 168_100,
        },
        ModelKind::Wave => Preset {
            layers: 5,
            width: 50,
            lr: 1e-3,
            epochs: 10_000,
            n_u_list: vec![100, 200, 500],
            n_f: 10_000,
            lambda_on: 0.002,
            activation_n_u: 200,
            published_n_val: 21_800,
        },
    };
    match scale {
        Scale::Paper => paper,
        Scale::Desk => Preset {
            layers: paper.layers.div_ceil(2),
            epochs: paper.epochs / 5,
            n_f: match model {
                ModelKind::Burgers => 2_000,
                ModelKind::Advdiff => 1_000,
                ModelKind::Wave => 2_000,
            },
            ..paper
        },
    }
}

/// Everything that determines a run. Serialized field order is part of the
/// run identifier, so fields must not be reordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub model: ModelKind,
    pub scale: Scale,
    /// Burgers viscosity.
    pub nu: f64,
    /// Advection-diffusion diffusivity.
    pub d_coef: f64,
    pub lambda: f64,
    pub n_u: usize,
    pub n_f: usize,
    pub epochs: usize,
    pub lr: f64,
    pub layers: usize,
    pub width: usize,
    pub activation: Activation,
    pub seed: u64,
    pub val_stride: usize,
}

/// Default validation stride: full-grid validation every few epochs.
pub const DEFAULT_VAL_STRIDE: usize = 25;

impl RunSpec {
    /// Preset defaults for `model` at `scale`, first listed training size,
    /// λ = 0, tanh, seed 0.
    pub fn from_preset(model: ModelKind, scale: Scale) -> Self {
        let p = preset(model, scale);
        RunSpec {
            model,
            scale,
            nu: 0.01 / std::f64::consts::PI,
            d_coef: 0.02,
            lambda: 0.0,
            n_u: p.n_u_list[0],
            n_f: p.n_f,
            epochs: p.epochs,
            lr: p.lr,
            layers: p.layers,
            width: p.width,
            activation: Activation::Tanh,
            seed: 0,
            val_stride: DEFAULT_VAL_STRIDE,
        }
    }

    pub fn pde(&self) -> PdeKind {
        match self.model {
            ModelKind::Burgers => PdeKind::Burgers { nu: self.nu },
            ModelKind::Wave => PdeKind::wave(),
            ModelKind::Advdiff => PdeKind::advection_diffusion(self.d_coef, 22.5),
        }
    }

    pub fn net_config(&self) -> MlpConfig {
        let pde = self.pde();
        MlpConfig {
            n_inputs: pde.n_inputs(),
            n_outputs: pde.n_outputs(),
            hidden_layers: self.layers,
            hidden_width: self.width,
            activation: self.activation,
            seed: self.seed,
        }
    }

    /// Hex SHA-256 prefix of the canonical JSON form.
    pub fn run_id(&self) -> String {
        let json = serde_json::to_string(self).expect("run specs serialize");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Usage(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if self.n_u == 0 || self.n_f == 0 || self.epochs == 0 || self.val_stride == 0 {
            return bad("n-u, n-f, epochs and the validation stride must be positive".into());
        }
        if self.layers == 0 || self.width == 0 {
            return bad("layers and width must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        self.pde().validate().map_err(|e| ExperimentError::Usage(e.to_string()))
    }

    /// Cache key of the reference grid this run trains on.
    fn grid_key(&self) -> String {
        match self.model {
            ModelKind::Burgers => format!("burgers nu={:e}", self.nu),
            ModelKind::Wave => "wave".into(),
            ModelKind::Advdiff => format!("advdiff D={:e}", self.d_coef),
        }
    }
}

/// Reference solution for a model with the default discretization.
pub fn generate_grid(model: ModelKind, nu: f64, d_coef: f64) -> Result<SolutionGrid, ExperimentError> {
    Ok(match model {
        ModelKind::Burgers => solve_burgers_spectral(&BurgersConfig { nu, ..Default::default() })?,
        ModelKind::Wave => solve_wave_fd(&WaveConfig::default())?,
        ModelKind::Advdiff => eval_advdiff_analytic(&AdvDiffConfig { d: d_coef, ..Default::default() })?,
    })
}

/// Reference grids shared between runs, generated on first use.
#[derive(Debug, Default)]
pub struct GridCache {
    grids: Mutex<HashMap<String, Arc<SolutionGrid>>>,
}

impl GridCache {
    pub fn new() -> Self {
        GridCache::default()
    }

    pub fn get(&self, spec: &RunSpec) -> Result<Arc<SolutionGrid>, ExperimentError> {
        let mut grids = self.grids.lock().unwrap_or_else(|e| e.into_inner());
        let key = spec.grid_key();
        if let Some(g) = grids.get(&key) {
            return Ok(g.clone());
        }
        let grid = Arc::new(generate_grid(spec.model, spec.nu, spec.d_coef)?);
        grids.insert(key, grid.clone());
        Ok(grid)
    }

    /// Adds an already generated grid, for example one loaded from disk.
    pub fn insert(&self, spec: &RunSpec, grid: SolutionGrid) {
        let mut grids = self.grids.lock().unwrap_or_else(|e| e.into_inner());
        grids.insert(spec.grid_key(), Arc::new(grid));
    }
}

/// The sample sets of a run. Training and collocation sets are drawn with
/// the run seed, so runs differing only in λ share them exactly.
pub fn build_train_config(spec: &RunSpec, grid: &SolutionGrid) -> Result<TrainConfig, ExperimentError> {
    spec.validate()?;
    let pde = spec.pde();
    let mut train_set = sample_training(grid, spec.n_u, spec.seed)?;
    if spec.model == ModelKind::Advdiff {
        train_set = normalize_labels(&train_set)?;
    }
    let collocation = sample_collocation(&pde.domain(), spec.n_f, spec.seed)?;
    Ok(TrainConfig {
        pde,
        net: spec.net_config(),
        lambda: spec.lambda,
        epochs: spec.epochs,
        lr: spec.lr,
        train: train_set,
        collocation,
        validation: SampleSet::full_grid(grid),
        seed: spec.seed,
        val_stride: spec.val_stride,
    })
}

/// One finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub row: ResultRow,
    pub result: RunResult,
}

pub fn execute_run(spec: &RunSpec, cache: &GridCache) -> Result<RunOutcome, ExperimentError> {
    let grid = cache.get(spec)?;
    let config = build_train_config(spec, &grid)?;
    let result = train(&config)?;
    let row = ResultRow::new(spec, &result);
    Ok(RunOutcome { spec: spec.clone(), row, result })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let b = preset(ModelKind::Burgers, Scale::Desk);
        assert_eq!((b.layers, b.width, b.epochs, b.n_f), (4, 20, 5000, 2000));
        let w = preset(ModelKind::Wave, Scale::Paper);
        assert_eq!((w.layers, w.width, w.epochs, w.n_f), (5, 50, 10_000, 10_000));
        assert_eq!(preset(ModelKind::Advdiff, Scale::Desk).layers, 2);
    }

    #[test]
    fn run_id_tracks_every_field() {
        let a = RunSpec::from_preset(ModelKind::Burgers, Scale::Desk);
        assert_eq!(a.run_id(), a.clone().run_id());
        assert_eq!(a.run_id().len(), 16);
        let b = RunSpec { lr: 2e-3, ..a.clone() };
        let c = RunSpec { seed: 1, ..a.clone() };
        assert_ne!(a.run_id(), b.run_id());
        assert_ne!(a.run_id(), c.run_id());
    }

    #[test]
    fn names_parse() {
        assert_eq!("Burgers".parse::<ModelKind>().unwrap(), ModelKind::Burgers);
        assert_eq!("advdiff".parse::<ModelKind>().unwrap(), ModelKind::Advdiff);
        assert!("heat".parse::<ModelKind>().is_err());
        assert_eq!("paper".parse::<Scale>().unwrap(), Scale::Paper);
    }
}
