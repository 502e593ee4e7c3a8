//! Reference solutions used as training and validation data.

mod burgers;
mod grid;
mod wave;

pub use burgers::{solve_burgers_spectral, BurgersConfig};
pub use grid::{Axis, Field, SolutionGrid, GRID_MAGIC, STORAGE_ORDER};
pub use wave::{solve_wave_fd, solve_wave_fd_with, wave_initial, WaveConfig};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::pde::{advdiff_exact, PdeKind};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("courant factor {courant} exceeds the stability limit {limit}")]
    Cfl { courant: f64, limit: f64 },
    #[error("solution became unstable at step {step} (t = {time})")]
    Unstable { step: usize, time: f64 },
    #[error("grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvDiffConfig {
    /// Mesh intervals per spatial direction; nodes are `i/cells`.
    pub cells: usize,
    pub n_t: usize,
    pub t_final: f64,
    pub d: f64,
    pub phi_deg: f64,
}

impl Default for AdvDiffConfig {
    fn default() -> Self {
        AdvDiffConfig { cells: 40, n_t: 100, t_final: 1.0, d: 0.02, phi_deg: 22.5 }
    }
}

/// Closed-form advection-diffusion solution sampled on the unit square.
pub fn eval_advdiff_analytic(config: &AdvDiffConfig) -> Result<SolutionGrid, SolverError> {
    let AdvDiffConfig { cells, n_t, t_final, d, phi_deg } = *config;
    if cells == 0 || n_t < 2 {
        return Err(SolverError::Config(format!("invalid advection-diffusion mesh {config:?}")));
    }
    let pde = PdeKind::advection_diffusion(d, phi_deg);
    pde.validate().map_err(|e| SolverError::Config(e.to_string()))?;
    let PdeKind::AdvectionDiffusion { u, v, .. } = pde else { unreachable!() };
    let xs = Axis::linspace("x", 0.0, 1.0, cells + 1);
    let ys = Axis::linspace("y", 0.0, 1.0, cells + 1);
    let ts = Axis::linspace("t", 0.0, t_final, n_t);
    let mut data = Vec::with_capacity(xs.len() * ys.len() * ts.len());
    for &t in &ts.values {
        for &y in &ys.values {
            for &x in &xs.values {
                data.push(advdiff_exact(d, u, v, x, y, t));
            }
        }
    }
    let mut params = BTreeMap::new();
    params.insert("D".into(), d);
    params.insert("phi_deg".into(), phi_deg);
    SolutionGrid::new(pde, vec![xs, ys, ts], vec![Field { name: "T".into(), data }], params)
}
