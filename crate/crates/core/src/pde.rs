//! PDE residual operators evaluated on network output jets.
//!
//! Input coordinates are ordered `(x, t)` for Burgers and `(x, y, t)` for
//! the two planar problems.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, ExprTape, Jet2, JetSpec, VarId};

pub const BURGERS_X: usize = 0;
pub const BURGERS_T: usize = 1;
pub const PLANE_X: usize = 0;
pub const PLANE_Y: usize = 1;
pub const PLANE_T: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum PdeError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("invalid PDE parameter: {0}")]
    Parameter(String),
    #[error("expected {expected} output jets, got {got}")]
    Outputs { expected: usize, got: usize },
}

/// Water depth below the reference level for the wave problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthField {
    /// `H(x, y) = (1 − x)(2 − sin 3πy)`, sloping to zero at `x = 1`.
    SlopedChannel,
    /// Constant depth.
    Uniform(f64),
}

impl DepthField {
    /// `(H, ∂H/∂x, ∂H/∂y)` at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match self {
            DepthField::SlopedChannel => {
                let s = 2.0 - (3.0 * PI * y).sin();
                let h = (1.0 - x) * s;
                let hx = -s;
                let hy = -3.0 * PI * (1.0 - x) * (3.0 * PI * y).cos();
                (h, hx, hy)
            }
            DepthField::Uniform(h) => (*h, 0.0, 0.0),
        }
    }

    /// Upper bound of `H` on the unit square.
    pub fn max_depth(&self) -> f64 {
        match self {
            DepthField::SlopedChannel => 3.0,
            DepthField::Uniform(h) => *h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PdeKind {
    /// `u_t + u·u_x = ν·u_xx`
    Burgers { nu: f64 },
    /// `η_tt − ∇·(H∇η) = 0`
    Wave { depth: DepthField },
    /// `T_t = D∇²T − (u, v)·∇T`
    AdvectionDiffusion { d: f64, u: f64, v: f64 },
}

/// Axis-aligned bounds of the space-time cylinder, per input coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&p, (&lo, &hi))| p >= lo && p <= hi)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

impl PdeKind {
    pub fn burgers() -> Self {
        PdeKind::Burgers { nu: 0.01 / PI }
    }

    pub fn wave() -> Self {
        PdeKind::Wave { depth: DepthField::SlopedChannel }
    }

    /// Diffusivity `d`, unit velocity at angle `phi_deg` from the x axis.
    pub fn advection_diffusion(d: f64, phi_deg: f64) -> Self {
        let phi = phi_deg.to_radians();
        PdeKind::AdvectionDiffusion { d, u: phi.cos(), v: phi.sin() }
    }

    pub fn advdiff() -> Self {
        Self::advection_diffusion(0.02, 22.5)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PdeKind::Burgers { .. } => "burgers",
            PdeKind::Wave { .. } => "wave",
            PdeKind::AdvectionDiffusion { .. } => "advdiff",
        }
    }

    pub fn validate(&self) -> Result<(), PdeError> {
        match *self {
            PdeKind::Burgers { nu } if !(nu > 0.0 && nu.is_finite()) => {
                Err(PdeError::Parameter(format!("nu must be positive, got {nu}")))
            }
            PdeKind::AdvectionDiffusion { d, u, v } if !(d > 0.0 && d.is_finite() && u.is_finite() && v.is_finite()) => {
                Err(PdeError::Parameter(format!("need D > 0 and finite velocity, got D={d} u={u} v={v}")))
            }
            _ => Ok(()),
        }
    }

    pub fn n_inputs(&self) -> usize {
        match self {
            PdeKind::Burgers { .. } => 2,
            _ => 3,
        }
    }

    pub fn n_outputs(&self) -> usize {
        1
    }

    pub fn input_names(&self) -> &'static [&'static str] {
        match self {
            PdeKind::Burgers { .. } => &["x", "t"],
            _ => &["x", "y", "t"],
        }
    }

    pub fn field_names(&self) -> &'static [&'static str] {
        match self {
            PdeKind::Burgers { .. } => &["u"],
            PdeKind::Wave { .. } => &["eta"],
            PdeKind::AdvectionDiffusion { .. } => &["T"],
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            PdeKind::Burgers { .. } => Domain { lower: vec![-1.0, 0.0], upper: vec![1.0, 1.0] },
            _ => Domain { lower: vec![0.0; 3], upper: vec![1.0; 3] },
        }
    }

    /// Derivatives the residual needs: axes and second-derivative pairs.
    pub fn jet_spec(&self) -> JetSpec {
        let spec = match self {
            PdeKind::Burgers { .. } => {
                JetSpec::new(&[BURGERS_X, BURGERS_T], &[(BURGERS_X, BURGERS_X)])
            }
            PdeKind::Wave { .. } => JetSpec::new(
                &[PLANE_X, PLANE_Y, PLANE_T],
                &[(PLANE_X, PLANE_X), (PLANE_Y, PLANE_Y), (PLANE_T, PLANE_T)],
            ),
            PdeKind::AdvectionDiffusion { .. } => JetSpec::new(
                &[PLANE_X, PLANE_Y, PLANE_T],
                &[(PLANE_X, PLANE_X), (PLANE_Y, PLANE_Y)],
            ),
        };
        spec.expect("static jet specs are valid")
    }

    /// Residual components `f^j` at `point` for the network output jets.
    pub fn residuals(&self, tape: &mut ExprTape, outputs: &[Jet2], point: &[f64]) -> Result<Vec<VarId>, PdeError> {
        if outputs.len() != self.n_outputs() {
            return Err(PdeError::Outputs { expected: self.n_outputs(), got: outputs.len() });
        }
        let r = match *self {
            PdeKind::Burgers { nu } => residual_burgers(tape, &outputs[0], nu)?,
            PdeKind::Wave { depth } => residual_wave(tape, &outputs[0], &depth, point)?,
            PdeKind::AdvectionDiffusion { d, u, v } => residual_advdiff(tape, &outputs[0], d, u, v)?,
        };
        Ok(vec![r])
    }
}

impl PdeKind {
    /// The residual evaluated on plain numbers, together with its partial
    /// derivatives. `comps` holds one output's jet components in
    /// [`PdeKind::jet_spec`] order (value, first derivatives by axis slot,
    /// second derivatives by pair slot); `grad` receives `∂f/∂comps`.
    ///
    /// Every residual is affine in the second derivatives, so this is the
    /// exact first-order expansion of [`PdeKind::residuals`].
    pub fn residual_linearized(&self, comps: &[f64], point: &[f64], grad: &mut [f64]) -> f64 {
        match *self {
            PdeKind::Burgers { nu } => {
                let [u, u_x, u_t, u_xx] = comps[..4] else { unreachable!() };
                grad[..4].copy_from_slice(&[u_x, u, 1.0, -nu]);
                u_t + u * u_x - nu * u_xx
            }
            PdeKind::Wave { depth } => {
                let [_, e_x, e_y, _, e_xx, e_yy, e_tt] = comps[..7] else { unreachable!() };
                let (h, hx, hy) = depth.eval(point[PLANE_X], point[PLANE_Y]);
                grad[..7].copy_from_slice(&[0.0, -hx, -hy, 0.0, -h, -h, 1.0]);
                e_tt - hx * e_x - hy * e_y - h * e_xx - h * e_yy
            }
            PdeKind::AdvectionDiffusion { d, u, v } => {
                let [_, t_x, t_y, t_t, t_xx, t_yy] = comps[..6] else { unreachable!() };
                grad[..6].copy_from_slice(&[0.0, u, v, 1.0, -d, -d]);
                t_t - d * t_xx - d * t_yy + u * t_x + v * t_y
            }
        }
    }
}

impl fmt::Display for PdeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `u_t + u·u_x − ν·u_xx`
pub fn residual_burgers(tape: &mut ExprTape, u: &Jet2, nu: f64) -> Result<VarId, PdeError> {
    let u_t = u.d(BURGERS_T)?;
    let u_x = u.d(BURGERS_X)?;
    let u_xx = u.dd(BURGERS_X, BURGERS_X)?;
    let one = tape.one();
    let neg_nu = tape.constant(-nu);
    Ok(tape.dot(&[(u_t, one), (u.value, u_x), (neg_nu, u_xx)]))
}

/// `η_tt − (H_x·η_x + H_y·η_y + H·(η_xx + η_yy))` with `H` in closed form at
/// `point = (x, y, t)`.
pub fn residual_wave(
    tape: &mut ExprTape,
    eta: &Jet2,
    depth: &DepthField,
    point: &[f64],
) -> Result<VarId, PdeError> {
    let e_tt = eta.dd(PLANE_T, PLANE_T)?;
    let e_x = eta.d(PLANE_X)?;
    let e_y = eta.d(PLANE_Y)?;
    let e_xx = eta.dd(PLANE_X, PLANE_X)?;
    let e_yy = eta.dd(PLANE_Y, PLANE_Y)?;
    let (h, hx, hy) = depth.eval(point[PLANE_X], point[PLANE_Y]);
    let one = tape.one();
    let nhx = tape.constant(-hx);
    let nhy = tape.constant(-hy);
    let nh = tape.constant(-h);
    Ok(tape.dot(&[(e_tt, one), (nhx, e_x), (nhy, e_y), (nh, e_xx), (nh, e_yy)]))
}

/// `T_t − D(T_xx + T_yy) + u·T_x + v·T_y`
pub fn residual_advdiff(tape: &mut ExprTape, temp: &Jet2, d: f64, u: f64, v: f64) -> Result<VarId, PdeError> {
    let t_t = temp.d(PLANE_T)?;
    let t_x = temp.d(PLANE_X)?;
    let t_y = temp.d(PLANE_Y)?;
    let t_xx = temp.dd(PLANE_X, PLANE_X)?;
    let t_yy = temp.dd(PLANE_Y, PLANE_Y)?;
    let one = tape.one();
    let nd = tape.constant(-d);
    let cu = tape.constant(u);
    let cv = tape.constant(v);
    Ok(tape.dot(&[(t_t, one), (nd, t_xx), (nd, t_yy), (cu, t_x), (cv, t_y)]))
}

/// Closed-form advection-diffusion solution
/// `T = exp(−[x² + y² + t²(u²+v²) − 2t(xu + yv)] / (D(4t+1))) / (4t+1)`.
pub fn advdiff_exact(d: f64, u: f64, v: f64, x: f64, y: f64, t: f64) -> f64 {
    let s = 4.0 * t + 1.0;
    let q = x * x + y * y + t * t * (u * u + v * v) - 2.0 * t * (x * u + y * v);
    (-q / (d * s)).exp() / s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet(tape: &mut ExprTape, spec: JetSpec, value: f64, first: &[f64], second: &[f64]) -> Jet2 {
        let v = tape.input(value);
        let f: Vec<VarId> = first.iter().map(|&c| tape.input(c)).collect();
        let s: Vec<VarId> = second.iter().map(|&c| tape.input(c)).collect();
        Jet2::from_parts(spec, v, &f, &s).unwrap()
    }

    #[test]
    fn linearized_residual_matches_tape() {
        let pdes = [PdeKind::burgers(), PdeKind::wave(), PdeKind::advdiff()];
        for pde in pdes {
            let spec = pde.jet_spec();
            let k = 1 + spec.n_axes() + spec.n_pairs();
            let comps: Vec<f64> = (0..k).map(|c| 0.3 * c as f64 - 0.7).collect();
            let point = [0.31, 0.62, 0.4][..pde.n_inputs()].to_vec();
            let mut tape = ExprTape::new();
            let vars: Vec<VarId> = comps.iter().map(|&c| tape.input(c)).collect();
            let na = spec.n_axes();
            let j = Jet2::from_parts(spec, vars[0], &vars[1..1 + na], &vars[1 + na..]).unwrap();
            let r = pde.residuals(&mut tape, &[j], &point).unwrap()[0];
            let g = tape.backward(r).unwrap();
            let mut grad = vec![0.0; k];
            let value = pde.residual_linearized(&comps, &point, &mut grad);
            assert!((value - tape.value(r)).abs() <= 1e-14, "{pde}");
            for c in 0..k {
                assert!((grad[c] - g.get(vars[c])).abs() <= 1e-14, "{pde} component {c}");
            }
        }
    }

    #[test]
    fn constant_fields_have_zero_residual() {
        for pde in [PdeKind::burgers(), PdeKind::wave(), PdeKind::advdiff()] {
            let mut t = ExprTape::new();
            let spec = pde.jet_spec();
            let c = t.input(0.7);
            let u = Jet2::constant(&t, spec, c);
            let point = pde.domain().midpoint();
            let r = pde.residuals(&mut t, &[u], &point).unwrap();
            assert_eq!(t.value(r[0]), 0.0, "{pde}");
        }
    }

    #[test]
    fn burgers_plug_in() {
        let mut t = ExprTape::new();
        let spec = PdeKind::burgers().jet_spec();
        // axes (x, t), pair (x, x)
        let u = jet(&mut t, spec, 0.5, &[1.0, 0.0], &[0.0]);
        let r = residual_burgers(&mut t, &u, 0.01 / PI).unwrap();
        assert_eq!(t.value(r), 0.5);
    }

    #[test]
    fn burgers_decaying_mode_at_crest() {
        let nu = 0.01 / PI;
        let (x, tt) = (0.5f64, 0.0f64);
        let decay = (-nu * PI * PI * tt).exp();
        let u = decay * (PI * x).sin();
        let u_x = decay * PI * (PI * x).cos();
        let u_xx = -PI * PI * u;
        let u_t = -nu * PI * PI * u;
        let mut t = ExprTape::new();
        let j = jet(&mut t, PdeKind::burgers().jet_spec(), u, &[u_x, u_t], &[u_xx]);
        let r = residual_burgers(&mut t, &j, nu).unwrap();
        assert!((t.value(r) - u * u_x).abs() < 1e-15);
        assert!(t.value(r).abs() < 1e-15);
    }

    #[test]
    fn depth_closed_form() {
        let (h, _, _) = DepthField::SlopedChannel.eval(0.0, 0.5);
        assert!((h - 3.0).abs() < 1e-15);
    }

    #[test]
    fn wave_linear_eta() {
        let mut t = ExprTape::new();
        let spec = PdeKind::wave().jet_spec();
        let eta = jet(&mut t, spec, 0.25, &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        let r = residual_wave(&mut t, &eta, &DepthField::SlopedChannel, &[0.25, 0.5, 0.3]).unwrap();
        assert!((t.value(r) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn advdiff_linear_temperature() {
        let pde = PdeKind::advdiff();
        let PdeKind::AdvectionDiffusion { d, u, v } = pde else { unreachable!() };
        assert!((u - 0.923_879_532_511_286_7).abs() < 1e-15);
        assert!((u * u + v * v - 1.0).abs() < 1e-15);
        let mut t = ExprTape::new();
        let temp = jet(&mut t, pde.jet_spec(), 0.3, &[1.0, 0.0, 0.0], &[0.0, 0.0]);
        let r = residual_advdiff(&mut t, &temp, d, u, v).unwrap();
        assert!((t.value(r) - 0.923_879_5).abs() < 1e-7);
    }

    #[test]
    fn missing_components_error() {
        let mut t = ExprTape::new();
        let spec = JetSpec::new(&[0], &[]).unwrap();
        let one = t.one();
        let u = Jet2::constant(&t, spec, one);
        assert!(residual_burgers(&mut t, &u, 0.1).is_err());
        assert!(residual_wave(&mut t, &u, &DepthField::SlopedChannel, &[0.0, 0.0, 0.0]).is_err());
        assert!(residual_advdiff(&mut t, &u, 0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn residuals_are_linear_in_second_derivatives() {
        // scaling only the second-derivative components scales their
        // contribution linearly
        let pde = PdeKind::advdiff();
        let PdeKind::AdvectionDiffusion { d, u, v } = pde else { unreachable!() };
        let eval = |k: f64| {
            let mut t = ExprTape::new();
            let j = jet(&mut t, pde.jet_spec(), 0.0, &[0.0, 0.0, 0.0], &[k * 0.3, k * -1.1]);
            let r = residual_advdiff(&mut t, &j, d, u, v).unwrap();
            t.value(r)
        };
        assert!((eval(2.0) - 2.0 * eval(1.0)).abs() < 1e-15);
        assert!((eval(-3.0) + 3.0 * eval(1.0)).abs() < 1e-15);
    }

    #[test]
    fn parameters_validated() {
        assert!(PdeKind::Burgers { nu: 0.0 }.validate().is_err());
        assert!(PdeKind::AdvectionDiffusion { d: -1.0, u: 1.0, v: 0.0 }.validate().is_err());
        assert!(PdeKind::burgers().validate().is_ok());
    }

    #[test]
    fn exact_solution_values() {
        let PdeKind::AdvectionDiffusion { d, u, v } = PdeKind::advdiff() else { unreachable!() };
        assert_eq!(advdiff_exact(d, u, v, 0.0, 0.0, 0.0), 1.0);
        let expected = 0.2 * (-10f64).exp();
        assert!((advdiff_exact(d, u, v, 0.0, 0.0, 1.0) - expected).abs() < 1e-18);
        assert!((expected - 9.079_985_9e-6).abs() < 1e-12);
    }
}
