//! Oracles and helpers shared by the integration tests. Nothing here calls
//! into the code under test for the quantity it checks.

#![allow(dead_code)]

use std::f64::consts::PI;

use pinnlab::autodiff::{jet_apply, jet_lift, ExprTape, Jet2, JetSpec, Opcode};
use pinnlab::dataset::{normalize_labels, sample_collocation, SampleSet};
use pinnlab::network::{Activation, Mlp, MlpConfig};
use pinnlab::pde::PdeKind;
use pinnlab::rng::{stream, StreamTag};
use pinnlab::solvers::SolutionGrid;
use pinnlab::training::{total_loss, Objective};
use rand::Rng;

/// Cole-Hopf representation of the viscous Burgers solution with
/// `u(x, 0) = -sin(πx)`, evaluated by trapezoid quadrature over the heat
/// kernel with log-sum-exp scaling.
pub fn cole_hopf(x: f64, t: f64, nu: f64) -> f64 {
    if t == 0.0 {
        return -(PI * x).sin();
    }
    let width = (4.0 * nu * t).sqrt();
    let half = 12.0 * width;
    let n = 40_000;
    let h = 2.0 * half / n as f64;
    let a = 1.0 / (2.0 * PI * nu);
    let expo = |eta: f64| -a * (PI * (x - eta)).cos() - eta * eta / (4.0 * nu * t);
    let peak = (0..=n).map(|k| expo(-half + h * k as f64)).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=n {
        let eta = -half + h * k as f64;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 } * (expo(eta) - peak).exp();
        num += w * (PI * (x - eta)).sin();
        den += w;
    }
    -num / den
}

/// RMS difference of two (x, y, t) solutions over the nodes of a coarser
/// `base` mesh. Finer meshes must refine `base` by an integer factor.
pub fn diff_on(base: &SolutionGrid, a: &SolutionGrid, b: &SolutionGrid) -> f64 {
    let cells = base.axes[0].len() - 1;
    let at = |g: &SolutionGrid, idx: &[usize]| {
        let r = (g.axes[0].len() - 1) / cells;
        g.fields[0].data[g.flat_index(&[idx[0] * r, idx[1] * r, idx[2]])]
    };
    let mut sum = 0.0;
    for flat in 0..base.n_points() {
        let idx = base.unravel(flat);
        let d = at(a, &idx) - at(b, &idx);
        sum += d * d;
    }
    (sum / base.n_points() as f64).sqrt()
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Fourth-order central first derivative.
pub fn fd1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Fourth-order central second derivative.
pub fn fd2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
}

pub fn net(n_inputs: usize, layers: usize, width: usize, activation: Activation, seed: u64) -> Mlp {
    Mlp::new(MlpConfig { n_inputs, n_outputs: 1, hidden_layers: layers, hidden_width: width, activation, seed }).unwrap()
}

/// Training set with arbitrary labels at random domain points, plus a
/// collocation set. Labels are normalized when `normalized` is set.
pub fn synthetic_sets(pde: &PdeKind, n_u: usize, n_f: usize, seed: u64, normalized: bool) -> (SampleSet, SampleSet) {
    let mut train = sample_collocation(&pde.domain(), n_u, seed + 1000).unwrap();
    let mut rng = stream(seed, StreamTag::Other(7));
    train.label_names = pde.field_names().iter().map(|s| s.to_string()).collect();
    train.labels = Some((0..n_u * pde.n_outputs()).map(|_| rng.gen_range(-1.0..1.0) + 0.5).collect());
    if normalized {
        train = normalize_labels(&train).unwrap();
    }
    let collocation = sample_collocation(&pde.domain(), n_f, seed).unwrap();
    (train, collocation)
}

/// Total loss recorded on a fresh tape.
pub fn loss_value(model: &Mlp, objective: &Objective<'_>) -> f64 {
    let mut tape = ExprTape::new();
    let leaves = model.leaves(&mut tape);
    let terms = total_loss(&mut tape, &leaves, model, objective).unwrap();
    tape.value(terms.loss)
}

/// Parameter gradient of the total loss by one reverse sweep.
pub fn loss_grad(model: &Mlp, objective: &Objective<'_>) -> Vec<f64> {
    let mut tape = ExprTape::new();
    let leaves = model.leaves(&mut tape);
    let terms = total_loss(&mut tape, &leaves, model, objective).unwrap();
    let g = tape.backward(terms.loss).unwrap();
    leaves.iter().map(|&l| g.get(l)).collect()
}

/// Central difference of the total loss in parameter `k`.
pub fn loss_fd(model: &Mlp, objective: &Objective<'_>, k: usize, h: f64) -> f64 {
    let mut m = model.clone();
    m.params.flat[k] = model.params.flat[k] + h;
    let up = loss_value(&m, objective);
    m.params.flat[k] = model.params.flat[k] - h;
    let down = loss_value(&m, objective);
    (up - down) / (2.0 * h)
}

/// The closed-form advection-diffusion solution
/// `T = exp(-q / (D s)) / s`, `s = 4t + 1`,
/// `q = x² + y² + t²(u² + v²) - 2t(xu + yv)`,
/// assembled from tape primitives on input jets.
pub fn advdiff_closed_form_jet(tape: &mut ExprTape, point: &[f64], spec: JetSpec, d: f64, u: f64, v: f64) -> Jet2 {
    let inputs = jet_lift(tape, point, spec);
    let (x, y, t) = (&inputs[0], &inputs[1], &inputs[2]);
    let c = |tape: &mut ExprTape, value: f64| {
        let id = tape.constant(value);
        Jet2::constant(tape, spec, id)
    };
    let op = |tape: &mut ExprTape, op: Opcode, args: &[&Jet2]| jet_apply(tape, op, args).unwrap();

    let four = c(tape, 4.0);
    let one = c(tape, 1.0);
    let four_t = op(tape, Opcode::Mul, &[&four, t]);
    let s = op(tape, Opcode::Add, &[&four_t, &one]);

    let speed2 = c(tape, u * u + v * v);
    let cu = c(tape, 2.0 * u);
    let cv = c(tape, 2.0 * v);
    let xx = op(tape, Opcode::Mul, &[x, x]);
    let yy = op(tape, Opcode::Mul, &[y, y]);
    let tt = op(tape, Opcode::Mul, &[t, t]);
    let tt_s = op(tape, Opcode::Mul, &[&speed2, &tt]);
    let ux = op(tape, Opcode::Mul, &[&cu, x]);
    let vy = op(tape, Opcode::Mul, &[&cv, y]);
    let drift = op(tape, Opcode::Add, &[&ux, &vy]);
    let drift_t = op(tape, Opcode::Mul, &[t, &drift]);
    let r2 = op(tape, Opcode::Add, &[&xx, &yy]);
    let q0 = op(tape, Opcode::Add, &[&r2, &tt_s]);
    let q = op(tape, Opcode::Sub, &[&q0, &drift_t]);

    let dc = c(tape, d);
    let ds = op(tape, Opcode::Mul, &[&dc, &s]);
    let ratio = op(tape, Opcode::Div, &[&q, &ds]);
    let neg = op(tape, Opcode::Neg, &[&ratio]);
    let e = op(tape, Opcode::Exp, &[&neg]);
    op(tape, Opcode::Div, &[&e, &s])
}
