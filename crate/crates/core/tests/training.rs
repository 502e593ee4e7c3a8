//! Loss assembly, optimizer and the training loop.

mod common;

use common::{advdiff_closed_form_jet, loss_value, net, synthetic_sets};
use pinnlab::autodiff::{ExprTape, Jet2, JetSpec, VarId};
use pinnlab::dataset::{sample_collocation, SampleSet};
use pinnlab::network::Activation;
use pinnlab::optim::{AdamConfig, AdamState, OptimError};
use pinnlab::pde::{advdiff_exact, PdeKind};
use pinnlab::training::{relative_error, total_loss, train, Objective, Surrogate, TrainConfig, TrainError};

/// The exact advection-diffusion field posing as a trainable model.
struct ClosedForm {
    d: f64,
    u: f64,
    v: f64,
}

impl Surrogate for ClosedForm {
    fn params(&self) -> &[f64] {
        &[]
    }

    fn n_outputs(&self) -> usize {
        1
    }

    fn output_jets(&self, tape: &mut ExprTape, _: &[VarId], point: &[f64], spec: JetSpec) -> Result<Vec<Jet2>, TrainError> {
        Ok(vec![advdiff_closed_form_jet(tape, point, spec, self.d, self.u, self.v)])
    }
}

#[test]
fn exact_solution_has_zero_loss() {
    let pde = PdeKind::advdiff();
    let PdeKind::AdvectionDiffusion { d, u, v } = pde else { unreachable!() };
    let mut train = sample_collocation(&pde.domain(), 200, 1).unwrap();
    let labels = train.inputs.chunks(3).map(|p| advdiff_exact(d, u, v, p[0], p[1], p[2])).collect();
    train.labels = Some(labels);
    train.label_names = vec!["T".into()];
    let collocation = sample_collocation(&pde.domain(), 500, 2).unwrap();
    let model = ClosedForm { d, u, v };
    let mut tape = ExprTape::new();
    let leaves = model.leaves(&mut tape);
    let objective = Objective { pde, lambda: 0.5, train: &train, collocation: &collocation };
    let terms = total_loss(&mut tape, &leaves, &model, &objective).unwrap();
    assert!(terms.data_loss <= 1e-10, "data loss {:e}", terms.data_loss);
    assert!(terms.physics_loss <= 1e-8, "physics loss {:e}", terms.physics_loss);
}

#[test]
fn lambda_interpolates_between_the_two_losses() {
    let pde = PdeKind::burgers();
    let model = net(2, 2, 6, Activation::Tanh, 0);
    let (train, collocation) = synthetic_sets(&pde, 10, 20, 0, false);
    let at = |lambda| loss_value(&model, &Objective { pde, lambda, train: &train, collocation: &collocation });
    let (data, phys) = (at(0.0), at(1.0));
    for lambda in [0.1, 0.5, 0.9] {
        let want = (1.0 - lambda) * data + lambda * phys;
        assert!((at(lambda) - want).abs() <= 1e-12 * want.abs());
    }
}

#[test]
fn objective_rejects_bad_inputs() {
    let pde = PdeKind::burgers();
    let model = net(2, 1, 4, Activation::Tanh, 0);
    let (train, collocation) = synthetic_sets(&pde, 4, 4, 0, false);
    let mut tape = ExprTape::new();
    let leaves = model.leaves(&mut tape);
    let bad_lambda = Objective { pde, lambda: 1.5, train: &train, collocation: &collocation };
    assert!(total_loss(&mut tape, &leaves, &model, &bad_lambda).is_err());
    let empty = SampleSet { inputs: vec![], labels: Some(vec![]), ..train.clone() };
    let no_data = Objective { pde, lambda: 0.5, train: &empty, collocation: &collocation };
    assert!(total_loss(&mut tape, &leaves, &model, &no_data).is_err());
}

#[test]
fn adam_minimizes_a_quadratic_and_matches_hand_computed_first_step() {
    let mut adam = AdamState::new(2, AdamConfig::with_lr(0.1));
    let mut p = vec![3.0, -2.0];
    // After bias correction the first step is lr·g / (|g| + eps).
    adam.step(&mut p, &[6.0, -0.5]).unwrap();
    assert!((p[0] - (3.0 - 0.1 * 6.0 / (6.0 + 1e-8))).abs() < 1e-14);
    assert!((p[1] - (-2.0 + 0.1 * 0.5 / (0.5 + 1e-8))).abs() < 1e-14);
    for _ in 0..2000 {
        let g = [2.0 * p[0], 8.0 * p[1]];
        adam.step(&mut p, &g).unwrap();
    }
    assert!(p[0].abs() < 1e-3 && p[1].abs() < 1e-3, "{p:?}");

    let before = p.clone();
    assert!(matches!(adam.step(&mut p, &[f64::NAN, 0.0]), Err(OptimError::NonFiniteGradient { index: 0, .. })));
    assert_eq!(p, before);
}

#[test]
fn relative_error_known_values() {
    assert_eq!(relative_error(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
    // √MSE / ‖y‖₂ with MSE = 0.5 and ‖y‖ = 5.
    assert!((relative_error(&[3.0, 4.0], &[4.0, 4.0]).unwrap() - 0.5f64.sqrt() / 5.0).abs() < 1e-15);
    assert!(relative_error(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn training_reduces_loss_and_is_reproducible() {
    let pde = PdeKind::burgers();
    let (train_set, collocation) = synthetic_sets(&pde, 20, 50, 4, false);
    let config = TrainConfig {
        pde,
        net: net(2, 2, 8, Activation::Tanh, 0).config,
        lambda: 0.2,
        epochs: 200,
        lr: 5e-3,
        train: train_set.clone(),
        collocation,
        validation: train_set,
        seed: 0,
        val_stride: 10,
    };
    let a = train(&config).unwrap();
    let b = train(&config).unwrap();
    assert_eq!(a.network, b.network);
    assert_eq!(a.relative_error.to_bits(), b.relative_error.to_bits());
    let first = a.val_loss_trace[0];
    let last = *a.val_loss_trace.last().unwrap();
    assert!(last < first, "validation loss {first} -> {last}");
    assert_eq!(*a.val_epochs.last().unwrap(), 200);
}
