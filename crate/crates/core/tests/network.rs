//! Initialization, evaluation paths and parameter files.

mod common;

use common::{net, rel_err};
use pinnlab::autodiff::{ExprTape, JetSpec};
use pinnlab::network::{load_params, save_params, xavier_init, Activation, JetBatch, Mlp, MlpConfig};

fn config(seed: u64) -> MlpConfig {
    MlpConfig { n_inputs: 3, n_outputs: 2, hidden_layers: 3, hidden_width: 24, activation: Activation::Gelu, seed }
}

#[test]
fn xavier_weights_respect_bound_and_biases_are_zero() {
    let cfg = config(9);
    let params = xavier_init(&cfg).unwrap();
    assert_eq!(params.len(), 3 * 24 + 24 + 2 * (24 * 24 + 24) + 24 * 2 + 2);
    for l in params.layout() {
        let bound = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
        let weights = &params.flat[l.weights..l.bias];
        assert!(weights.iter().all(|w| w.abs() < bound));
        assert!(params.flat[l.bias..l.bias + l.fan_out].iter().all(|&b| b == 0.0));
        // Uniform on (-a, a) has variance a²/3.
        let var = weights.iter().map(|w| w * w).sum::<f64>() / weights.len() as f64;
        if weights.len() >= 500 {
            assert!((var / (bound * bound / 3.0) - 1.0).abs() < 0.15, "variance ratio {}", var / (bound * bound / 3.0));
        }
    }
    assert_eq!(xavier_init(&cfg).unwrap(), params);
    assert_ne!(xavier_init(&config(10)).unwrap(), params);
}

#[test]
fn batch_forward_equals_pointwise_forward() {
    let model = Mlp::new(config(1)).unwrap();
    let points: Vec<f64> = (0..30).map(|i| (i as f64 * 0.173).sin()).collect();
    let batch = model.forward_batch(&points).unwrap();
    for (p, out) in points.chunks(3).zip(batch.chunks(2)) {
        assert_eq!(model.forward(p).unwrap(), out);
    }
}

#[test]
fn fused_batch_jets_equal_tape_jets() {
    let model = net(2, 3, 12, Activation::Tanh, 5);
    let spec = JetSpec::new(&[0, 1], &[(0, 0), (1, 1)]).unwrap();
    let points: Vec<f64> = (0..16).map(|i| -0.9 + 0.11 * i as f64).collect();
    let mut batch = JetBatch::new(&model, spec, 8).unwrap();
    batch.forward(&model, &points).unwrap();
    for (p, point) in points.chunks(2).enumerate() {
        let mut tape = ExprTape::new();
        let leaves = model.leaves(&mut tape);
        let u = model.forward_jet(&mut tape, &leaves, point, spec).unwrap().remove(0);
        let tape_comps =
            [u.value, u.d(0).unwrap(), u.d(1).unwrap(), u.dd(0, 0).unwrap(), u.dd(1, 1).unwrap()].map(|v| tape.value(v));
        for (c, want) in tape_comps.into_iter().enumerate() {
            assert!(rel_err(batch.output(&model, c, 0, p), want, 1e-12) < 1e-12, "point {p} component {c}");
        }
    }
}

#[test]
fn params_round_trip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.params");
    let model = Mlp::new(config(3)).unwrap();
    save_params(&path, &model).unwrap();
    assert_eq!(load_params(&path).unwrap(), model);

    std::fs::write(&path, b"not a parameter file").unwrap();
    assert!(load_params(&path).is_err());
}

#[test]
fn relu_network_is_piecewise_linear() {
    let model = net(2, 3, 16, Activation::Relu, 2);
    let spec = JetSpec::new(&[0, 1], &[(0, 0), (0, 1), (1, 1)]).unwrap();
    for i in 0..50 {
        let p = [-0.95 + 0.038 * i as f64, 0.5 - 0.017 * i as f64];
        let mut tape = ExprTape::new();
        let leaves = model.leaves(&mut tape);
        let u = model.forward_jet(&mut tape, &leaves, &p, spec).unwrap().remove(0);
        for (a, b) in [(0, 0), (0, 1), (1, 1)] {
            assert_eq!(tape.value(u.dd(a, b).unwrap()), 0.0);
        }
    }
}

#[test]
fn invalid_shapes_are_rejected() {
    let bad = MlpConfig { hidden_width: 0, ..config(0) };
    assert!(Mlp::new(bad).is_err());
    let model = Mlp::new(config(0)).unwrap();
    assert!(model.forward(&[0.0, 1.0]).is_err());
}
