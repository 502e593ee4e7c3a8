//! Tape and jet derivatives against independent references.

mod common;

use common::{fd1, fd2, net, rel_err};
use pinnlab::autodiff::{erf, tanh, ExprTape, JetSpec, VarId};
use pinnlab::network::Activation;
use proptest::prelude::*;

/// One unary step of a random expression chain, with a plain-f64 twin.
#[derive(Debug, Clone, Copy)]
enum Step {
    Sin,
    Tanh,
    Exp,
    Square,
    Scale(f64),
    MulInput(usize),
    AddInput(usize),
    DivShifted(usize),
}

fn step_strategy() -> impl Strategy<Value = Step> {
    prop_oneof![
        Just(Step::Sin),
        Just(Step::Tanh),
        Just(Step::Exp),
        Just(Step::Square),
        (-2.0..2.0f64).prop_map(Step::Scale),
        (0..3usize).prop_map(Step::MulInput),
        (0..3usize).prop_map(Step::AddInput),
        (0..3usize).prop_map(Step::DivShifted),
    ]
}

/// Keeps intermediate values small so exp never overflows and
/// differences stay well conditioned.
fn squash(v: f64) -> f64 {
    v.tanh()
}

fn eval_plain(steps: &[Step], x: &[f64]) -> f64 {
    let mut v = x[0];
    for s in steps {
        v = match *s {
            Step::Sin => v.sin(),
            Step::Tanh => v.tanh(),
            Step::Exp => squash(v).exp(),
            Step::Square => v * v,
            Step::Scale(c) => c * v,
            Step::MulInput(i) => v * x[i],
            Step::AddInput(i) => v + x[i],
            Step::DivShifted(i) => v / (2.0 + x[i] * x[i]),
        };
    }
    v
}

fn eval_tape(tape: &mut ExprTape, steps: &[Step], x: &[VarId]) -> VarId {
    let mut v = x[0];
    for s in steps {
        v = match *s {
            Step::Sin => tape.sin(v),
            Step::Tanh => tape.tanh(v),
            Step::Exp => {
                let t = tape.tanh(v);
                tape.exp(t).unwrap()
            }
            Step::Square => tape.square(v),
            Step::Scale(c) => tape.scale(v, c),
            Step::MulInput(i) => tape.mul(v, x[i]),
            Step::AddInput(i) => tape.add(v, x[i]),
            Step::DivShifted(i) => {
                let sq = tape.square(x[i]);
                let den = tape.add_const(sq, 2.0);
                tape.div(v, den).unwrap()
            }
        };
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_chains_match_finite_differences(
        steps in prop::collection::vec(step_strategy(), 1..12),
        x in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let mut tape = ExprTape::new();
        let ids: Vec<VarId> = x.iter().map(|&v| tape.input(v)).collect();
        let out = eval_tape(&mut tape, &steps, &ids);
        prop_assert!((tape.value(out) - eval_plain(&steps, &x)).abs() <= 1e-12 * (1.0 + tape.value(out).abs()));
        let grad = tape.backward(out).unwrap();
        for k in 0..3 {
            let along = |s: f64| {
                let mut y = x.clone();
                y[k] = s;
                eval_plain(&steps, &y)
            };
            let fd = fd1(along, x[k], 1e-4);
            // Rounding in the difference quotient scales with |f|.
            let floor = 1e-4 * (1.0 + tape.value(out).abs());
            prop_assert!(rel_err(grad.get(ids[k]), fd, floor) < 1e-5, "d/dx{k}: tape {} fd {fd}", grad.get(ids[k]));
        }
    }

    #[test]
    fn network_jets_match_finite_differences(
        seed in 0u64..1000,
        width in 2usize..10,
        layers in 1usize..4,
        p in prop::collection::vec(-1.0..1.0f64, 2),
    ) {
        let model = net(2, layers, width, Activation::Tanh, seed);
        let spec = JetSpec::new(&[0, 1], &[(0, 0), (0, 1), (1, 1)]).unwrap();
        let mut tape = ExprTape::new();
        let leaves = model.leaves(&mut tape);
        let u = model.forward_jet(&mut tape, &leaves, &p, spec).unwrap().remove(0);
        let f = |a: f64, b: f64| model.forward(&[a, b]).unwrap()[0];
        let h = 1e-3;
        prop_assert!(rel_err(tape.value(u.d(0).unwrap()), fd1(|s| f(s, p[1]), p[0], h), 1e-6) < 1e-5);
        prop_assert!(rel_err(tape.value(u.d(1).unwrap()), fd1(|s| f(p[0], s), p[1], h), 1e-6) < 1e-5);
        prop_assert!(rel_err(tape.value(u.dd(0, 0).unwrap()), fd2(|s| f(s, p[1]), p[0], h), 1e-6) < 1e-4);
        prop_assert!(rel_err(tape.value(u.dd(1, 1).unwrap()), fd2(|s| f(p[0], s), p[1], h), 1e-6) < 1e-4);
        let mixed = fd1(|s| fd1(|r| f(r, s), p[0], h), p[1], h);
        prop_assert!(rel_err(tape.value(u.dd(0, 1).unwrap()), mixed, 1e-6) < 1e-4);
    }
}

#[test]
fn activation_derivatives_match_finite_differences() {
    for act in Activation::ALL {
        for i in 0..41 {
            let x = -4.0 + 0.2 * i as f64 + 0.013;
            if act.has_kink() && x.abs() < 0.05 {
                continue;
            }
            let (v, d1, d2) = act.value_d1_d2(x);
            assert_eq!(v, act.value(x), "{act} value at {x}");
            let f = |s: f64| act.value(s);
            assert!(rel_err(d1, fd1(f, x, 1e-3), 1e-8) < 1e-7, "{act} first derivative at {x}");
            // fd2 carries rounding of order eps·|f|/h².
            let fd = fd2(f, x, 1e-3);
            assert!(rel_err(d2, fd, 1e-4 * (1.0 + v.abs())) < 1e-5, "{act} second derivative at {x}: {d2} vs {fd}");
            let d3 = act.third_derivative(x);
            let g = |s: f64| act.value_d1_d2(s).2;
            assert!(rel_err(d3, fd1(g, x, 1e-3), 1e-6) < 1e-5, "{act} third derivative at {x}");
        }
    }
}

#[test]
fn activation_tape_path_agrees_with_closed_forms() {
    for act in Activation::ALL {
        for x in [-2.3, -0.4, 0.7, 1.9] {
            let mut tape = ExprTape::new();
            let z = tape.input(x);
            let y = act.tape_value(&mut tape, z).unwrap();
            let g = tape.backward(y).unwrap();
            let (v, d1, _) = act.value_d1_d2(x);
            assert!((tape.value(y) - v).abs() <= 1e-14 * (1.0 + v.abs()), "{act} value");
            assert!(rel_err(g.get(z), d1, 1e-12) < 1e-10, "{act} derivative");
        }
    }
}

/// Maclaurin series `erf x = 2/√π Σ (-1)^n x^(2n+1) / (n! (2n+1))`.
fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for n in 1..80 {
        term *= -x * x / n as f64;
        sum += term / (2 * n + 1) as f64;
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

#[test]
fn erf_matches_series() {
    for i in 0..=60 {
        let x = -3.0 + 0.1 * i as f64;
        assert!((erf(x) - erf_series(x)).abs() < 1e-13, "erf({x})");
    }
    let mut tape = ExprTape::new();
    let x = tape.input(0.37);
    let y = tape.erf(x);
    let g = tape.backward(y).unwrap();
    let exact = 2.0 / std::f64::consts::PI.sqrt() * (-0.37f64 * 0.37).exp();
    assert!((g.get(x) - exact).abs() < 1e-15);
}

#[test]
fn fast_tanh_is_accurate() {
    let mut worst = 0.0f64;
    for i in 0..=20_000 {
        let x = -25.0 + 0.0025 * i as f64;
        worst = worst.max((tanh(x) - x.tanh()).abs());
    }
    assert!(worst < 1e-15, "max deviation {worst:e}");
}

#[test]
fn gradient_accumulates_over_shared_subexpressions() {
    // f = (x·y)² + x·y, so df/dx = (2xy + 1)·y.
    let mut tape = ExprTape::new();
    let x = tape.input(1.5);
    let y = tape.input(-0.5);
    let xy = tape.mul(x, y);
    let sq = tape.square(xy);
    let f = tape.add(sq, xy);
    let g = tape.backward(f).unwrap();
    assert_eq!(g.get(x), (2.0 * 1.5 * -0.5 + 1.0) * -0.5);
    assert_eq!(g.get(y), (2.0 * 1.5 * -0.5 + 1.0) * 1.5);
}
