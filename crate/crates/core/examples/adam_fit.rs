//! Fit a network to a 1-D function with Adam and tape gradients.
//!
//! The smallest end-to-end loop: forward on the tape, one reverse sweep,
//! one optimizer step. No PDE involved.
//!
//! ```text
//! cargo run --release --example adam_fit
//! ```

use pinnlab::autodiff::{ExprTape, JetSpec};
use pinnlab::network::{Activation, Mlp, MlpConfig};
use pinnlab::optim::{AdamConfig, AdamState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut net = Mlp::new(MlpConfig { n_inputs: 1, n_outputs: 1, hidden_layers: 2, hidden_width: 16, activation: Activation::Tanh, seed: 0 })?;
    let xs: Vec<f64> = (0..64).map(|i| -1.0 + 2.0 * i as f64 / 63.0).collect();
    let target = |x: f64| (3.0 * x).sin() * (-x * x).exp();
    let mut adam = AdamState::new(net.params.len(), AdamConfig::with_lr(5e-3));
    let mut grad = vec![0.0; net.params.len()];

    for epoch in 0..=3000 {
        let mut tape = ExprTape::new();
        let leaves = net.leaves(&mut tape);
        let mut squares = Vec::with_capacity(xs.len());
        for &x in &xs {
            let out = net.forward_jet(&mut tape, &leaves, &[x], JetSpec::default())?;
            let e = tape.add_const(out[0].value, -target(x));
            squares.push((e, e));
        }
        let sse = tape.dot(&squares);
        let mse = tape.scale(sse, 1.0 / xs.len() as f64);
        let g = tape.backward(mse)?;
        for (slot, &l) in grad.iter_mut().zip(&leaves) {
            *slot = g.get(l);
        }
        if epoch % 500 == 0 {
            println!("epoch {epoch:5}: mse {:.4e}", tape.value(mse));
        }
        adam.step(&mut net.params.flat, &grad)?;
    }
    Ok(())
}
