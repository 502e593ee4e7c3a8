//! Second-order input derivatives of a network with degree-2 jets.
//!
//! A jet carries a value together with first derivatives along chosen
//! input axes and selected second derivatives. Because every component is a
//! tape node, parameter gradients of expressions such as `u_t + u·u_x` come
//! from a single reverse sweep.
//!
//! ```text
//! cargo run --release --example input_jets -- gelu
//! ```

use pinnlab::autodiff::{ExprTape, JetSpec};
use pinnlab::network::{Activation, Mlp, MlpConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let activation: Activation = std::env::args().nth(1).as_deref().unwrap_or("tanh").parse()?;
    let net = Mlp::new(MlpConfig { n_inputs: 2, n_outputs: 1, hidden_layers: 3, hidden_width: 16, activation, seed: 4 })?;

    // Axes x (0) and t (1); second derivative u_xx only.
    let spec = JetSpec::new(&[0, 1], &[(0, 0)])?;
    let point = [0.3, 0.6];
    let mut tape = ExprTape::new();
    let leaves = net.leaves(&mut tape);
    let u = net.forward_jet(&mut tape, &leaves, &point, spec)?.remove(0);

    let along_x = |x: f64| net.forward(&[x, point[1]]).unwrap()[0];
    let along_t = |t: f64| net.forward(&[point[0], t]).unwrap()[0];
    let h = 1e-4;
    println!("{activation} network at (x, t) = {point:?}");
    println!("u    {:+.10}  forward {:+.10}", tape.value(u.value), along_x(point[0]));
    println!("u_x  {:+.10}  fd {:+.10}", tape.value(u.d(0)?), (along_x(point[0] + h) - along_x(point[0] - h)) / (2.0 * h));
    println!("u_t  {:+.10}  fd {:+.10}", tape.value(u.d(1)?), (along_t(point[1] + h) - along_t(point[1] - h)) / (2.0 * h));
    let fd_xx = (along_x(point[0] + h) - 2.0 * along_x(point[0]) + along_x(point[0] - h)) / (h * h);
    println!("u_xx {:+.10}  fd {:+.10}", tape.value(u.dd(0, 0)?), fd_xx);

    // Burgers-type residual and its gradient with respect to all weights.
    let uux = tape.mul(u.value, u.d(0)?);
    let adv = tape.add(u.d(1)?, uux);
    let visc = tape.scale(u.dd(0, 0)?, 0.01 / std::f64::consts::PI);
    let residual = tape.sub(adv, visc);
    let sq = tape.square(residual);
    let grad = tape.backward(sq)?;
    let norm = leaves.iter().map(|&l| grad.get(l).powi(2)).sum::<f64>().sqrt();
    println!("residual {:+.6e}, |d residual² / d params| = {norm:.6e} over {} parameters", tape.value(residual), leaves.len());
    Ok(())
}
