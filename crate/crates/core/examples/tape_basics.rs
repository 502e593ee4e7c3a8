//! Reverse-mode differentiation on the scalar tape.
//!
//! Records `f(x, y) = x·sin(y) + exp(x·y) / (1 + y²)`, reads the gradient
//! from one backward sweep and compares it with central differences.
//!
//! ```text
//! cargo run --release --example tape_basics
//! ```

use pinnlab::autodiff::ExprTape;

fn f(x: f64, y: f64) -> f64 {
    x * y.sin() + (x * y).exp() / (1.0 + y * y)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (x0, y0) = (0.7, -1.3);
    let mut tape = ExprTape::new();
    let x = tape.input(x0);
    let y = tape.input(y0);

    let sin_y = tape.sin(y);
    let first = tape.mul(x, sin_y);
    let xy = tape.mul(x, y);
    let num = tape.exp(xy)?;
    let y2 = tape.square(y);
    let den = tape.add_const(y2, 1.0);
    let second = tape.div(num, den)?;
    let out = tape.add(first, second);

    let grad = tape.backward(out)?;
    let h = 1e-6;
    let fd_x = (f(x0 + h, y0) - f(x0 - h, y0)) / (2.0 * h);
    let fd_y = (f(x0, y0 + h) - f(x0, y0 - h)) / (2.0 * h);

    println!("f = {:.12} (direct {:.12}), {} tape nodes", tape.value(out), f(x0, y0), tape.len());
    println!("df/dx tape {:+.12}  finite difference {:+.12}", grad.get(x), fd_x);
    println!("df/dy tape {:+.12}  finite difference {:+.12}", grad.get(y), fd_y);
    Ok(())
}
