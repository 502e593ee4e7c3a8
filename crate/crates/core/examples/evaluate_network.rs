//! Load saved parameters and inspect the network against the reference.
//!
//! Prints a coarse profile of `u(x, t)` next to the spectral solution and
//! the mean squared Burgers residual of the network on fresh collocation
//! points. Run `train_burgers` first.
//!
//! ```text
//! cargo run --release --example evaluate_network -- out/burgers.params
//! ```

use pinnlab::autodiff::ExprTape;
use pinnlab::dataset::sample_collocation;
use pinnlab::network::load_params;
use pinnlab::pde::PdeKind;
use pinnlab::solvers::{solve_burgers_spectral, BurgersConfig};
use pinnlab::training::Surrogate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "out/burgers.params".into());
    let net = load_params(&path)?;
    let grid = solve_burgers_spectral(&BurgersConfig::default())?;
    let (nx, nt) = (grid.axes[0].len(), grid.axes[1].len());

    println!("{:>6} {:>8} {:>10} {:>10}", "t", "x", "network", "reference");
    for f in [0, nt / 3, 2 * nt / 3, nt - 1] {
        for i in (0..nx).step_by(nx / 8) {
            let p = grid.point(f * nx + i);
            let u = net.forward(&p)?[0];
            println!("{:6.3} {:+8.3} {u:+10.5} {:+10.5}", p[1], p[0], grid.fields[0].data[f * nx + i]);
        }
    }

    let pde = PdeKind::burgers();
    let points = sample_collocation(&pde.domain(), 500, 99)?;
    let mut total = 0.0;
    for i in 0..points.len() {
        let mut tape = ExprTape::new();
        let leaves = net.leaves(&mut tape);
        let jets = net.output_jets(&mut tape, &leaves, points.point(i), pde.jet_spec())?;
        let r = pde.residuals(&mut tape, &jets, points.point(i))?;
        total += tape.value(r[0]).powi(2);
    }
    println!("mean squared residual on 500 fresh points: {:.4e}", total / points.len() as f64);
    Ok(())
}
