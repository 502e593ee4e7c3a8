//! Compare the nine activation functions on one model.
//!
//! Also shows why ReLU struggles with second-order PDEs: a piecewise-linear
//! network has `u_xx = 0` almost everywhere, so the diffusion term is
//! invisible to the physics loss.
//!
//! ```text
//! cargo run --release --example activations -- [epochs] [seeds]
//! ```

use pinnlab::autodiff::{ExprTape, JetSpec};
use pinnlab::experiments::{
    activation_study, median, preset, report, GridCache, ModelKind, ReportKind, RunSpec, RunnerOptions, Scale,
};
use pinnlab::network::{Activation, Mlp, MlpConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs = args.first().map_or(Ok(400), |s| s.parse())?;
    let seeds: u64 = args.get(1).map_or(Ok(2), |s| s.parse())?;

    let relu = Mlp::new(MlpConfig { n_inputs: 2, n_outputs: 1, hidden_layers: 3, hidden_width: 20, activation: Activation::Relu, seed: 1 })?;
    let spec = JetSpec::new(&[0], &[(0, 0)])?;
    let mut tape = ExprTape::new();
    let leaves = relu.leaves(&mut tape);
    let u = relu.forward_jet(&mut tape, &leaves, &[0.2, 0.4], spec)?.remove(0);
    println!("ReLU network: u_x = {:+.4}, u_xx = {}", tape.value(u.d(0)?), tape.value(u.dd(0, 0)?));

    let p = preset(ModelKind::Burgers, Scale::Desk);
    let base = RunSpec {
        epochs,
        n_u: p.activation_n_u,
        lambda: p.lambda_on,
        ..RunSpec::from_preset(ModelKind::Burgers, Scale::Desk)
    };
    let out = std::path::PathBuf::from("out/activations");
    let options = RunnerOptions { workers: 2, out: Some(out.clone()), verbose: false };
    let seeds: Vec<u64> = (0..seeds).collect();
    let outcome = activation_study(&base, &Activation::ALL, &seeds, &options, &GridCache::new())?;

    let mut ranked: Vec<(Activation, f64)> = Activation::ALL
        .iter()
        .map(|&a| {
            let mut e: Vec<f64> =
                outcome.table.rows.iter().filter(|r| r.activation == a).map(|r| r.relative_error).collect();
            e.sort_by(f64::total_cmp);
            (a, median(&e))
        })
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    for (a, e) in ranked {
        println!("{:>11}  median relative error {e:.4e}", a.name());
    }
    report(&outcome.table, ReportKind::Activations, &out)?;
    Ok(())
}
