//! One physics-informed run on viscous Burgers.
//!
//! Draws `N_u` labelled points from the spectral reference solution and
//! `N_f` collocation points, trains a 4×20 tanh network with Adam on
//! `(1-λ)·ℓ_data + λ·ℓ_physics` and reports the smoothed relative error on
//! the full grid. Parameters are saved for the `evaluate_network` example.
//!
//! ```text
//! cargo run --release --example train_burgers -- [epochs] [lambda] [seed]
//! ```

use pinnlab::experiments::{build_train_config, GridCache, ModelKind, RunSpec, Scale};
use pinnlab::network::save_params;
use pinnlab::training::train;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs = args.first().map_or(Ok(1000), |s| s.parse())?;
    let lambda = args.get(1).map_or(Ok(0.1), |s| s.parse())?;
    let seed = args.get(2).map_or(Ok(0), |s| s.parse())?;

    let spec = RunSpec { epochs, lambda, seed, ..RunSpec::from_preset(ModelKind::Burgers, Scale::Desk) };
    let grid = GridCache::new().get(&spec)?;
    let config = build_train_config(&spec, &grid)?;
    println!(
        "{}x{} {} network, N_u = {}, N_f = {}, lambda = {lambda}, {epochs} epochs",
        spec.layers, spec.width, spec.activation, spec.n_u, spec.n_f
    );

    let result = train(&config)?;
    for (e, loss) in result.val_epochs.iter().zip(&result.val_loss_trace).step_by((result.val_epochs.len() / 10).max(1)) {
        println!("epoch {e:6}: validation relative error {:.4e}", loss.sqrt() / result.error_scale);
    }
    println!(
        "smoothed relative error {:.4e}; final data loss {:.3e}, physics loss {:.3e}; {:.1} s",
        result.relative_error, result.final_data_loss, result.final_physics_loss, result.wall_time_s
    );
    std::fs::create_dir_all("out")?;
    save_params("out/burgers.params", &result.network)?;
    println!("parameters saved to out/burgers.params (run {})", spec.run_id());
    Ok(())
}
