//! Reference solutions for the three models, written to disk.
//!
//! Produces the spectral Burgers solution, the finite-difference wave
//! solution over the sloped channel and the closed-form advection-diffusion
//! field, each as a binary grid and a CSV table, plus a training sample and
//! a collocation sample.
//!
//! ```text
//! cargo run --release --example reference_data -- out/data
//! ```

use std::path::PathBuf;

use pinnlab::dataset::{sample_collocation, sample_training};
use pinnlab::experiments::{generate_grid, ModelKind};
use pinnlab::pde::PdeKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/data".into()));
    std::fs::create_dir_all(&out)?;
    for model in ModelKind::ALL {
        let started = std::time::Instant::now();
        let grid = generate_grid(model, 0.01 / std::f64::consts::PI, 0.02)?;
        let shape: Vec<String> = grid.axes.iter().map(|a| format!("{} {}", a.name, a.len())).collect();
        let values = &grid.fields[0].data;
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        println!(
            "{model:8} {} = {} points, {} in [{lo:+.4}, {hi:+.4}], {:.2} s",
            shape.join(" x "),
            grid.n_points(),
            grid.fields[0].name,
            started.elapsed().as_secs_f64()
        );
        grid.save(out.join(format!("{model}.grid")))?;
        grid.save_csv(out.join(format!("{model}.csv")))?;

        let pde: PdeKind = grid.pde;
        sample_training(&grid, 200, 0)?.save_csv(out.join(format!("{model}_train.csv")))?;
        sample_collocation(&pde.domain(), 2000, 0)?.save_csv(out.join(format!("{model}_collocation.csv")))?;
    }
    println!("written to {}", out.display());
    Ok(())
}
