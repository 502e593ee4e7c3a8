//! Relative error against the physics weight λ, with a report.
//!
//! Runs a λ grid for two training-set sizes on parallel workers, stores the
//! table in `out/lambda_sweep/results.csv` and draws the error curves. The
//! sweep resumes: rerunning skips finished runs.
//!
//! ```text
//! cargo run --release --example lambda_sweep -- [model] [epochs] [workers]
//! ```

use pinnlab::experiments::{
    preset, report, sweep_lambda, GridCache, ModelKind, ReportKind, RunSpec, RunnerOptions, Scale, SweepPlan,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let model: ModelKind = args.first().map_or(Ok(ModelKind::Burgers), |s| s.parse())?;
    let epochs = args.get(1).map_or(Ok(500), |s| s.parse())?;
    let workers = args.get(2).map_or(Ok(2), |s| s.parse())?;

    let p = preset(model, Scale::Desk);
    let plan = SweepPlan {
        base: RunSpec { epochs, ..RunSpec::from_preset(model, Scale::Desk) },
        lambdas: vec![0.0, 0.01, 0.1, 0.5, 0.9, 1.0],
        n_u_list: p.n_u_list[..2].to_vec(),
        activations: Vec::new(),
        seeds: vec![0],
    };
    let out = std::path::PathBuf::from("out/lambda_sweep");
    let options = RunnerOptions { workers, out: Some(out.clone()), verbose: true };
    let outcome = sweep_lambda(&plan, &options, &GridCache::new())?;
    println!("{} executed, {} resumed", outcome.executed, outcome.skipped);
    for row in outcome.rows_for(&plan.specs()) {
        println!("N_u {:5}  lambda {:5}  error {:.4e}", row.n_u, row.lambda, row.relative_error);
    }
    for path in report(&outcome.table, ReportKind::Lambda, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
