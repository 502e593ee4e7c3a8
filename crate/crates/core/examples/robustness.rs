//! Paired runs with and without the physics loss over several seeds.
//!
//! Each seed fixes the training subset, so the two arms differ only in λ.
//! Prints mean and spread per arm and the reductions from the physics term.
//!
//! ```text
//! cargo run --release --example robustness -- [model] [seeds] [epochs]
//! ```

use pinnlab::experiments::{
    preset, report, robustness_study, robustness_summary, GridCache, ModelKind, ReportKind, RunSpec, RunnerOptions,
    Scale,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let model: ModelKind = args.first().map_or(Ok(ModelKind::Burgers), |s| s.parse())?;
    let seeds: u64 = args.get(1).map_or(Ok(4), |s| s.parse())?;
    let epochs = args.get(2).map_or(Ok(500), |s| s.parse())?;

    let p = preset(model, Scale::Desk);
    let base = RunSpec { epochs, n_u: p.activation_n_u, ..RunSpec::from_preset(model, Scale::Desk) };
    let out = std::path::PathBuf::from("out/robustness");
    let options = RunnerOptions { workers: 2, out: Some(out.clone()), verbose: false };
    let seeds: Vec<u64> = (0..seeds).collect();
    let outcome = robustness_study(&base, p.lambda_on, &seeds, &options, &GridCache::new())?;

    for s in robustness_summary(&outcome.table) {
        println!("{} N_u = {}, {} seeds", s.model, s.n_u, s.without.runs);
        println!("  lambda 0     mean {:.4e}  std {:.3e}  median {:.4e}", s.without.mean, s.without.std, s.without.median);
        println!("  lambda {:<5} mean {:.4e}  std {:.3e}  median {:.4e}", s.with.lambda, s.with.mean, s.with.std, s.with.median);
        println!("  mean {:+.1}%, std {:+.1}%", -s.mean_reduction_pct(), -s.std_reduction_pct());
    }
    report(&outcome.table, ReportKind::Robustness, &out)?;
    println!("plot in {}", out.join("robustness.svg").display());
    Ok(())
}
