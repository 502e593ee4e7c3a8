//! Command-line front end: reference data, single runs, sweeps and reports.
//!
//! Exit codes: 0 on success, 1 on usage or runtime errors, 2 when a single
//! `train` run diverges.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use pinnlab::dataset::{sample_collocation, sample_training};
use pinnlab::experiments::{
    activation_study, build_train_config, generate_grid, preset, record_run, report, robustness_study,
    robustness_summary, sweep_lambda, ConfigFile, ExperimentError, GridCache, ModelKind, ReportKind, ResultRow,
    ResultsTable, RunSpec, RunnerOptions, Scale, SweepOutcome, SweepPlan, DEFAULT_LAMBDA_GRID, RESULTS_FILE,
};
use pinnlab::network::{save_params, Activation};
use pinnlab::training::train;

#[derive(Debug, Parser)]
#[command(name = "pinnlab", version, about = "Physics-informed neural network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the reference grid plus training and collocation samples.
    Generate {
        /// burgers, wave or advdiff
        model: ModelKind,
    },
    /// Train one network and append its row to the results table.
    Train,
    /// Error against λ for each training-set size.
    SweepLambda {
        /// Comma-separated λ values; a default grid when omitted.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Comma-separated training-set sizes; the preset list when omitted.
        #[arg(long, value_delimiter = ',')]
        n_u_list: Option<Vec<usize>>,
        /// Seeds as a count (`3` means 0,1,2), a range `a..b` or a list.
        #[arg(long, default_value = "1")]
        seeds: String,
    },
    /// Paired runs with and without the physics loss.
    Robustness {
        #[arg(long, default_value = "25")]
        seeds: String,
    },
    /// One run per activation and seed.
    Activations {
        /// Comma-separated activations; all nine when omitted.
        #[arg(long, value_delimiter = ',')]
        activations: Option<Vec<Activation>>,
        #[arg(long, default_value = "5")]
        seeds: String,
    },
    /// Plots from an existing results table.
    Report {
        /// lambda, robustness, activations or all
        #[arg(long, default_value = "all")]
        kind: String,
        /// Results table to read; `<out>/results.csv` when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

/// Run settings. Unset flags fall back to the config file, then to the
/// preset of the chosen model and scale.
#[derive(Debug, Args)]
struct Flags {
    /// Flat `key = value` file with the same keys as these flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<ModelKind>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    nu: Option<f64>,
    #[arg(long, global = true)]
    d_coef: Option<f64>,
    #[arg(long, global = true)]
    n_u: Option<usize>,
    #[arg(long, global = true)]
    n_f: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Hidden layers.
    #[arg(long, global = true)]
    layers: Option<usize>,
    /// Neurons per hidden layer.
    #[arg(long, global = true)]
    width: Option<usize>,
    #[arg(long, global = true)]
    activation: Option<Activation>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// desk (reduced) or paper (full) presets.
    #[arg(long, global = true)]
    scale: Option<Scale>,
    /// Epochs between full validation passes.
    #[arg(long, global = true)]
    val_stride: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallel runs; all cores when omitted.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Suppress per-run progress lines.
    #[arg(long, global = true)]
    quiet: bool,
}

/// Flags merged with the config file.
struct Settings {
    flags: Flags,
    file: ConfigFile,
}

impl Settings {
    fn value<T>(&self, flag: &Option<T>, key: &str) -> Result<Option<T>, ExperimentError>
    where
        T: FromStr + Clone,
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v.clone())),
            None => self.file.get(key),
        }
    }

    fn model(&self) -> Result<ModelKind, ExperimentError> {
        Ok(self.value(&self.flags.model, "model")?.unwrap_or(ModelKind::Burgers))
    }

    /// The run described by the flags, with `n_u` and `lambda` defaulting
    /// to the given values when not set explicitly.
    fn spec(&self, default_n_u: Option<usize>, default_lambda: f64) -> Result<RunSpec, ExperimentError> {
        let f = &self.flags;
        let model = self.model()?;
        let scale = self.value(&f.scale, "scale")?.unwrap_or(Scale::Desk);
        let base = RunSpec::from_preset(model, scale);
        Ok(RunSpec {
            nu: self.value(&f.nu, "nu")?.unwrap_or(base.nu),
            d_coef: self.value(&f.d_coef, "d-coef")?.unwrap_or(base.d_coef),
            lambda: self.value(&f.lambda, "lambda")?.unwrap_or(default_lambda),
            n_u: self.value(&f.n_u, "n-u")?.or(default_n_u).unwrap_or(base.n_u),
            n_f: self.value(&f.n_f, "n-f")?.unwrap_or(base.n_f),
            epochs: self.value(&f.epochs, "epochs")?.unwrap_or(base.epochs),
            lr: self.value(&f.lr, "lr")?.unwrap_or(base.lr),
            layers: self.value(&f.layers, "layers")?.unwrap_or(base.layers),
            width: self.value(&f.width, "width")?.unwrap_or(base.width),
            activation: self.value(&f.activation, "activation")?.unwrap_or(base.activation),
            seed: self.value(&f.seed, "seed")?.unwrap_or(base.seed),
            val_stride: self.value(&f.val_stride, "val-stride")?.unwrap_or(base.val_stride),
            ..base
        })
    }

    fn out(&self) -> Result<PathBuf, ExperimentError> {
        Ok(self.value(&self.flags.out, "out")?.unwrap_or_else(|| PathBuf::from("results")))
    }

    fn runner(&self) -> Result<RunnerOptions, ExperimentError> {
        let workers = match self.value(&self.flags.workers, "workers")? {
            Some(0) => return Err(ExperimentError::Usage("--workers must be at least 1".into())),
            Some(w) => w,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Ok(RunnerOptions { workers, out: Some(self.out()?), verbose: !self.flags.quiet })
    }
}

/// `3` means seeds 0, 1, 2; `a..b` is half-open; otherwise a comma list.
fn parse_seeds(text: &str) -> Result<Vec<u64>, ExperimentError> {
    let bad = || ExperimentError::Usage(format!("cannot parse seeds {text:?}"));
    let text = text.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..b).collect()
    } else if text.contains(',') {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    } else {
        (0..text.parse::<u64>().map_err(|_| bad())?).collect()
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, ExperimentError> {
    let file = match &cli.flags.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let settings = Settings { flags: cli.flags, file };
    let cache = GridCache::new();
    match cli.command {
        Command::Generate { model } => generate(&settings, model),
        Command::Train => train_one(&settings, &cache),
        Command::SweepLambda { lambdas, n_u_list, seeds } => {
            let base = settings.spec(None, 0.0)?;
            let n_u_list = match (n_u_list, settings.value(&settings.flags.n_u, "n-u")?) {
                (Some(list), _) => list,
                (None, Some(n)) => vec![n],
                (None, None) => preset(base.model, base.scale).n_u_list,
            };
            let lambdas = match (lambdas, settings.value(&settings.flags.lambda, "lambda")?) {
                (Some(list), _) => list,
                (None, Some(l)) => vec![l],
                (None, None) => DEFAULT_LAMBDA_GRID.to_vec(),
            };
            let plan = SweepPlan { base, lambdas, n_u_list, activations: Vec::new(), seeds: parse_seeds(&seeds)? };
            let outcome = sweep_lambda(&plan, &settings.runner()?, &cache)?;
            finish_sweep(&settings, &outcome, ReportKind::Lambda)
        }
        Command::Robustness { seeds } => {
            let model = settings.model()?;
            let scale = settings.value(&settings.flags.scale, "scale")?.unwrap_or(Scale::Desk);
            let p = preset(model, scale);
            let base = settings.spec(Some(p.activation_n_u), p.lambda_on)?;
            let lambda_on = base.lambda;
            let base = RunSpec { lambda: 0.0, ..base };
            let outcome = robustness_study(&base, lambda_on, &parse_seeds(&seeds)?, &settings.runner()?, &cache)?;
            let code = finish_sweep(&settings, &outcome, ReportKind::Robustness)?;
            print_robustness(&outcome.table);
            Ok(code)
        }
        Command::Activations { activations, seeds } => {
            let model = settings.model()?;
            let scale = settings.value(&settings.flags.scale, "scale")?.unwrap_or(Scale::Desk);
            let p = preset(model, scale);
            let base = settings.spec(Some(p.activation_n_u), p.lambda_on)?;
            let acts = activations.unwrap_or_else(|| Activation::ALL.to_vec());
            let outcome = activation_study(&base, &acts, &parse_seeds(&seeds)?, &settings.runner()?, &cache)?;
            finish_sweep(&settings, &outcome, ReportKind::Activations)
        }
        Command::Report { kind, input } => {
            let out = settings.out()?;
            let input = input.unwrap_or_else(|| out.join(RESULTS_FILE));
            let table = ResultsTable::load(&input)?;
            let kinds = if kind.trim() == "all" { ReportKind::ALL.to_vec() } else { vec![kind.parse()?] };
            for kind in kinds {
                for path in report(&table, kind, &out)? {
                    println!("{}", path.display());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn generate(settings: &Settings, model: ModelKind) -> Result<ExitCode, ExperimentError> {
    let spec = RunSpec { model, ..settings.spec(None, 0.0)? };
    spec.validate()?;
    let out = settings.out()?;
    std::fs::create_dir_all(&out)?;
    let grid = generate_grid(model, spec.nu, spec.d_coef)?;
    let grid_bin = out.join(format!("{model}_grid.bin"));
    let grid_csv = out.join(format!("{model}_grid.csv"));
    grid.save(&grid_bin)?;
    grid.save_csv(&grid_csv)?;
    let train_csv = out.join(format!("{model}_train_n{}_seed{}.csv", spec.n_u, spec.seed));
    sample_training(&grid, spec.n_u, spec.seed)?.save_csv(&train_csv)?;
    let colloc_csv = out.join(format!("{model}_collocation_n{}_seed{}.csv", spec.n_f, spec.seed));
    sample_collocation(&spec.pde().domain(), spec.n_f, spec.seed)?.save_csv(&colloc_csv)?;
    println!("{model}: {} grid points", grid.n_points());
    for p in [grid_bin, grid_csv, train_csv, colloc_csv] {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn train_one(settings: &Settings, cache: &GridCache) -> Result<ExitCode, ExperimentError> {
    let spec = settings.spec(None, 0.0)?;
    let grid = cache.get(&spec)?;
    let config = build_train_config(&spec, &grid)?;
    let result = train(&config)?;
    let row = ResultRow::new(&spec, &result);
    let out = settings.out()?;
    record_run(&out, &spec, row.clone())?;

    let run_dir = out.join("runs").join(&row.run_id);
    std::fs::create_dir_all(&run_dir)?;
    save_params(run_dir.join("params.bin"), &result.network).map_err(|e| ExperimentError::Usage(e.to_string()))?;
    write_trace(&run_dir.join("trace.csv"), &result.loss_ratio_trace, &result.val_epochs, &result.val_loss_trace)?;
    std::fs::write(run_dir.join("spec.json"), serde_json::to_string_pretty(&spec)?)?;

    println!(
        "{} {} lambda={} N_u={} N_f={} {} seed={}: relative error {:e}, data loss {:e}, physics loss {:e} ({:.1} s)",
        row.run_id,
        row.model,
        row.lambda,
        row.n_u,
        row.n_f,
        row.activation,
        row.seed,
        row.relative_error,
        row.final_data_loss,
        row.final_physics_loss,
        row.wall_time_s
    );
    if let Some(epoch) = result.diverged_at {
        eprintln!("run diverged at epoch {epoch}");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

/// Per-epoch loss ratio, with the validation loss on evaluated epochs.
fn write_trace(path: &Path, ratio: &[f64], val_epochs: &[usize], val_loss: &[f64]) -> Result<(), ExperimentError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch,loss_ratio,val_mse")?;
    let mut val = val_epochs.iter().zip(val_loss).peekable();
    for (i, r) in ratio.iter().enumerate() {
        let epoch = i + 1;
        match val.peek() {
            Some(&(&e, &v)) if e == epoch => {
                writeln!(w, "{epoch},{r:e},{v:e}")?;
                val.next();
            }
            _ => writeln!(w, "{epoch},{r:e},")?,
        }
    }
    w.flush()?;
    Ok(())
}

fn finish_sweep(settings: &Settings, outcome: &SweepOutcome, kind: ReportKind) -> Result<ExitCode, ExperimentError> {
    let out = settings.out()?;
    println!(
        "{} runs executed, {} already present, {} failed; table at {}",
        outcome.executed,
        outcome.skipped,
        outcome.failures.len(),
        out.join(RESULTS_FILE).display()
    );
    for f in &outcome.failures {
        eprintln!("run {} failed: {}", f.run_id, f.message);
    }
    if !outcome.table.is_empty() {
        report(&outcome.table, kind, &out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn print_robustness(table: &ResultsTable) {
    let summaries = robustness_summary(table);
    for s in &summaries {
        println!(
            "{} N_u={} {}: without physics {:.4e} ± {:.2e}, with physics (lambda={}) {:.4e} ± {:.2e}; mean -{:.1}%, std -{:.1}%",
            s.model,
            s.n_u,
            s.activation,
            s.without.mean,
            s.without.std,
            s.with.lambda,
            s.with.mean,
            s.with.std,
            s.mean_reduction_pct(),
            s.std_reduction_pct()
        );
    }
    if summaries.len() > 1 {
        let n = summaries.len() as f64;
        let mean = summaries.iter().map(|s| s.mean_reduction_pct()).sum::<f64>() / n;
        let std = summaries.iter().map(|s| s.std_reduction_pct()).sum::<f64>() / n;
        println!("averaged over {} groups: mean -{mean:.1}%, std -{std:.1}%", summaries.len());
    }
}
