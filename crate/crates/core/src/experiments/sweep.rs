//! Work queue of independent runs with a single-writer aggregator.
//!
//! Results are appended to `results.csv` (rewritten sorted after every run)
//! and `runs.jsonl` (the full [`RunSpec`] of each row) in the output
//! directory. Rerunning a plan against the same directory skips every
//! run_id already present in the table.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{execute_run, ExperimentError, GridCache, ModelKind, RunSpec};
use crate::network::Activation;
use crate::training::RunResult;

/// Denser near the endpoints, where the error rises sharply.
pub const DEFAULT_LAMBDA_GRID: [f64; 14] =
    [0.0, 0.002, 0.01, 0.05, 0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.9, 0.95, 0.99, 1.0];

pub const RESULTS_FILE: &str = "results.csv";
pub const SPECS_FILE: &str = "runs.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub model: ModelKind,
    pub lambda: f64,
    #[serde(rename = "N_u")]
    pub n_u: usize,
    #[serde(rename = "N_f")]
    pub n_f: usize,
    pub activation: Activation,
    pub seed: u64,
    pub epochs: usize,
    /// `+∞` marks a diverged run.
    pub relative_error: f64,
    pub final_data_loss: f64,
    pub final_physics_loss: f64,
    pub wall_time_s: f64,
}

impl ResultRow {
    pub fn new(spec: &RunSpec, result: &RunResult) -> Self {
        ResultRow {
            run_id: spec.run_id(),
            model: spec.model,
            lambda: spec.lambda,
            n_u: spec.n_u,
            n_f: spec.n_f,
            activation: spec.activation,
            seed: spec.seed,
            epochs: spec.epochs,
            relative_error: result.relative_error,
            final_data_loss: result.final_data_loss,
            final_physics_loss: result.final_physics_loss,
            wall_time_s: result.wall_time_s,
        }
    }

    pub fn diverged(&self) -> bool {
        !self.relative_error.is_finite()
    }

    /// Equality on every field that a rerun reproduces, i.e. all but the
    /// wall-clock time. Floats compare bit for bit.
    pub fn same_outcome(&self, other: &ResultRow) -> bool {
        let bits = |a: f64, b: f64| a.to_bits() == b.to_bits();
        self.run_id == other.run_id
            && self.model == other.model
            && bits(self.lambda, other.lambda)
            && self.n_u == other.n_u
            && self.n_f == other.n_f
            && self.activation == other.activation
            && self.seed == other.seed
            && self.epochs == other.epochs
            && bits(self.relative_error, other.relative_error)
            && bits(self.final_data_loss, other.final_data_loss)
            && bits(self.final_physics_loss, other.final_physics_loss)
    }
}

/// One row per completed run, unique by run_id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn new() -> Self {
        ResultsTable::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, run_id: &str) -> bool {
        self.rows.iter().any(|r| r.run_id == run_id)
    }

    pub fn get(&self, run_id: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.run_id == run_id)
    }

    /// Inserts or replaces the row with the same run_id.
    pub fn upsert(&mut self, row: ResultRow) {
        match self.rows.iter_mut().find(|r| r.run_id == row.run_id) {
            Some(slot) => *slot = row,
            None => self.rows.push(row),
        }
    }

    /// Orders by (model, N_u, lambda, seed), then run_id.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.model
                .name()
                .cmp(b.model.name())
                .then(a.n_u.cmp(&b.n_u))
                .then(a.lambda.total_cmp(&b.lambda))
                .then(a.seed.cmp(&b.seed))
                .then_with(|| a.run_id.cmp(&b.run_id))
        });
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ExperimentError> {
        let mut sorted = self.clone();
        sorted.sort();
        let mut out = csv::Writer::from_writer(w);
        if sorted.rows.is_empty() {
            out.write_record(CSV_HEADER)?;
        }
        for row in &sorted.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self, ExperimentError> {
        let mut reader = csv::Reader::from_reader(r);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        if header != CSV_HEADER {
            return Err(ExperimentError::Usage(format!("unexpected results header {}", header.join(","))));
        }
        let mut table = ResultsTable::new();
        for row in reader.deserialize() {
            table.upsert(row?);
        }
        Ok(table)
    }

    /// Writes through a temporary file so readers never see a partial table.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
        let path = path.as_ref();
        let tmp = path.with_extension("csv.tmp");
        {
            let mut f = BufWriter::new(File::create(&tmp)?);
            self.write_csv(&mut f)?;
            f.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        Self::read_csv(File::open(path)?)
    }

    /// The table at `path`, or an empty one if the file does not exist.
    pub fn load_or_empty(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        match File::open(path) {
            Ok(f) => Self::read_csv(f),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(ResultsTable::new()),
            Err(e) => Err(e.into()),
        }
    }
}

pub const CSV_HEADER: [&str; 12] = [
    "run_id",
    "model",
    "lambda",
    "N_u",
    "N_f",
    "activation",
    "seed",
    "epochs",
    "relative_error",
    "final_data_loss",
    "final_physics_loss",
    "wall_time_s",
];

/// Cartesian product of λ values, training sizes, activations and seeds
/// around a base run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub base: RunSpec,
    pub lambdas: Vec<f64>,
    pub n_u_list: Vec<usize>,
    /// Empty means the base activation only.
    pub activations: Vec<Activation>,
    pub seeds: Vec<u64>,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.lambdas.is_empty() || self.n_u_list.is_empty() || self.seeds.is_empty() {
            return Err(ExperimentError::Usage("sweep needs at least one lambda, N_u and seed".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(ExperimentError::Usage(format!("lambda {l} outside [0, 1]")));
        }
        self.base.validate()
    }

    pub fn specs(&self) -> Vec<RunSpec> {
        let activations = if self.activations.is_empty() { vec![self.base.activation] } else { self.activations.clone() };
        let mut specs = Vec::new();
        for &n_u in &self.n_u_list {
            for &lambda in &self.lambdas {
                for &activation in &activations {
                    for &seed in &self.seeds {
                        specs.push(RunSpec { n_u, lambda, activation, seed, ..self.base.clone() });
                    }
                }
            }
        }
        specs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunnerOptions {
    pub workers: usize,
    /// Directory receiving the table and spec log; nothing is written when
    /// absent.
    pub out: Option<PathBuf>,
    /// Print one progress line per finished run to stderr.
    pub verbose: bool,
}

impl Default for RunnerOptions {
    fn default() -> Self {
        RunnerOptions { workers: 1, out: None, verbose: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub run_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Previously stored rows plus every row of this invocation, sorted.
    pub table: ResultsTable,
    pub executed: usize,
    pub skipped: usize,
    /// Runs that raised an error (divergence is a result, not an error).
    pub failures: Vec<RunFailure>,
}

impl SweepOutcome {
    /// Rows belonging to `specs`, in table order.
    pub fn rows_for(&self, specs: &[RunSpec]) -> Vec<&ResultRow> {
        let ids: HashSet<String> = specs.iter().map(RunSpec::run_id).collect();
        self.table.rows.iter().filter(|r| ids.contains(&r.run_id)).collect()
    }
}

/// Executes every spec whose run_id is not yet in the output table.
pub fn run_plan(specs: &[RunSpec], options: &RunnerOptions, cache: &GridCache) -> Result<SweepOutcome, ExperimentError> {
    for spec in specs {
        spec.validate()?;
    }
    let paths = match &options.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Some((dir.join(RESULTS_FILE), dir.join(SPECS_FILE)))
        }
        None => None,
    };
    let mut table = match &paths {
        Some((csv_path, _)) => ResultsTable::load_or_empty(csv_path)?,
        None => ResultsTable::new(),
    };

    let mut seen = HashSet::new();
    let pending: Vec<&RunSpec> = specs
        .iter()
        .filter(|s| {
            let id = s.run_id();
            !table.contains(&id) && seen.insert(id)
        })
        .collect();
    let skipped = specs.len() - pending.len();

    // Grids are generated up front so workers only ever read them.
    for spec in &pending {
        cache.get(spec)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Usage(format!("cannot start worker pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<(RunSpec, Result<ResultRow, String>)>();
    let total = pending.len();
    let mut failures = Vec::new();
    let mut executed = 0;
    let mut write_error = None;

    std::thread::scope(|scope| {
        scope.spawn(move || {
            pool.install(|| {
                pending.par_iter().for_each_with(tx, |tx, spec| {
                    let row = execute_run(spec, cache).map(|o| o.row).map_err(|e| e.to_string());
                    // The receiver outlives the pool, so sending cannot fail.
                    let _ = tx.send(((*spec).clone(), row));
                });
            })
        });

        for (spec, outcome) in rx {
            executed += 1;
            match outcome {
                Ok(row) => {
                    if options.verbose {
                        eprintln!(
                            "[{executed}/{total}] {} {} lambda={} N_u={} {} seed={}: error {:.4e} ({:.1} s)",
                            row.run_id, row.model, row.lambda, row.n_u, row.activation, row.seed,
                            row.relative_error, row.wall_time_s
                        );
                    }
                    table.upsert(row);
                    if let (Some((csv_path, jsonl_path)), None) = (&paths, &write_error) {
                        if let Err(e) = persist(&table, &spec, csv_path, jsonl_path) {
                            write_error = Some(e);
                        }
                    }
                }
                Err(message) => {
                    if options.verbose {
                        eprintln!("[{executed}/{total}] {} failed: {message}", spec.run_id());
                    }
                    failures.push(RunFailure { run_id: spec.run_id(), message });
                }
            }
        }
    });

    if let Some(e) = write_error {
        return Err(e);
    }
    table.sort();
    Ok(SweepOutcome { table, executed: executed - failures.len(), skipped, failures })
}

/// Adds one finished run to the table and spec log in `dir`.
pub fn record_run(dir: impl AsRef<Path>, spec: &RunSpec, row: ResultRow) -> Result<ResultsTable, ExperimentError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(RESULTS_FILE);
    let mut table = ResultsTable::load_or_empty(&csv_path)?;
    table.upsert(row);
    persist(&table, spec, &csv_path, &dir.join(SPECS_FILE))?;
    Ok(table)
}

fn persist(table: &ResultsTable, spec: &RunSpec, csv_path: &Path, jsonl_path: &Path) -> Result<(), ExperimentError> {
    table.save(csv_path)?;
    let mut log = OpenOptions::new().create(true).append(true).open(jsonl_path)?;
    #[derive(Serialize)]
    struct Logged<'a> {
        run_id: String,
        #[serde(flatten)]
        spec: &'a RunSpec,
    }
    serde_json::to_writer(&mut log, &Logged { run_id: spec.run_id(), spec })?;
    log.write_all(b"\n")?;
    Ok(())
}

/// Error against λ for every training size in the plan.
pub fn sweep_lambda(plan: &SweepPlan, options: &RunnerOptions, cache: &GridCache) -> Result<SweepOutcome, ExperimentError> {
    plan.validate()?;
    run_plan(&plan.specs(), options, cache)
}

/// Paired runs per seed: `λ = 0` and `λ = lambda_on` on the same training
/// subset (subsets depend only on the seed).
pub fn robustness_study(
    base: &RunSpec,
    lambda_on: f64,
    seeds: &[u64],
    options: &RunnerOptions,
    cache: &GridCache,
) -> Result<SweepOutcome, ExperimentError> {
    let distinct: HashSet<_> = seeds.iter().collect();
    if distinct.len() != seeds.len() {
        return Err(ExperimentError::Usage("robustness seeds must be distinct".into()));
    }
    if !(lambda_on > 0.0 && lambda_on <= 1.0) {
        return Err(ExperimentError::Usage(format!("lambda_on must lie in (0, 1], got {lambda_on}")));
    }
    let plan = SweepPlan {
        base: base.clone(),
        lambdas: vec![0.0, lambda_on],
        n_u_list: vec![base.n_u],
        activations: Vec::new(),
        seeds: seeds.to_vec(),
    };
    sweep_lambda(&plan, options, cache)
}

/// One run per activation and seed, everything else fixed.
pub fn activation_study(
    base: &RunSpec,
    activations: &[Activation],
    seeds: &[u64],
    options: &RunnerOptions,
    cache: &GridCache,
) -> Result<SweepOutcome, ExperimentError> {
    if activations.is_empty() {
        return Err(ExperimentError::Usage("activation study needs at least one activation".into()));
    }
    let plan = SweepPlan {
        base: base.clone(),
        lambdas: vec![base.lambda],
        n_u_list: vec![base.n_u],
        activations: activations.to_vec(),
        seeds: seeds.to_vec(),
    };
    sweep_lambda(&plan, options, cache)
}

/// Statistics of one arm of the robustness comparison. Mean, standard
/// deviation and median are over the finite errors only.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub lambda: f64,
    pub runs: usize,
    pub diverged: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub median: f64,
}

impl ArmSummary {
    fn from_errors(lambda: f64, errors: &[f64]) -> Self {
        let mut finite: Vec<f64> = errors.iter().copied().filter(|e| e.is_finite()).collect();
        finite.sort_by(f64::total_cmp);
        let n = finite.len();
        let mean = finite.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (finite.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        ArmSummary { lambda, runs: errors.len(), diverged: errors.len() - n, mean, std, median: median(&finite) }
    }
}

/// Median of a sorted slice; NaN when empty.
pub fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessSummary {
    pub model: ModelKind,
    pub n_u: usize,
    pub activation: Activation,
    pub without: ArmSummary,
    pub with: ArmSummary,
}

impl RobustnessSummary {
    /// Percentage reduction of the mean error from adding the physics loss.
    pub fn mean_reduction_pct(&self) -> f64 {
        100.0 * (1.0 - self.with.mean / self.without.mean)
    }

    pub fn std_reduction_pct(&self) -> f64 {
        100.0 * (1.0 - self.with.std / self.without.std)
    }
}

/// Groups rows by (model, N_u, activation) and compares the `λ = 0` arm
/// with the single positive λ of each group. Groups lacking either arm, or
/// holding several positive λ values, are skipped.
pub fn robustness_summary(table: &ResultsTable) -> Vec<RobustnessSummary> {
    let mut groups: BTreeMap<(ModelKind, usize, Activation), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for row in &table.rows {
        groups
            .entry((row.model, row.n_u, row.activation))
            .or_default()
            .entry(row.lambda.to_bits())
            .or_default()
            .push(row.relative_error);
    }
    groups
        .into_iter()
        .filter_map(|((model, n_u, activation), arms)| {
            let off = arms.get(&0f64.to_bits())?;
            let mut on = arms.iter().filter(|(&bits, _)| bits != 0f64.to_bits());
            let (on_bits, on_errors) = on.next()?;
            if on.next().is_some() {
                return None;
            }
            Some(RobustnessSummary {
                model,
                n_u,
                activation,
                without: ArmSummary::from_errors(0.0, off),
                with: ArmSummary::from_errors(f64::from_bits(*on_bits), on_errors),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Scale;

    fn row(model: ModelKind, n_u: usize, lambda: f64, seed: u64, err: f64) -> ResultRow {
        ResultRow {
            run_id: format!("{model}-{n_u}-{lambda}-{seed}"),
            model,
            lambda,
            n_u,
            n_f: 10,
            activation: Activation::Tanh,
            seed,
            epochs: 5,
            relative_error: err,
            final_data_loss: 0.5,
            final_physics_loss: 0.25,
            wall_time_s: 1.0,
        }
    }

    #[test]
    fn csv_round_trip_keeps_header_order_and_infinity() {
        let mut table = ResultsTable::new();
        table.upsert(row(ModelKind::Wave, 100, 0.5, 1, f64::INFINITY));
        table.upsert(row(ModelKind::Burgers, 200, 0.1, 0, 0.125));
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert!(text.lines().nth(1).unwrap().starts_with("burgers-"));
        let back = ResultsTable::read_csv(&buf[..]).unwrap();
        assert_eq!(back.rows[1].relative_error, f64::INFINITY);
        assert_eq!(back.rows[0], table.rows[1]);
    }

    #[test]
    fn empty_table_still_has_header() {
        let mut buf = Vec::new();
        ResultsTable::new().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), CSV_HEADER.join(","));
    }

    #[test]
    fn sort_order() {
        let mut t = ResultsTable::new();
        for r in [
            row(ModelKind::Wave, 100, 0.0, 0, 1.0),
            row(ModelKind::Burgers, 500, 0.0, 0, 1.0),
            row(ModelKind::Burgers, 100, 0.5, 0, 1.0),
            row(ModelKind::Burgers, 100, 0.1, 1, 1.0),
            row(ModelKind::Burgers, 100, 0.1, 0, 1.0),
            row(ModelKind::Advdiff, 2500, 1.0, 3, 1.0),
        ] {
            t.upsert(r);
        }
        t.sort();
        let keys: Vec<_> = t.rows.iter().map(|r| (r.model.name(), r.n_u, r.lambda, r.seed)).collect();
        assert_eq!(
            keys,
            vec![
                ("advdiff", 2500, 1.0, 3),
                ("burgers", 100, 0.1, 0),
                ("burgers", 100, 0.1, 1),
                ("burgers", 100, 0.5, 0),
                ("burgers", 500, 0.0, 0),
                ("wave", 100, 0.0, 0),
            ]
        );
    }

    #[test]
    fn plan_expands_product() {
        let plan = SweepPlan {
            base: RunSpec::from_preset(ModelKind::Burgers, Scale::Desk),
            lambdas: vec![0.0, 0.5],
            n_u_list: vec![10, 20, 30],
            activations: vec![Activation::Tanh, Activation::Relu],
            seeds: vec![4, 5],
        };
        let specs = plan.specs();
        assert_eq!(specs.len(), 24);
        let ids: HashSet<_> = specs.iter().map(RunSpec::run_id).collect();
        assert_eq!(ids.len(), 24);
        assert!(SweepPlan { lambdas: vec![1.5], ..plan.clone() }.validate().is_err());
        assert!(SweepPlan { seeds: vec![], ..plan }.validate().is_err());
    }

    #[test]
    fn summary_reductions() {
        let mut t = ResultsTable::new();
        for (seed, (off, on)) in [(2.0, 1.0), (4.0, 1.0), (6.0, f64::INFINITY)].into_iter().enumerate() {
            t.upsert(row(ModelKind::Burgers, 100, 0.0, seed as u64, off));
            t.upsert(row(ModelKind::Burgers, 100, 0.1, seed as u64, on));
        }
        let s = robustness_summary(&t);
        assert_eq!(s.len(), 1);
        let s = &s[0];
        assert_eq!((s.without.mean, s.without.std, s.without.median), (4.0, 2.0, 4.0));
        assert_eq!((s.with.mean, s.with.std, s.with.diverged, s.with.runs), (1.0, 0.0, 1, 3));
        assert_eq!(s.mean_reduction_pct(), 75.0);
        assert_eq!(s.std_reduction_pct(), 100.0);
    }

    #[test]
    fn median_cases() {
        assert!(median(&[]).is_nan());
        assert_eq!(median(&[1.0, 3.0]), 2.0);
        assert_eq!(median(&[1.0, 3.0, 7.0]), 3.0);
    }
}
