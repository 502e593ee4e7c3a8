//! Acceptance checks, one PASS/FAIL line each.
//!
//! Runs without the libtest harness and always exits 0, so a failing check
//! is reported here instead of stopping `cargo test`. The long training
//! checks cache their runs under the cargo target directory and resume on
//! the next invocation; set `PINNLAB_SKIP_SLOW=1` to skip them.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{advdiff_closed_form_jet, cole_hopf, diff_on, fd1, fd2, loss_fd, loss_grad, net, rel_err, synthetic_sets};
use pinnlab::autodiff::{ExprTape, JetSpec};
use pinnlab::experiments::{
    median, run_plan, GridCache, ModelKind, ResultRow, ResultsTable, RunSpec, RunnerOptions, Scale, DEFAULT_LAMBDA_GRID,
    RESULTS_FILE,
};
use pinnlab::network::Activation;
use pinnlab::pde::{DepthField, PdeKind};
use pinnlab::rng::{stream, StreamTag};
use pinnlab::solvers::{solve_burgers_spectral, solve_wave_fd, solve_wave_fd_with, wave_initial, BurgersConfig, WaveConfig};
use pinnlab::training::{fused_loss_gradient, relative_error, FusedWorkspace, Objective};
use rand::seq::index::sample;
use rand::Rng;

/// Outcome of one check: pass flag and a one-line detail.
type Verdict = (bool, String);

struct Report {
    passed: usize,
    failed: usize,
    skipped: usize,
}

impl Report {
    fn run(&mut self, key: &str, title: &str, check: impl FnOnce() -> Verdict) {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let secs = started.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok(v) => v,
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into());
                (false, format!("panicked: {msg}"))
            }
        };
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} {key:<22} {title}: {detail} [{secs:.1} s]", if ok { "PASS" } else { "FAIL" });
    }

    fn skip(&mut self, key: &str, title: &str) {
        self.skipped += 1;
        println!("SKIP {key:<22} {title}: PINNLAB_SKIP_SLOW is set");
    }
}

fn within(limit: Duration, started: Instant) -> (bool, String) {
    let took = started.elapsed();
    (took <= limit, format!("{:.1} s of {} s allowed", took.as_secs_f64(), limit.as_secs()))
}

/// Random 2×8 tanh networks, one per PDE: the fused and the tape gradient
/// of the total loss against central differences with h = 1e-5 at 50
/// random parameters. Components below 1e-6 in magnitude are compared
/// against that floor.
fn gradient_check() -> Verdict {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut count = 0;
    for (i, (pde, normalized)) in [(PdeKind::burgers(), false), (PdeKind::wave(), false), (PdeKind::advdiff(), true)]
        .into_iter()
        .enumerate()
    {
        let model = net(pde.n_inputs(), 2, 8, Activation::Tanh, 11 + i as u64);
        let (train, collocation) = synthetic_sets(&pde, 12, 16, 5 + i as u64, normalized);
        let objective = Objective { pde, lambda: 0.4, train: &train, collocation: &collocation };
        let tape_grad = loss_grad(&model, &objective);
        let mut ws = FusedWorkspace::new(&model, &pde).unwrap();
        let mut fused = vec![0.0; model.params.len()];
        fused_loss_gradient(&model, &objective, &mut ws, &mut fused).unwrap();
        let mut rng = stream(i as u64, StreamTag::Other(1));
        for k in sample(&mut rng, model.params.len(), 50) {
            let fd = loss_fd(&model, &objective, k, 1e-5);
            worst = worst.max(rel_err(tape_grad[k], fd, 1e-6)).max(rel_err(fused[k], fd, 1e-6));
            count += 1;
        }
    }
    let (fast, time) = within(Duration::from_secs(30), started);
    (worst <= 1e-4 && fast, format!("max rel err {worst:.2e} over {count} parameters, {time}"))
}

/// Value, first and second input derivatives of `forward_jet` against
/// fourth-order differences of `forward` at 100 random points.
fn jet_check() -> Verdict {
    let mut worst = 0.0f64;
    let mut exact_values = true;
    let spec = JetSpec::new(&[0, 1, 2], &[(0, 0), (1, 1), (2, 2)]).unwrap();
    let acts = [Activation::Tanh, Activation::Gelu, Activation::Softplus, Activation::Sigmoid];
    for (a, act) in acts.into_iter().enumerate() {
        let model = net(3, 2, 8, act, 40 + a as u64);
        let mut rng = stream(a as u64, StreamTag::Other(2));
        for _ in 0..100 {
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut tape = ExprTape::new();
            let leaves = model.leaves(&mut tape);
            let out = model.forward_jet(&mut tape, &leaves, &p, spec).unwrap();
            let u = &out[0];
            exact_values &= tape.value(u.value) == model.forward(&p).unwrap()[0];
            for axis in 0..3 {
                let along = |s: f64| {
                    let mut q = p.clone();
                    q[axis] = s;
                    model.forward(&q).unwrap()[0]
                };
                let d1 = tape.value(u.d(axis).unwrap());
                let d2 = tape.value(u.dd(axis, axis).unwrap());
                worst = worst.max(rel_err(d1, fd1(along, p[axis], 1e-3), 1e-6));
                worst = worst.max(rel_err(d2, fd2(along, p[axis], 1e-3), 1e-6));
            }
        }
    }
    (worst <= 1e-4 && exact_values, format!("max rel err {worst:.2e}, jet values equal forward(): {exact_values}"))
}

/// The closed-form advection-diffusion solution assembled from tape
/// primitives has a vanishing residual.
fn closed_form_residual() -> Verdict {
    let started = Instant::now();
    let pde = PdeKind::advdiff();
    let PdeKind::AdvectionDiffusion { d, u, v } = pde else { unreachable!() };
    let mut rng = stream(3, StreamTag::Other(3));
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let mut tape = ExprTape::new();
        let temp = advdiff_closed_form_jet(&mut tape, &p, pde.jet_spec(), d, u, v);
        let r = pde.residuals(&mut tape, &[temp], &p).unwrap();
        worst = worst.max(tape.value(r[0]).abs());
    }
    let (fast, time) = within(Duration::from_secs(10), started);
    (worst <= 1e-8 && fast, format!("max |residual| {worst:.2e} at 1000 points, {time}"))
}

fn burgers_vs_oracle() -> Verdict {
    let started = Instant::now();
    // 101 frames put t = 0.25, 0.5, 0.75 and 1 exactly on the time axis
    let cfg = BurgersConfig { n: 512, n_t: 101, ..Default::default() };
    let g = solve_burgers_spectral(&cfg).unwrap();
    let n = g.axes[0].len();
    let mut worst = 0.0f64;
    for target in [0.25, 0.5, 0.75, 1.0] {
        let f = g.axes[1].values.iter().position(|&t| (t - target).abs() < 1e-12).expect("frame on the time axis");
        for (i, &x) in g.axes[0].values.iter().enumerate() {
            worst = worst.max((g.fields[0].data[f * n + i] - cole_hopf(x, target, cfg.nu)).abs());
        }
    }
    let (fast, time) = within(Duration::from_secs(60), started);
    (worst <= 1e-3 && fast, format!("max abs error {worst:.2e}, {time}"))
}

fn wave_grids() -> Vec<pinnlab::solvers::SolutionGrid> {
    [64, 128, 256]
        .into_iter()
        .map(|n| solve_wave_fd(&WaveConfig { nx: n, ny: n, n_frames: 11, ..Default::default() }).unwrap())
        .collect()
}

fn wave_convergence(grids: &[pinnlab::solvers::SolutionGrid]) -> Verdict {
    let ratio = diff_on(&grids[0], &grids[0], &grids[1]) / diff_on(&grids[0], &grids[1], &grids[2]);
    ((3.0..=5.0).contains(&ratio), format!("self-convergence ratio {ratio:.3} (64/128/256, 11 frames)"))
}

fn wave_boundary(grids: &[pinnlab::solvers::SolutionGrid]) -> Verdict {
    let mut nonzero = 0;
    let mut frames = 0;
    for g in grids {
        let (nx, ny) = (g.axes[0].len() - 1, g.axes[1].len() - 1);
        frames += g.axes[2].len();
        for flat in 0..g.n_points() {
            let idx = g.unravel(flat);
            if (idx[0] == 0 || idx[0] == nx || idx[1] == 0 || idx[1] == ny) && g.fields[0].data[flat] != 0.0 {
                nonzero += 1;
            }
        }
    }
    (nonzero == 0, format!("{nonzero} nonzero boundary values over {frames} frames"))
}

/// The same scheme on a smooth Dirichlet eigenmode over constant depth.
fn wave_order_smooth() -> Verdict {
    let mode = |x: f64, y: f64| (std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * y).sin();
    let solve = |n| {
        let cfg = WaveConfig { nx: n, ny: n, n_frames: 11, depth: DepthField::Uniform(1.0), ..Default::default() };
        solve_wave_fd_with(&cfg, mode).unwrap()
    };
    let g: Vec<_> = [64, 128, 256].into_iter().map(solve).collect();
    let ratio = diff_on(&g[0], &g[0], &g[1]) / diff_on(&g[0], &g[1], &g[2]);
    ((3.0..=5.0).contains(&ratio), format!("self-convergence ratio {ratio:.3} on a smooth mode, constant depth"))
}

fn wave_bounded() -> Verdict {
    let g = solve_wave_fd(&WaveConfig::default()).unwrap();
    let initial = (0..=40)
        .flat_map(|i| (0..=40).map(move |j| wave_initial(i as f64 / 40.0, j as f64 / 40.0).abs()))
        .fold(0.0, f64::max);
    let peak = g.fields[0].data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (peak <= 1.05 * initial, format!("max|eta| {peak:.4} against initial {initial:.4} (+5% allowed)"))
}

fn relu_nullity() -> Verdict {
    let model = net(2, 3, 16, Activation::Relu, 9);
    let spec = JetSpec::new(&[0], &[(0, 0)]).unwrap();
    let mut rng = stream(9, StreamTag::Other(4));
    let mut zeros = 0;
    for _ in 0..1000 {
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)];
        let mut tape = ExprTape::new();
        let leaves = model.leaves(&mut tape);
        let out = model.forward_jet(&mut tape, &leaves, &p, spec).unwrap();
        if tape.value(out[0].dd(0, 0).unwrap()) == 0.0 {
            zeros += 1;
        }
    }
    (zeros >= 999, format!("u_xx = 0 at {zeros} of 1000 points"))
}

fn metric_exactness() -> Verdict {
    let cases = [
        (relative_error(&[2.0], &[0.0]).unwrap(), 1.0),
        (relative_error(&[0.3, -1.7, 2.2], &[0.3, -1.7, 2.2]).unwrap(), 0.0),
        (relative_error(&[1.0; 4], &[0.0; 4]).unwrap(), 0.5),
    ];
    let worst = cases.iter().map(|(got, want)| (got - want).abs()).fold(0.0, f64::max);
    (worst <= 1e-12, format!("cases give {:?}", cases.map(|c| c.0)))
}

fn pinnlab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pinnlab")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

/// Two `train` invocations with the same settings give the same row. Wall
/// time is the one field that cannot repeat and is left out.
fn determinism() -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    for model in ["burgers", "advdiff"] {
        let mut rows: Vec<ResultRow> = Vec::new();
        for rep in 0..2 {
            let dir = scratch(&format!("determinism-{model}-{rep}"));
            let args =
                ["train", "--model", model, "--epochs", "300", "--n-f", "400", "--seed", "3", "--lambda", "0.3", "--quiet"];
            let (code, err) = pinnlab(&[&args[..], &["--out", dir.to_str().unwrap()]].concat());
            assert_eq!(code, 0, "{err}");
            rows.push(ResultsTable::load(dir.join(RESULTS_FILE)).unwrap().rows.remove(0));
        }
        let same = rows[0].same_outcome(&rows[1]);
        ok &= same;
        details.push(format!("{model} {}", if same { "identical" } else { "differs" }));
    }
    (ok, details.join(", "))
}

fn paper_scale_smoke() -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    for model in ["burgers", "wave", "advdiff"] {
        let dir = scratch(&format!("paper-{model}"));
        let started = Instant::now();
        let (code, err) =
            pinnlab(&["train", "--scale", "paper", "--model", model, "--epochs", "100", "--out", dir.to_str().unwrap()]);
        let row = ResultsTable::load(dir.join(RESULTS_FILE)).ok().and_then(|t| t.rows.into_iter().next());
        let finite = row.as_ref().is_some_and(|r| r.relative_error.is_finite());
        ok &= code == 0 && finite;
        details.push(match row {
            Some(r) => format!("{model} exit {code} error {:.3e} ({:.0} s)", r.relative_error, started.elapsed().as_secs_f64()),
            None => format!("{model} exit {code}: {}", err.trim()),
        });
    }
    (ok, details.join(", "))
}

/// Desk-scale Burgers runs shared by the two trend checks.
fn desk_burgers_runs() -> ResultsTable {
    let base = RunSpec::from_preset(ModelKind::Burgers, Scale::Desk);
    assert_eq!((base.layers, base.width, base.n_u, base.n_f, base.epochs), (4, 20, 100, 2000, 5000));
    let mut specs = Vec::new();
    for seed in 0..5 {
        for lambda in [0.0, 0.1] {
            specs.push(RunSpec { lambda, seed, ..base.clone() });
        }
    }
    for seed in 0..3 {
        for lambda in DEFAULT_LAMBDA_GRID {
            specs.push(RunSpec { lambda, seed, ..base.clone() });
        }
    }
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join("desk-burgers");
    let options = RunnerOptions {
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        out: Some(dir),
        verbose: true,
    };
    let outcome = run_plan(&specs, &options, &GridCache::new()).unwrap();
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
    outcome.table
}

fn median_error(table: &ResultsTable, lambda: f64, seeds: std::ops::Range<u64>) -> f64 {
    let mut errs: Vec<f64> = table
        .rows
        .iter()
        .filter(|r| r.lambda == lambda && seeds.contains(&r.seed) && r.epochs == 5000)
        .map(|r| r.relative_error)
        .collect();
    assert_eq!(errs.len(), seeds.count(), "missing runs at lambda {lambda}");
    errs.sort_by(f64::total_cmp);
    median(&errs)
}

fn physics_benefit(table: &ResultsTable) -> Verdict {
    let (off, on) = (median_error(table, 0.0, 0..5), median_error(table, 0.1, 0..5));
    let reduction = 1.0 - on / off;
    let slowest = table.rows.iter().map(|r| r.wall_time_s).fold(0.0, f64::max);
    (
        reduction >= 0.30 && slowest < 1200.0,
        format!(
            "median error {off:.4e} at lambda 0, {on:.4e} at lambda 0.1: {:.1}% lower (slowest run {slowest:.0} s)",
            100.0 * reduction
        ),
    )
}

fn endpoint_degradation(table: &ResultsTable) -> Verdict {
    let medians: Vec<(f64, f64)> = DEFAULT_LAMBDA_GRID.iter().map(|&l| (l, median_error(table, l, 0..3))).collect();
    let (best_lambda, best) = medians.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let at_one = medians.last().unwrap().1;
    let ratio = at_one / best;
    let curve: Vec<String> = medians.iter().map(|(l, e)| format!("{l}:{e:.2e}")).collect();
    (
        ratio >= 2.0,
        format!("lambda 1 error {at_one:.3e} is {ratio:.2}x the best ({best:.3e} at lambda {best_lambda}); medians {}", curve.join(" ")),
    )
}

fn main() {
    // Honour `cargo test -- --list` and friends from the harness protocol.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let slow = std::env::var_os("PINNLAB_SKIP_SLOW").is_none();
    let mut report = Report { passed: 0, failed: 0, skipped: 0 };

    report.run("gradient-fd", "loss gradient against finite differences", gradient_check);
    report.run("jets-fd", "input jets against finite differences", jet_check);
    report.run("closed-form-residual", "advection-diffusion closed form satisfies the PDE", closed_form_residual);
    report.run("burgers-oracle", "spectral Burgers against Cole-Hopf quadrature", burgers_vs_oracle);
    let grids = catch_unwind(wave_grids).ok();
    match &grids {
        Some(g) => {
            report.run("wave-convergence", "wave self-convergence", || wave_convergence(g));
            report.run("wave-boundary", "wave boundary exactly zero", || wave_boundary(g));
        }
        None => report.run("wave-convergence", "wave solver", || (false, "solver failed".into())),
    }
    report.run("wave-order-smooth", "wave scheme order on smooth data", wave_order_smooth);
    report.run("wave-bounded", "wave elevation stays bounded", wave_bounded);
    report.run("relu-nullity", "ReLU second derivative vanishes", relu_nullity);
    report.run("metric-exact", "relative error exact cases", metric_exactness);
    report.run("determinism", "repeated train gives the same row", determinism);

    if slow {
        report.run("paper-scale-smoke", "paper presets run end to end (100 epochs)", paper_scale_smoke);
        let table = catch_unwind(desk_burgers_runs);
        match &table {
            Ok(t) => {
                report.run("physics-benefit", "desk Burgers, lambda 0.1 beats 0 by 30%", || physics_benefit(t));
                report.run("endpoint-degradation", "desk Burgers, lambda 1 at least 2x the best", || {
                    endpoint_degradation(t)
                });
            }
            Err(_) => {
                report.run("physics-benefit", "desk Burgers runs", || (false, "sweep failed".into()));
                report.run("endpoint-degradation", "desk Burgers runs", || (false, "sweep failed".into()));
            }
        }
    } else {
        report.skip("paper-scale-smoke", "paper presets run end to end (100 epochs)");
        report.skip("physics-benefit", "desk Burgers, lambda 0.1 beats 0 by 30%");
        report.skip("endpoint-degradation", "desk Burgers, lambda 1 at least 2x the best");
    }

    println!(
        "\nacceptance: {} passed, {} failed, {} skipped",
        report.passed, report.failed, report.skipped
    );
}
