//! SVG figures from a results table.
//!
//! Errors are drawn on a log axis. Diverged runs (`+∞`) are kept visible as
//! red triangles pinned to a band above the finite data.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use plotters::coord::types::RangedCoordf64;
use plotters::prelude::*;

use super::sweep::{median, RESULTS_FILE};
use super::{ExperimentError, ModelKind, ResultRow, ResultsTable};
use crate::network::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    /// Error against λ, one series per training-set size.
    Lambda,
    /// Box and strip plot of the two robustness arms per model.
    Robustness,
    /// Strip plot with medians per activation.
    Activations,
}

impl ReportKind {
    pub const ALL: [ReportKind; 3] = [ReportKind::Lambda, ReportKind::Robustness, ReportKind::Activations];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::Lambda => "lambda",
            ReportKind::Robustness => "robustness",
            ReportKind::Activations => "activations",
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReportKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| ExperimentError::Usage(format!("unknown report kind {s:?} (lambda, robustness, activations)")))
    }
}

const SIZE: (u32, u32) = (800, 560);
const DIVERGED: RGBColor = RGBColor(200, 30, 30);

/// Writes `results.csv` and the figures of `kind` into `out_dir`, returning
/// the paths written.
pub fn report(table: &ResultsTable, kind: ReportKind, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, ExperimentError> {
    if table.is_empty() {
        return Err(ExperimentError::Usage("cannot report on an empty table".into()));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(RESULTS_FILE);
    table.save(&csv_path)?;
    let mut written = vec![csv_path];

    let mut by_model: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for row in &table.rows {
        by_model.entry(row.model.name()).or_default().push(row);
    }
    match kind {
        ReportKind::Lambda => {
            for (model, rows) in &by_model {
                let path = out_dir.join(format!("lambda_{model}.svg"));
                lambda_plot(&path, model, rows).map_err(plot_err)?;
                written.push(path);
            }
        }
        ReportKind::Robustness => {
            let path = out_dir.join("robustness.svg");
            robustness_plot(&path, &by_model).map_err(plot_err)?;
            written.push(path);
        }
        ReportKind::Activations => {
            for (model, rows) in &by_model {
                let path = out_dir.join(format!("activations_{model}.svg"));
                activation_plot(&path, model, rows).map_err(plot_err)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn plot_err(e: impl fmt::Display) -> ExperimentError {
    ExperimentError::Plot(e.to_string())
}

type PlotResult = Result<(), Box<dyn std::error::Error>>;

/// Bounds in log10 units covering the finite errors, plus the height at
/// which diverged runs are drawn. Plotting in log10 units on a linear axis
/// gives full control over the tick labels.
struct ErrorAxis {
    lo: f64,
    hi: f64,
    off_scale: f64,
}

impl ErrorAxis {
    fn new<'a>(rows: impl IntoIterator<Item = &'a ResultRow>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for r in rows {
            if r.relative_error.is_finite() && r.relative_error > 0.0 {
                lo = lo.min(r.relative_error);
                hi = hi.max(r.relative_error);
            }
        }
        if !(lo <= hi) {
            (lo, hi) = (1e-3, 1.0);
        }
        // Whole decades around the data, plus one more decade on top where
        // diverged runs are pinned.
        let lo_dec = lo.log10().floor();
        let hi_dec = hi.log10().ceil().max(lo_dec + 1.0);
        ErrorAxis { lo: lo_dec, hi: hi_dec + 1.0, off_scale: hi_dec + 0.5 }
    }

    fn y(&self, err: f64) -> f64 {
        if err.is_finite() {
            err.log10().max(self.lo)
        } else {
            self.off_scale
        }
    }
}

/// Tick label for a log10 value.
fn sci(v: &f64) -> String {
    format!("{:.0e}", 10f64.powf(*v))
}

fn lambda_plot(path: &Path, model: &str, rows: &[&ResultRow]) -> PlotResult {
    let axis = ErrorAxis::new(rows.iter().copied());
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{model}: relative error against lambda"), ("sans-serif", 22))
        .margin(14)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(-0.02f64..1.02f64, axis.lo..axis.hi)?;
    chart
        .configure_mesh()
        .x_desc("lambda")
        .y_desc("relative error")
        .y_labels(16)
        .y_label_formatter(&sci)
        .draw()?;

    let mut by_n_u: BTreeMap<usize, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_n_u.entry(r.n_u).or_default().push(r);
    }
    for (i, (n_u, group)) in by_n_u.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let finite: Vec<(f64, f64)> =
            group.iter().filter(|r| !r.diverged()).map(|r| (r.lambda, axis.y(r.relative_error))).collect();
        chart
            .draw_series(finite.iter().map(|&p| Circle::new(p, 4, color.filled())))?
            .label(format!("N_u = {n_u}"))
            .legend(move |(x, y)| Circle::new((x, y), 4, color.filled()));

        // Median over seeds per λ, joined by a line.
        let mut per_lambda: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for r in group.iter().filter(|r| !r.diverged()) {
            per_lambda.entry(r.lambda.to_bits()).or_default().push(r.relative_error);
        }
        let mut line: Vec<(f64, f64)> = per_lambda
            .into_iter()
            .map(|(bits, mut errs)| {
                errs.sort_by(f64::total_cmp);
                (f64::from_bits(bits), axis.y(median(&errs)))
            })
            .collect();
        line.sort_by(|a, b| a.0.total_cmp(&b.0));
        chart.draw_series(LineSeries::new(line, color.stroke_width(1)))?;
    }
    draw_diverged(&mut chart, rows.iter().filter(|r| r.diverged()).map(|r| r.lambda), &axis)?;
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}

fn draw_diverged<DB>(
    chart: &mut ChartContext<'_, DB, Cartesian2d<RangedCoordf64, RangedCoordf64>>,
    xs: impl Iterator<Item = f64>,
    axis: &ErrorAxis,
) -> PlotResult
where
    DB: DrawingBackend,
    DB::ErrorType: 'static,
{
    let points: Vec<(f64, f64)> = xs.map(|x| (x, axis.off_scale)).collect();
    if points.is_empty() {
        return Ok(());
    }
    // Everything above this line is outside the data range.
    let x = chart.x_range();
    let edge = axis.hi - 1.0;
    chart.draw_series([PathElement::new(vec![(x.start, edge), (x.end, edge)], DIVERGED.mix(0.5).stroke_width(1))])?;
    chart
        .draw_series(points.into_iter().map(|p| TriangleMarker::new(p, 6, DIVERGED.filled())))?
        .label("diverged (off scale)")
        .legend(|(x, y)| TriangleMarker::new((x, y), 6, DIVERGED.filled()));
    Ok(())
}

/// Deterministic horizontal jitter for strip plots.
fn jitter(i: usize, n: usize, width: f64) -> f64 {
    if n <= 1 {
        0.0
    } else {
        width * (i as f64 / (n - 1) as f64 - 0.5)
    }
}

fn categorical<'a>(names: &'a [String]) -> impl Fn(&f64) -> String + 'a {
    move |x| {
        let i = x.round();
        if (x - i).abs() < 1e-6 && i >= 0.0 {
            names.get(i as usize).cloned().unwrap_or_default()
        } else {
            String::new()
        }
    }
}

fn robustness_plot(path: &Path, by_model: &BTreeMap<&str, Vec<&ResultRow>>) -> PlotResult {
    // One category per (model, λ) arm.
    let mut arms: Vec<(String, Vec<&ResultRow>)> = Vec::new();
    for (model, rows) in by_model {
        let mut by_lambda: BTreeMap<u64, Vec<&ResultRow>> = BTreeMap::new();
        for r in rows {
            by_lambda.entry(r.lambda.to_bits()).or_default().push(r);
        }
        for (bits, group) in by_lambda {
            arms.push((format!("{model} lambda={}", f64::from_bits(bits)), group));
        }
    }
    let names: Vec<String> = arms.iter().map(|(n, _)| n.clone()).collect();
    let axis = ErrorAxis::new(arms.iter().flat_map(|(_, g)| g.iter().copied()));
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("relative error with and without the physics loss", ("sans-serif", 22))
        .margin(14)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(-0.6f64..(arms.len() as f64 - 0.4), axis.lo..axis.hi)?;
    let x_fmt = categorical(&names);
    chart
        .configure_mesh()
        .x_labels(arms.len().max(2) * 2 + 1)
        .x_label_formatter(&x_fmt)
        .y_desc("relative error")
        .y_labels(16)
        .y_label_formatter(&sci)
        .disable_x_mesh()
        .draw()?;

    for (i, (_, group)) in arms.iter().enumerate() {
        let x = i as f64;
        let color = Palette99::pick(i).to_rgba();
        let mut finite: Vec<f64> = group.iter().map(|r| r.relative_error).filter(|e| e.is_finite()).collect();
        finite.sort_by(f64::total_cmp);
        if !finite.is_empty() {
            let q = |p: f64| quantile(&finite, p);
            let (q1, q2, q3) = (axis.y(q(0.25)), axis.y(q(0.5)), axis.y(q(0.75)));
            let (lo, hi) = (axis.y(finite[0]), axis.y(finite[finite.len() - 1]));
            chart.draw_series([Rectangle::new([(x - 0.25, q1), (x + 0.25, q3)], color.mix(0.25).filled())])?;
            chart.draw_series([Rectangle::new([(x - 0.25, q1), (x + 0.25, q3)], color.stroke_width(1))])?;
            chart.draw_series([
                PathElement::new(vec![(x - 0.25, q2), (x + 0.25, q2)], color.stroke_width(3)),
                PathElement::new(vec![(x, lo), (x, q1)], color.stroke_width(1)),
                PathElement::new(vec![(x, q3), (x, hi)], color.stroke_width(1)),
            ])?;
        }
        let n = group.len();
        chart.draw_series(
            group
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.diverged())
                .map(|(j, r)| Circle::new((x + jitter(j, n, 0.4), axis.y(r.relative_error)), 3, BLACK.filled())),
        )?;
        let off: Vec<f64> =
            group.iter().enumerate().filter(|(_, r)| r.diverged()).map(|(j, _)| x + jitter(j, n, 0.4)).collect();
        if !off.is_empty() {
            chart.draw_series(off.into_iter().map(|x| TriangleMarker::new((x, axis.off_scale), 6, DIVERGED.filled())))?;
        }
    }
    root.present()?;
    Ok(())
}

/// Linear-interpolation quantile of a sorted, non-empty slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

fn activation_plot(path: &Path, model: &str, rows: &[&ResultRow]) -> PlotResult {
    let mut by_act: BTreeMap<Activation, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_act.entry(r.activation).or_default().push(r);
    }
    let names: Vec<String> = by_act.keys().map(|a| a.name().to_owned()).collect();
    let axis = ErrorAxis::new(rows.iter().copied());
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{model}: relative error per activation"), ("sans-serif", 22))
        .margin(14)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(-0.6f64..(by_act.len() as f64 - 0.4), axis.lo..axis.hi)?;
    let x_fmt = categorical(&names);
    chart
        .configure_mesh()
        .x_labels(by_act.len().max(2) * 2 + 1)
        .x_label_formatter(&x_fmt)
        .y_desc("relative error")
        .y_labels(16)
        .y_label_formatter(&sci)
        .disable_x_mesh()
        .draw()?;

    for (i, group) in by_act.values().enumerate() {
        let x = i as f64;
        let color = Palette99::pick(i).to_rgba();
        let mut finite: Vec<f64> = group.iter().map(|r| r.relative_error).filter(|e| e.is_finite()).collect();
        finite.sort_by(f64::total_cmp);
        if !finite.is_empty() {
            let m = axis.y(median(&finite));
            chart.draw_series([Rectangle::new([(x - 0.3, axis.lo), (x + 0.3, m)], color.mix(0.3).filled())])?;
        }
        let n = group.len();
        chart.draw_series(
            group
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.diverged())
                .map(|(j, r)| Circle::new((x + jitter(j, n, 0.4), axis.y(r.relative_error)), 3, color.filled())),
        )?;
    }
    let diverged: Vec<f64> = by_act
        .values()
        .enumerate()
        .flat_map(|(i, g)| {
            let n = g.len();
            g.iter().enumerate().filter(|(_, r)| r.diverged()).map(move |(j, _)| i as f64 + jitter(j, n, 0.4))
        })
        .collect();
    if !diverged.is_empty() {
        draw_diverged(&mut chart, diverged.into_iter(), &axis)?;
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    }
    root.present()?;
    Ok(())
}

/// Model names in a table, in sort order.
pub fn models_in(table: &ResultsTable) -> Vec<ModelKind> {
    let mut models: Vec<ModelKind> = table.rows.iter().map(|r| r.model).collect();
    models.sort_by_key(|m| m.name());
    models.dedup();
    models
}
