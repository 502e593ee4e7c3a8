//! The λ-weighted composite loss, full-batch training and the error metric.
//!
//! ```text
//! loss = (1 - λ)·ℓ_data + λ·ℓ_physics
//! ℓ_data    = mean over training points of Σ_channels (ŷ - y)²
//! ℓ_physics = mean over collocation points of Σ_j (f^j)²
//! ```

use std::time::Instant;

use thiserror::Error;

use crate::autodiff::{AutodiffError, ExprTape, Jet2, JetSpec, VarId};
use crate::dataset::{DatasetError, Normalization, SampleSet};
use crate::network::{JetBatch, Mlp, MlpConfig, NetworkError};
use crate::optim::{AdamConfig, AdamState};
use crate::pde::{PdeError, PdeKind};

/// Epochs covered by the smoothing window of the reported error.
pub const SMOOTHING_WINDOW: usize = 250;

/// Points recorded on one tape before it is swept and reset.
const CHUNK: usize = 48;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss (data {data_loss}, physics {physics_loss})")]
    NonFiniteLoss { data_loss: f64, physics_loss: f64 },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("relative error undefined: {0}")]
    Metric(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Anything that maps input points to output jets on a tape, with its
/// trainable parameters recorded as tape leaves.
pub trait Surrogate {
    fn params(&self) -> &[f64];

    fn n_outputs(&self) -> usize;

    fn output_jets(
        &self,
        tape: &mut ExprTape,
        leaves: &[VarId],
        point: &[f64],
        spec: JetSpec,
    ) -> Result<Vec<Jet2>, TrainError>;

    fn leaves(&self, tape: &mut ExprTape) -> Vec<VarId> {
        self.params().iter().map(|&w| tape.input(w)).collect()
    }
}

impl Surrogate for Mlp {
    fn params(&self) -> &[f64] {
        &self.params.flat
    }

    fn n_outputs(&self) -> usize {
        self.config.n_outputs
    }

    fn output_jets(
        &self,
        tape: &mut ExprTape,
        leaves: &[VarId],
        point: &[f64],
        spec: JetSpec,
    ) -> Result<Vec<Jet2>, TrainError> {
        Ok(self.forward_jet(tape, leaves, point, spec)?)
    }
}

/// The data the loss is built from.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub pde: PdeKind,
    pub lambda: f64,
    pub train: &'a SampleSet,
    pub collocation: &'a SampleSet,
}

impl Objective<'_> {
    fn check(&self) -> Result<(), TrainError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(TrainError::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if self.train.is_empty() || self.train.labels.is_none() {
            return Err(TrainError::Config("training set is empty or unlabelled".into()));
        }
        if self.collocation.is_empty() {
            return Err(TrainError::Config("collocation set is empty".into()));
        }
        let dim = self.pde.n_inputs();
        if self.train.dim() != dim || self.collocation.dim() != dim {
            return Err(TrainError::Config(format!("{} needs {dim}-dimensional points", self.pde)));
        }
        Ok(())
    }
}

/// Loss node on the tape plus the values of both sub-losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub loss: VarId,
    pub data_loss: f64,
    pub physics_loss: f64,
}

/// Squared label error of one training point.
fn data_term<M: Surrogate>(
    tape: &mut ExprTape,
    leaves: &[VarId],
    model: &M,
    point: &[f64],
    label: &[f64],
) -> Result<VarId, TrainError> {
    let out = model.output_jets(tape, leaves, point, JetSpec::value_only())?;
    let mut sq = Vec::with_capacity(out.len());
    for (o, &y) in out.iter().zip(label) {
        let e = tape.add_const(o.value, -y);
        sq.push((e, e));
    }
    Ok(tape.dot(&sq))
}

/// Squared residual norm at one collocation point. When the labels are
/// normalized the residual is applied to the network output mapped back to
/// physical units.
fn physics_term<M: Surrogate>(
    tape: &mut ExprTape,
    leaves: &[VarId],
    model: &M,
    pde: &PdeKind,
    point: &[f64],
    norm: Option<&[Normalization]>,
) -> Result<VarId, TrainError> {
    let mut out = model.output_jets(tape, leaves, point, pde.jet_spec())?;
    if let Some(norm) = norm {
        for (jet, n) in out.iter_mut().zip(norm) {
            let mut phys = jet.scale(tape, n.std);
            phys.value = tape.add_const(phys.value, n.mean);
            *jet = phys;
        }
    }
    let res = pde.residuals(tape, &out, point)?;
    let sq: Vec<_> = res.iter().map(|&r| (r, r)).collect();
    Ok(tape.dot(&sq))
}

/// Records the whole loss on one tape. `leaves` must come from
/// [`Surrogate::leaves`] on the same tape.
pub fn total_loss<M: Surrogate>(
    tape: &mut ExprTape,
    leaves: &[VarId],
    model: &M,
    objective: &Objective<'_>,
) -> Result<LossTerms, TrainError> {
    objective.check()?;
    let Objective { pde, lambda, train, collocation } = *objective;
    let norm = train.normalization.as_deref();
    let mut terms = Vec::with_capacity(train.len());
    for i in 0..train.len() {
        terms.push(data_term(tape, leaves, model, train.point(i), train.label(i).unwrap_or_default())?);
    }
    let data_sum = tape.sum(&terms);
    terms.clear();
    for i in 0..collocation.len() {
        terms.push(physics_term(tape, leaves, model, &pde, collocation.point(i), norm)?);
    }
    let phys_sum = tape.sum(&terms);
    let wd = tape.constant((1.0 - lambda) / train.len() as f64);
    let wp = tape.constant(lambda / collocation.len() as f64);
    let loss = tape.dot(&[(wd, data_sum), (wp, phys_sum)]);
    let data_loss = tape.value(data_sum) / train.len() as f64;
    let physics_loss = tape.value(phys_sum) / collocation.len() as f64;
    if !data_loss.is_finite() || !physics_loss.is_finite() || !tape.value(loss).is_finite() {
        return Err(TrainError::NonFiniteLoss { data_loss, physics_loss });
    }
    Ok(LossTerms { loss, data_loss, physics_loss })
}

/// Records the loss term of point `i` on the tape.
type RecordTerm<'a> = dyn FnMut(&mut ExprTape, &[VarId], usize) -> Result<VarId, TrainError> + 'a;

/// Loss gradient accumulated chunk by chunk on a reused tape, so memory
/// stays bounded for large point sets. Returns `(ℓ_data, ℓ_physics)` and
/// overwrites `grad`.
pub fn loss_gradient<M: Surrogate>(
    model: &M,
    objective: &Objective<'_>,
    tape: &mut ExprTape,
    grad: &mut [f64],
) -> Result<(f64, f64), TrainError> {
    objective.check()?;
    let Objective { pde, lambda, train, collocation } = *objective;
    let norm = train.normalization.as_deref();
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut adjoints = Vec::new();
    let mut terms = Vec::with_capacity(CHUNK);

    let mut sweep = |n: usize,
                     weight: f64,
                     record: &mut RecordTerm<'_>|
     -> Result<f64, TrainError> {
        let mut total = 0.0;
        for start in (0..n).step_by(CHUNK) {
            tape.reset();
            let leaves = model.leaves(tape);
            terms.clear();
            for i in start..n.min(start + CHUNK) {
                terms.push(record(tape, &leaves, i)?);
            }
            let chunk = tape.sum(&terms);
            total += tape.value(chunk);
            if weight != 0.0 {
                tape.backward_into(chunk, weight, &mut adjoints);
                for (g, leaf) in grad.iter_mut().zip(&leaves) {
                    *g += adjoints[leaf.index()];
                }
            }
        }
        Ok(total / n as f64)
    };

    let data_loss = sweep(train.len(), (1.0 - lambda) / train.len() as f64, &mut |tape, leaves, i| {
        data_term(tape, leaves, model, train.point(i), train.label(i).unwrap_or_default())
    })?;
    let physics_loss = sweep(collocation.len(), lambda / collocation.len() as f64, &mut |tape, leaves, i| {
        physics_term(tape, leaves, model, &pde, collocation.point(i), norm)
    })?;
    if !data_loss.is_finite() || !physics_loss.is_finite() {
        return Err(TrainError::NonFiniteLoss { data_loss, physics_loss });
    }
    Ok((data_loss, physics_loss))
}

/// Buffers for [`fused_loss_gradient`].
#[derive(Debug, Clone)]
pub struct FusedWorkspace {
    data: JetBatch,
    physics: JetBatch,
    seeds: Vec<f64>,
}

impl FusedWorkspace {
    pub fn new(net: &Mlp, pde: &PdeKind) -> Result<Self, TrainError> {
        if pde.n_outputs() != 1 || net.config.n_outputs != 1 {
            return Err(TrainError::Config("the fused path handles single-output networks".into()));
        }
        Ok(FusedWorkspace {
            data: JetBatch::new(net, JetSpec::value_only(), FUSED_BLOCK)?,
            physics: JetBatch::new(net, pde.jet_spec(), FUSED_BLOCK)?,
            seeds: Vec::new(),
        })
    }
}

/// Points per batched block in [`fused_loss_gradient`].
const FUSED_BLOCK: usize = 64;

/// Same result as [`loss_gradient`] for an [`Mlp`], with the network part
/// evaluated by the batched jet kernel and the residual through
/// [`PdeKind::residual_linearized`]. Single-output PDEs only.
pub fn fused_loss_gradient(
    net: &Mlp,
    objective: &Objective<'_>,
    ws: &mut FusedWorkspace,
    grad: &mut [f64],
) -> Result<(f64, f64), TrainError> {
    objective.check()?;
    let Objective { pde, lambda, train, collocation } = *objective;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let n_out = net.config.n_outputs;
    let dim = pde.n_inputs();

    let labels = train.labels.as_deref().unwrap_or_default();
    let wd = 2.0 * (1.0 - lambda) / train.len() as f64;
    let mut data_sum = 0.0;
    for start in (0..train.len()).step_by(FUSED_BLOCK) {
        let end = train.len().min(start + FUSED_BLOCK);
        ws.data.forward(net, &train.inputs[start * dim..end * dim])?;
        ws.seeds.clear();
        for p in 0..end - start {
            for o in 0..n_out {
                let e = ws.data.output(net, 0, o, p) - labels[(start + p) * n_out + o];
                data_sum += e * e;
                ws.seeds.push(wd * e);
            }
        }
        if wd != 0.0 {
            let seeds = &ws.seeds;
            ws.data.backward(net, |_, o, p| seeds[p * n_out + o], grad);
        }
    }

    let comps = ws.physics.components();
    let mut comp_buf = [0.0; 10];
    let mut grad_buf = [0.0; 10];
    let norm = train.normalization.as_deref();
    let wp = lambda / collocation.len() as f64;
    let mut phys_sum = 0.0;
    for start in (0..collocation.len()).step_by(FUSED_BLOCK) {
        let end = collocation.len().min(start + FUSED_BLOCK);
        ws.physics.forward(net, &collocation.inputs[start * dim..end * dim])?;
        ws.seeds.clear();
        for p in 0..end - start {
            // single-output residuals; the normalized output maps to
            // physical units as T = mean + std·N
            let (mean, std) = norm.map_or((0.0, 1.0), |n| (n[0].mean, n[0].std));
            for (c, slot) in comp_buf[..comps].iter_mut().enumerate() {
                let v = ws.physics.output(net, c, 0, p);
                *slot = if c == 0 { mean + std * v } else { std * v };
            }
            let r = pde.residual_linearized(&comp_buf, collocation.point(start + p), &mut grad_buf);
            phys_sum += r * r;
            for &gc in &grad_buf[..comps] {
                ws.seeds.push(2.0 * wp * r * gc * std);
            }
        }
        if wp != 0.0 {
            let seeds = &ws.seeds;
            ws.physics.backward(net, |c, _, p| seeds[p * comps + c], grad);
        }
    }
    let data_loss = data_sum / train.len() as f64;
    let physics_loss = phys_sum / collocation.len() as f64;
    if !data_loss.is_finite() || !physics_loss.is_finite() {
        return Err(TrainError::NonFiniteLoss { data_loss, physics_loss });
    }
    Ok((data_loss, physics_loss))
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub pde: PdeKind,
    pub net: MlpConfig,
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    pub train: SampleSet,
    pub collocation: SampleSet,
    /// Labels in physical units; normalized with the training statistics
    /// when the training labels are normalized.
    pub validation: SampleSet,
    pub seed: u64,
    /// Validation is evaluated every `val_stride` epochs and at the last one.
    pub val_stride: usize,
}

impl TrainConfig {
    pub fn objective(&self) -> Objective<'_> {
        Objective { pde: self.pde, lambda: self.lambda, train: &self.train, collocation: &self.collocation }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.objective().check()?;
        self.net.validate()?;
        if self.epochs == 0 || self.val_stride == 0 {
            return Err(TrainError::Config("epochs and val_stride must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.net.n_inputs != self.pde.n_inputs() || self.net.n_outputs != self.pde.n_outputs() {
            return Err(TrainError::Config(format!("network shape does not fit {}", self.pde)));
        }
        if self.validation.is_empty() || self.validation.labels.is_none() {
            return Err(TrainError::Config("validation set is empty or unlabelled".into()));
        }
        Ok(())
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Smoothed final relative error, `+∞` for a diverged run.
    pub relative_error: f64,
    pub final_data_loss: f64,
    pub final_physics_loss: f64,
    /// `ℓ_data / ℓ_physics` per epoch.
    pub loss_ratio_trace: Vec<f64>,
    /// Epochs (1-based) at which validation was evaluated.
    pub val_epochs: Vec<usize>,
    /// Validation data loss (mean squared error) at `val_epochs`.
    pub val_loss_trace: Vec<f64>,
    /// Denominator of the relative error: `‖Y_val‖₂`, or 1 for normalized
    /// labels.
    pub error_scale: f64,
    pub epochs: usize,
    /// Epoch at which the loss became non-finite.
    pub diverged_at: Option<usize>,
    pub wall_time_s: f64,
    pub network: Mlp,
}

impl RunResult {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// `√MSE(y, ŷ) / ‖y‖₂`.
pub fn relative_error(y: &[f64], y_hat: &[f64]) -> Result<f64, TrainError> {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(TrainError::Metric("labels have zero norm".into()));
    }
    Ok(rms_error(y, y_hat)? / norm)
}

/// `√MSE(y, ŷ)`, the metric used for normalized labels.
pub fn rms_error(y: &[f64], y_hat: &[f64]) -> Result<f64, TrainError> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(TrainError::Metric(format!("length mismatch {} vs {}", y.len(), y_hat.len())));
    }
    Ok(mse(y, y_hat).sqrt())
}

fn mse(y: &[f64], y_hat: &[f64]) -> f64 {
    y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

/// Minimum of the `(epoch, value)` trace over epochs `> last - window`.
/// Falls back to the whole trace when fewer than `window` epochs ran.
pub fn windowed_min(epochs: &[usize], values: &[f64], last: usize, window: usize) -> Option<f64> {
    let from = last.saturating_sub(window);
    epochs
        .iter()
        .zip(values)
        .filter(|(&e, _)| e > from)
        .map(|(_, &v)| v)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
}

/// Relative error from the lowest validation loss in the last
/// [`SMOOTHING_WINDOW`] epochs.
pub fn smoothed_final_error(result: &RunResult) -> f64 {
    if result.diverged() {
        return f64::INFINITY;
    }
    match windowed_min(&result.val_epochs, &result.val_loss_trace, result.epochs, SMOOTHING_WINDOW) {
        Some(v) => v.sqrt() / result.error_scale,
        None => f64::INFINITY,
    }
}

/// Full-batch Adam on the composite loss. A run whose loss turns
/// non-finite is returned flagged, with an infinite error.
pub fn train(config: &TrainConfig) -> Result<RunResult, TrainError> {
    config.validate()?;
    let started = Instant::now();
    let validation = match (&config.train.normalization, &config.validation.normalization) {
        (Some(n), None) => config.validation.normalized_with(n)?,
        _ => config.validation.clone(),
    };
    let y_val = validation.labels.as_deref().unwrap_or_default();
    let error_scale = if validation.normalization.is_some() {
        1.0
    } else {
        let norm = y_val.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(TrainError::Metric("validation labels have zero norm".into()));
        }
        norm
    };

    let mut net = Mlp::new(MlpConfig { seed: config.seed, ..config.net })?;
    let mut adam = AdamState::new(net.params.len(), AdamConfig::with_lr(config.lr));
    let mut grad = vec![0.0; net.params.len()];
    let mut ws = FusedWorkspace::new(&net, &config.pde)?;
    let objective = config.objective();

    let mut ratio = Vec::with_capacity(config.epochs);
    let mut val_epochs = Vec::new();
    let mut val_loss = Vec::new();
    let (mut last_data, mut last_phys) = (f64::NAN, f64::NAN);
    let mut diverged_at = None;
    for epoch in 1..=config.epochs {
        let step = fused_loss_gradient(&net, &objective, &mut ws, &mut grad).and_then(|losses| {
            adam.step(&mut net.params.flat, &grad).map_err(|_| TrainError::NonFiniteLoss {
                data_loss: losses.0,
                physics_loss: losses.1,
            })?;
            Ok(losses)
        });
        match step {
            Ok((d, p)) => {
                ratio.push(d / p);
                last_data = d;
                last_phys = p;
            }
            Err(TrainError::NonFiniteLoss { data_loss, physics_loss }) => {
                ratio.push(data_loss / physics_loss);
                last_data = data_loss;
                last_phys = physics_loss;
                diverged_at = Some(epoch);
                break;
            }
            Err(e) => return Err(e),
        }
        if epoch % config.val_stride == 0 || epoch == config.epochs {
            let pred = match net.forward_batch(&validation.inputs) {
                Ok(p) => p,
                Err(NetworkError::NonFiniteInput) => return Err(TrainError::Config("non-finite validation point".into())),
                Err(e) => return Err(e.into()),
            };
            let loss = mse(y_val, &pred);
            if !loss.is_finite() {
                diverged_at = Some(epoch);
                break;
            }
            val_epochs.push(epoch);
            val_loss.push(loss);
        }
    }

    let mut result = RunResult {
        relative_error: f64::INFINITY,
        final_data_loss: last_data,
        final_physics_loss: last_phys,
        loss_ratio_trace: ratio,
        val_epochs,
        val_loss_trace: val_loss,
        error_scale,
        epochs: config.epochs,
        diverged_at,
        wall_time_s: 0.0,
        network: net,
    };
    result.relative_error = smoothed_final_error(&result);
    result.wall_time_s = started.elapsed().as_secs_f64();
    Ok(result)
}
