use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, NetworkError};
use crate::autodiff::{jet_lift, AutodiffError, ExprTape, Jet2, JetSpec, VarId};
use crate::rng::{stream, StreamTag};

/// Architecture of a fully connected network: `hidden_layers` hidden layers
/// of `hidden_width` neurons followed by a linear output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpConfig {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        for (name, v) in [
            ("n_inputs", self.n_inputs),
            ("n_outputs", self.n_outputs),
            ("hidden_layers", self.hidden_layers),
            ("hidden_width", self.hidden_width),
        ] {
            if v == 0 {
                return Err(NetworkError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every affine layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.n_inputs;
        for _ in 0..self.hidden_layers {
            shapes.push((fan_in, self.hidden_width));
            fan_in = self.hidden_width;
        }
        shapes.push((fan_in, self.n_outputs));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|&(i, o)| i * o + o).sum()
    }
}

/// Offsets of one affine layer inside the flat parameter vector.
///
/// The weight matrix is stored row-major as `fan_in × fan_out`, so weight
/// `(i, j)` connecting input `i` to output `j` lives at
/// `weights + i * fan_out + j`. The bias vector follows at `bias`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: usize,
}

impl LayerLayout {
    pub fn weight_index(&self, i: usize, j: usize) -> usize {
        self.weights + i * self.fan_out + j
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub flat: Vec<f64>,
    layout: Vec<LayerLayout>,
}

fn layout_for(config: &MlpConfig) -> Vec<LayerLayout> {
    let mut offset = 0;
    config
        .layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let l = LayerLayout { fan_in, fan_out, weights: offset, bias: offset + fan_in * fan_out };
            offset = l.bias + fan_out;
            l
        })
        .collect()
}

impl MlpParams {
    pub fn zeros(config: &MlpConfig) -> Self {
        MlpParams { flat: vec![0.0; config.param_count()], layout: layout_for(config) }
    }

    pub fn from_flat(config: &MlpConfig, flat: Vec<f64>) -> Result<Self, NetworkError> {
        let expected = config.param_count();
        if flat.len() != expected {
            return Err(NetworkError::ParamCount { expected, got: flat.len() });
        }
        if let Some(i) = flat.iter().position(|v| !v.is_finite()) {
            return Err(NetworkError::NonFiniteParam(i));
        }
        Ok(MlpParams { flat, layout: layout_for(config) })
    }

    pub fn layout(&self) -> &[LayerLayout] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }
}

/// Glorot-uniform weights, `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`,
/// and zero biases. Deterministic in `config.seed`.
pub fn xavier_init(config: &MlpConfig) -> Result<MlpParams, NetworkError> {
    config.validate()?;
    let mut params = MlpParams::zeros(config);
    let mut rng = stream(config.seed, StreamTag::Init);
    for l in layout_for(config) {
        let a = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
        for w in &mut params.flat[l.weights..l.bias] {
            *w = rng.gen_range(-a..a);
        }
    }
    Ok(params)
}

/// A network: configuration plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub config: MlpConfig,
    pub params: MlpParams,
}

impl Mlp {
    pub fn new(config: MlpConfig) -> Result<Self, NetworkError> {
        let params = xavier_init(&config)?;
        Ok(Mlp { config, params })
    }

    pub fn with_params(config: MlpConfig, params: MlpParams) -> Result<Self, NetworkError> {
        config.validate()?;
        if params.len() != config.param_count() {
            return Err(NetworkError::ParamCount { expected: config.param_count(), got: params.len() });
        }
        Ok(Mlp { config, params })
    }

    fn check_point(&self, point: &[f64]) -> Result<(), NetworkError> {
        if point.len() != self.config.n_inputs {
            return Err(NetworkError::InputLength { expected: self.config.n_inputs, got: point.len() });
        }
        if point.iter().any(|x| !x.is_finite()) {
            return Err(NetworkError::NonFiniteInput);
        }
        Ok(())
    }

    /// Plain evaluation at one point.
    pub fn forward(&self, point: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_point(point)?;
        let flat = &self.params.flat;
        let mut a = point.to_vec();
        let mut z = Vec::with_capacity(self.config.hidden_width.max(self.config.n_outputs));
        let last = self.params.layout.len() - 1;
        for (k, l) in self.params.layout.iter().enumerate() {
            z.clear();
            for j in 0..l.fan_out {
                let mut acc = 0.0;
                for (i, &ai) in a.iter().enumerate() {
                    acc += flat[l.weight_index(i, j)] * ai;
                }
                acc += flat[l.bias + j];
                z.push(acc);
            }
            if k < last {
                let act = self.config.activation;
                z.iter_mut().for_each(|v| *v = act.value(*v));
            }
            std::mem::swap(&mut a, &mut z);
        }
        Ok(a)
    }

    /// Plain evaluation of many points, `points` laid out point-major with
    /// `n_inputs` coordinates each. Returns point-major outputs.
    ///
    /// Per point the arithmetic is identical to [`Mlp::forward`].
    pub fn forward_batch(&self, points: &[f64]) -> Result<Vec<f64>, NetworkError> {
        const BLOCK: usize = 256;
        let n_in = self.config.n_inputs;
        let n_out = self.config.n_outputs;
        if !points.len().is_multiple_of(n_in) {
            return Err(NetworkError::InputLength { expected: n_in, got: points.len() % n_in });
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(NetworkError::NonFiniteInput);
        }
        let n = points.len() / n_in;
        let flat = &self.params.flat;
        let last = self.params.layout.len() - 1;
        let act = self.config.activation;
        let mut out = vec![0.0; n * n_out];
        // neuron-major activations within a block: a[i * BLOCK + p]
        let width = self.config.hidden_width.max(n_in).max(n_out);
        let mut a = vec![0.0; width * BLOCK];
        let mut z = vec![0.0; width * BLOCK];
        for start in (0..n).step_by(BLOCK) {
            let m = BLOCK.min(n - start);
            for p in 0..m {
                for i in 0..n_in {
                    a[i * BLOCK + p] = points[(start + p) * n_in + i];
                }
            }
            for (k, l) in self.params.layout.iter().enumerate() {
                for j in 0..l.fan_out {
                    let zj = &mut z[j * BLOCK..j * BLOCK + m];
                    zj.fill(0.0);
                    for i in 0..l.fan_in {
                        let w = flat[l.weight_index(i, j)];
                        let ai = &a[i * BLOCK..i * BLOCK + m];
                        for (zp, &ap) in zj.iter_mut().zip(ai) {
                            *zp += w * ap;
                        }
                    }
                    let b = flat[l.bias + j];
                    for zp in zj.iter_mut() {
                        *zp += b;
                        if k < last {
                            *zp = act.value(*zp);
                        }
                    }
                }
                std::mem::swap(&mut a, &mut z);
            }
            for p in 0..m {
                for o in 0..n_out {
                    out[(start + p) * n_out + o] = a[o * BLOCK + p];
                }
            }
        }
        Ok(out)
    }

    /// Record every parameter as a tape input, in flat order.
    pub fn leaves(&self, tape: &mut ExprTape) -> Vec<VarId> {
        self.params.flat.iter().map(|&w| tape.input(w)).collect()
    }

    /// Evaluate on the tape as jets: each output carries the derivatives
    /// requested by `spec` with respect to the input coordinates. `leaves`
    /// come from [`Mlp::leaves`] on the same tape.
    pub fn forward_jet(
        &self,
        tape: &mut ExprTape,
        leaves: &[VarId],
        point: &[f64],
        spec: JetSpec,
    ) -> Result<Vec<Jet2>, NetworkError> {
        self.check_point(point)?;
        if leaves.len() != self.params.len() {
            return Err(NetworkError::ParamCount { expected: self.params.len(), got: leaves.len() });
        }
        if let Some(a) = spec.axes().find(|&a| a >= self.config.n_inputs) {
            return Err(NetworkError::Autodiff(AutodiffError::PairOutsideAxes(a, a)));
        }
        let inputs = jet_lift(tape, point, spec);
        self.forward_jet_from(tape, leaves, inputs)
    }

    /// Like [`Mlp::forward_jet`] but starting from caller-built input jets.
    pub fn forward_jet_from(
        &self,
        tape: &mut ExprTape,
        leaves: &[VarId],
        inputs: Vec<Jet2>,
    ) -> Result<Vec<Jet2>, NetworkError> {
        let spec = inputs.first().map(|j| *j.spec()).unwrap_or_default();
        let one = tape.one();
        let last = self.params.layout.len() - 1;
        let mut a = inputs;
        let mut buf: Vec<(VarId, VarId)> = Vec::with_capacity(self.config.hidden_width + 1);
        let mut first = Vec::with_capacity(spec.n_axes());
        let mut second = Vec::with_capacity(spec.n_pairs());
        for (k, l) in self.params.layout.iter().enumerate() {
            let mut next = Vec::with_capacity(l.fan_out);
            for j in 0..l.fan_out {
                buf.clear();
                buf.extend(a.iter().enumerate().map(|(i, ai)| (leaves[l.weight_index(i, j)], ai.value)));
                buf.push((leaves[l.bias + j], one));
                let value = tape.dot(&buf);
                first.clear();
                for c in 0..spec.n_axes() {
                    buf.clear();
                    buf.extend(
                        a.iter().enumerate().map(|(i, ai)| (leaves[l.weight_index(i, j)], ai.first_components()[c])),
                    );
                    first.push(tape.dot(&buf));
                }
                second.clear();
                for p in 0..spec.n_pairs() {
                    buf.clear();
                    buf.extend(
                        a.iter().enumerate().map(|(i, ai)| (leaves[l.weight_index(i, j)], ai.second_components()[p])),
                    );
                    second.push(tape.dot(&buf));
                }
                let zj = Jet2::from_parts(spec, value, &first, &second)?;
                let out = if k < last {
                    if spec.n_axes() == 0 {
                        let f = self.config.activation.tape_value(tape, value)?;
                        Jet2::constant(tape, spec, f)
                    } else {
                        let (f, d1, d2) = self.config.activation.tape_value_d1_d2(tape, value)?;
                        zj.chain(tape, f, d1, d2)
                    }
                } else {
                    zj
                };
                next.push(out);
            }
            a = next;
        }
        Ok(a)
    }
}
