//! Batched input-jet propagation through an [`Mlp`] with a hand-written
//! reverse pass, for training throughput.
//!
//! Per neuron and point it carries the value, the first derivatives on the
//! spec's axes and the requested second derivatives:
//!
//! ```text
//! h    = f(z)
//! h_i  = f'(z)·z_i
//! h_ij = f'(z)·z_ij + f''(z)·z_i·z_j
//! ```
//!
//! The reverse pass differentiates these through `f'''`. It computes the
//! same quantities as recording [`Mlp::forward_jet`] on a tape.

use super::{Mlp, NetworkError};
use crate::autodiff::JetSpec;

/// Reusable buffers for one network shape and jet spec.
#[derive(Debug, Clone)]
pub struct JetBatch {
    spec: JetSpec,
    /// Components per neuron: value, first, second.
    comps: usize,
    block: usize,
    n: usize,
    /// `(slot_i, slot_j)` for each pair.
    pair_slots: Vec<(usize, usize)>,
    /// Layer inputs, `[comp][fan_in][block]`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations, `[comp][fan_out][block]`.
    pre: Vec<Vec<f64>>,
    /// Hidden layers: `f', f'', f'''` at the pre-activation, `[3][fan_out][block]`.
    derivs: Vec<Vec<f64>>,
    adj_out: Vec<f64>,
    adj_in: Vec<f64>,
}

impl JetBatch {
    pub fn new(net: &Mlp, spec: JetSpec, block: usize) -> Result<Self, NetworkError> {
        if let Some(a) = spec.axes().find(|&a| a >= net.config.n_inputs) {
            return Err(NetworkError::InvalidConfig(format!("jet axis {a} is not a network input")));
        }
        let block = block.max(1).next_multiple_of(4);
        let comps = 1 + spec.n_axes() + spec.n_pairs();
        let pair_slots = spec
            .pairs()
            .map(|(i, j)| (spec.axis_slot(i).unwrap_or(0), spec.axis_slot(j).unwrap_or(0)))
            .collect();
        let layout = net.params.layout();
        let acts = layout.iter().map(|l| vec![0.0; comps * l.fan_in * block]).collect();
        let pre = layout.iter().map(|l| vec![0.0; comps * l.fan_out * block]).collect();
        let derivs = layout.iter().map(|l| vec![0.0; 3 * l.fan_out * block]).collect();
        let widest = layout.iter().map(|l| l.fan_in.max(l.fan_out)).max().unwrap_or(1);
        Ok(JetBatch {
            spec,
            comps,
            block,
            n: 0,
            pair_slots,
            acts,
            pre,
            derivs,
            adj_out: vec![0.0; comps * widest * block],
            adj_in: vec![0.0; comps * widest * block],
        })
    }

    pub fn spec(&self) -> &JetSpec {
        &self.spec
    }

    /// Components per output: `1 + axes + pairs`.
    pub fn components(&self) -> usize {
        self.comps
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// Evaluate output jets for up to `block` points (point-major).
    pub fn forward(&mut self, net: &Mlp, points: &[f64]) -> Result<(), NetworkError> {
        let n_in = net.config.n_inputs;
        let n = points.len() / n_in;
        if !points.len().is_multiple_of(n_in) || n > self.block {
            return Err(NetworkError::InputLength { expected: n_in, got: points.len() });
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(NetworkError::NonFiniteInput);
        }
        self.n = n;
        let (b, k) = (self.block, self.comps);
        // padded columns hold zero inputs and are carried along harmlessly
        let cols = n.next_multiple_of(4);
        let layout = net.params.layout();
        let flat = &net.params.flat;
        let last = layout.len() - 1;
        let act = net.config.activation;

        let a0 = &mut self.acts[0];
        a0.fill(0.0);
        for p in 0..n {
            for i in 0..n_in {
                a0[i * b + p] = points[p * n_in + i];
            }
        }
        for (c, axis) in self.spec.axes().enumerate() {
            a0[((1 + c) * n_in + axis) * b..((1 + c) * n_in + axis) * b + n].fill(1.0);
        }

        for (li, l) in layout.iter().enumerate() {
            let (fi, fo) = (l.fan_in, l.fan_out);
            let w = &flat[l.weights..l.weights + fi * fo];
            let bias = &flat[l.bias..l.bias + fo];
            for c in 0..k {
                let a = &self.acts[li][c * fi * b..(c + 1) * fi * b];
                let z = &mut self.pre[li][c * fo * b..(c + 1) * fo * b];
                mm_forward(z, w, (c == 0).then_some(bias), a, fi, fo, b, cols);
            }
            if li == last {
                break;
            }
            let (z, d) = (&self.pre[li], &mut self.derivs[li]);
            let h = &mut self.acts[li + 1];
            let na = self.spec.n_axes();
            for j in 0..fo {
                for p in 0..cols {
                    let x = z[j * b + p];
                    let (f, d1, d2, d3) = if k > 1 {
                        act.value_d1_d2_d3(x)
                    } else {
                        let (f, d1, d2) = act.value_d1_d2(x);
                        (f, d1, d2, 0.0)
                    };
                    d[j * b + p] = d1;
                    d[(fo + j) * b + p] = d2;
                    d[(2 * fo + j) * b + p] = d3;
                    h[j * b + p] = f;
                    for c in 1..=na {
                        h[(c * fo + j) * b + p] = d1 * z[(c * fo + j) * b + p];
                    }
                    for (q, &(si, sj)) in self.pair_slots.iter().enumerate() {
                        let c = 1 + na + q;
                        let zi = z[((1 + si) * fo + j) * b + p];
                        let zj = z[((1 + sj) * fo + j) * b + p];
                        h[(c * fo + j) * b + p] = d1 * z[(c * fo + j) * b + p] + d2 * zi * zj;
                    }
                }
            }
        }
        Ok(())
    }

    /// Component `comp` of output `o` at point `p` of the last forward pass.
    /// Components are ordered value, first derivatives by axis slot, second
    /// derivatives by pair slot.
    pub fn output(&self, net: &Mlp, comp: usize, o: usize, p: usize) -> f64 {
        let fo = net.config.n_outputs;
        self.pre[self.pre.len() - 1][(comp * fo + o) * self.block + p]
    }

    /// Accumulate into `grad` the parameter gradient of
    /// `Σ seed(comp, o, p)·output(comp, o, p)` for the last forward pass.
    pub fn backward(&mut self, net: &Mlp, seed: impl Fn(usize, usize, usize) -> f64, grad: &mut [f64]) {
        let (b, k, n) = (self.block, self.comps, self.n);
        let cols = n.next_multiple_of(4);
        let layout = net.params.layout();
        let flat = &net.params.flat;
        let last = layout.len() - 1;
        let na = self.spec.n_axes();

        let fo = layout[last].fan_out;
        for c in 0..k {
            for o in 0..fo {
                let row = &mut self.adj_out[(c * fo + o) * b..(c * fo + o + 1) * b];
                row.fill(0.0);
                for (p, r) in row[..n].iter_mut().enumerate() {
                    *r = seed(c, o, p);
                }
            }
        }
        for li in (0..=last).rev() {
            let l = &layout[li];
            let (fi, fo) = (l.fan_in, l.fan_out);
            // adj_out holds adjoints of this layer's outputs; turn them into
            // adjoints of the pre-activations
            if li < last {
                let (z, d) = (&self.pre[li], &self.derivs[li]);
                let g = &mut self.adj_out;
                for j in 0..fo {
                    for p in 0..cols {
                        let d1 = d[j * b + p];
                        let d2 = d[(fo + j) * b + p];
                        let d3 = d[(2 * fo + j) * b + p];
                        let at = |c: usize| (c * fo + j) * b + p;
                        let mut gz = g[at(0)] * d1;
                        for c in 1..=na {
                            gz += g[at(c)] * d2 * z[at(c)];
                            g[at(c)] *= d1;
                        }
                        for (q, &(si, sj)) in self.pair_slots.iter().enumerate() {
                            let c = 1 + na + q;
                            let gp = g[at(c)];
                            let (zi, zj) = (z[at(1 + si)], z[at(1 + sj)]);
                            gz += gp * (d2 * z[at(c)] + d3 * zi * zj);
                            // first-derivative adjoints already carry d1; add the
                            // pair contribution to them
                            g[at(1 + si)] += gp * d2 * zj;
                            g[at(1 + sj)] += gp * d2 * zi;
                            g[at(c)] = gp * d1;
                        }
                        g[at(0)] = gz;
                    }
                }
            }
            let g = &self.adj_out;
            for j in 0..fo {
                grad[l.bias + j] += lane_sum(&g[j * b..j * b + cols]);
            }
            let wg = &mut grad[l.weights..l.weights + fi * fo];
            for c in 0..k {
                let a = &self.acts[li][c * fi * b..(c + 1) * fi * b];
                mm_weight_grad(wg, a, &g[c * fo * b..(c + 1) * fo * b], fi, fo, b, cols);
            }
            if li == 0 {
                break;
            }
            let w = &flat[l.weights..l.weights + fi * fo];
            for c in 0..k {
                let gi = &mut self.adj_in[c * fi * b..(c + 1) * fi * b];
                mm_backward(gi, w, &g[c * fo * b..(c + 1) * fo * b], fi, fo, b, cols);
            }
            std::mem::swap(&mut self.adj_in, &mut self.adj_out);
        }
    }
}

// Register-tiled kernels. Matrices are row-major with row stride `b`;
// only the first `cols` (a multiple of 4) columns are touched. `w` is the
// layer's `fi × fo` weight block.

/// `z[j][p] = bias[j] + Σ_i w[i][j]·a[i][p]`
#[allow(clippy::too_many_arguments)]
fn mm_forward(z: &mut [f64], w: &[f64], bias: Option<&[f64]>, a: &[f64], fi: usize, fo: usize, b: usize, cols: usize) {
    for j in 0..fo {
        let init = bias.map_or(0.0, |bs| bs[j]);
        for p0 in (0..cols).step_by(4) {
            let mut acc = [init; 4];
            for i in 0..fi {
                let wij = w[i * fo + j];
                let ap: &[f64; 4] = a[i * b + p0..i * b + p0 + 4].try_into().unwrap();
                for l in 0..4 {
                    acc[l] += wij * ap[l];
                }
            }
            z[j * b + p0..j * b + p0 + 4].copy_from_slice(&acc);
        }
    }
}

/// `gi[i][p] = Σ_j w[i][j]·g[j][p]`
fn mm_backward(gi: &mut [f64], w: &[f64], g: &[f64], fi: usize, fo: usize, b: usize, cols: usize) {
    for i in 0..fi {
        let wi = &w[i * fo..(i + 1) * fo];
        for p0 in (0..cols).step_by(4) {
            let mut acc = [0.0; 4];
            for (j, &wij) in wi.iter().enumerate() {
                let gp: &[f64; 4] = g[j * b + p0..j * b + p0 + 4].try_into().unwrap();
                for l in 0..4 {
                    acc[l] += wij * gp[l];
                }
            }
            gi[i * b + p0..i * b + p0 + 4].copy_from_slice(&acc);
        }
    }
}

/// `wg[i][j] += Σ_p a[i][p]·g[j][p]`
fn mm_weight_grad(wg: &mut [f64], a: &[f64], g: &[f64], fi: usize, fo: usize, b: usize, cols: usize) {
    for i in 0..fi {
        let ai = &a[i * b..i * b + cols];
        for j in 0..fo {
            let gj = &g[j * b..j * b + cols];
            let mut acc = [0.0; 4];
            for (x, y) in ai.chunks_exact(4).zip(gj.chunks_exact(4)) {
                for l in 0..4 {
                    acc[l] += x[l] * y[l];
                }
            }
            wg[i * fo + j] += (acc[0] + acc[1]) + (acc[2] + acc[3]);
        }
    }
}

fn lane_sum(a: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    for x in a.chunks_exact(4) {
        for l in 0..4 {
            acc[l] += x[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}
