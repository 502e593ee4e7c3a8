//! The nine activation functions of the study, in three forms: plain `f64`
//! evaluation, closed-form `(f, f', f'')`, and tape expressions whose value,
//! first and second derivative are all differentiable nodes.
//!
//! The plain value and the tape value use the same operation sequence, so a
//! network evaluated either way gives bit-identical outputs.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{erf, tanh, AutodiffError, ExprTape, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Gelu,
    Softplus,
    LogSigmoid,
    Sigmoid,
    TanhShrink,
    /// Continuously differentiable ELU with α = 1.
    Celu,
    Softsign,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 9] = [
        Activation::Tanh,
        Activation::Gelu,
        Activation::Softplus,
        Activation::LogSigmoid,
        Activation::Sigmoid,
        Activation::TanhShrink,
        Activation::Celu,
        Activation::Softsign,
        Activation::Relu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Gelu => "gelu",
            Activation::Softplus => "softplus",
            Activation::LogSigmoid => "logsigmoid",
            Activation::Sigmoid => "sigmoid",
            Activation::TanhShrink => "tanhshrink",
            Activation::Celu => "celu",
            Activation::Softsign => "softsign",
            Activation::Relu => "relu",
        }
    }

    pub(crate) fn code(self) -> u32 {
        Activation::ALL.iter().position(|&a| a == self).unwrap() as u32
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        Activation::ALL.get(code as usize).copied()
    }

    /// True where the function or one of its first two derivatives has a
    /// kink or jump at the origin.
    pub fn has_kink(self) -> bool {
        matches!(self, Activation::Relu | Activation::Celu | Activation::Softsign)
    }

    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(x),
            Activation::Gelu => (x * 0.5) * (erf(x * FRAC_1_SQRT_2) + 1.0),
            Activation::Softplus => x.max(0.0) + (log1p_exp_neg_abs(x)),
            Activation::LogSigmoid => -((-x).max(0.0) + log1p_exp_neg_abs(x)),
            Activation::Sigmoid => sigmoid(x),
            Activation::TanhShrink => x - tanh(x),
            Activation::Celu => x.max(0.0) + (x.min(0.0).exp() - 1.0),
            Activation::Softsign => x / (x.abs() + 1.0),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Closed-form value and first two derivatives.
    pub fn value_d1_d2(self, x: f64) -> (f64, f64, f64) {
        let f = self.value(x);
        match self {
            Activation::Tanh => {
                let d1 = 1.0 - f * f;
                (f, d1, -2.0 * f * d1)
            }
            Activation::Gelu => {
                let cdf = 0.5 * (1.0 + erf(x * FRAC_1_SQRT_2));
                let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
                (f, cdf + x * pdf, pdf * (2.0 - x * x))
            }
            Activation::Softplus => {
                let s = sigmoid(x);
                (f, s, s * (1.0 - s))
            }
            Activation::LogSigmoid => {
                let s = sigmoid(x);
                (f, 1.0 - s, -s * (1.0 - s))
            }
            Activation::Sigmoid => (f, f * (1.0 - f), f * (1.0 - f) * (1.0 - 2.0 * f)),
            Activation::TanhShrink => {
                let t = tanh(x);
                (f, t * t, 2.0 * t * (1.0 - t * t))
            }
            Activation::Celu => {
                if x > 0.0 {
                    (f, 1.0, 0.0)
                } else {
                    let e = x.exp();
                    (f, e, if x < 0.0 { e } else { 0.0 })
                }
            }
            Activation::Softsign => {
                let q = 1.0 + x.abs();
                let sign = if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
                (f, q.powi(-2), -2.0 * sign * q.powi(-3))
            }
            Activation::Relu => (f, if x > 0.0 { 1.0 } else { 0.0 }, 0.0),
        }
    }

    /// Value and first three derivatives, sharing the transcendental
    /// evaluations. Agrees with [`Activation::value_d1_d2`] and
    /// [`Activation::third_derivative`].
    pub fn value_d1_d2_d3(self, x: f64) -> (f64, f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let t = tanh(x);
                let d1 = 1.0 - t * t;
                (t, d1, -2.0 * t * d1, d1 * (6.0 * t * t - 2.0))
            }
            _ => {
                let (f, d1, d2) = self.value_d1_d2(x);
                (f, d1, d2, self.third_derivative(x))
            }
        }
    }

    /// Closed-form third derivative. Piecewise activations use the one-sided
    /// value of the branch that [`Activation::value_d1_d2`] selects.
    pub fn third_derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = tanh(x);
                (1.0 - t * t) * (6.0 * t * t - 2.0)
            }
            Activation::Gelu => (-0.5 * x * x).exp() / (2.0 * PI).sqrt() * (x * x * x - 4.0 * x),
            Activation::Softplus => {
                let s = sigmoid(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::LogSigmoid => {
                let s = sigmoid(x);
                -s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s)
            }
            Activation::TanhShrink => {
                let t = tanh(x);
                (1.0 - t * t) * (2.0 - 6.0 * t * t)
            }
            Activation::Celu => {
                if x < 0.0 {
                    x.exp()
                } else {
                    0.0
                }
            }
            Activation::Softsign => 6.0 * (1.0 + x.abs()).powi(-4),
            Activation::Relu => 0.0,
        }
    }

    /// Tape value only; same arithmetic as [`Activation::value`].
    pub fn tape_value(self, tape: &mut ExprTape, z: VarId) -> Result<VarId, AutodiffError> {
        Ok(self.tape_terms(tape, z, false)?.0)
    }

    /// `(f, f', f'')` as tape nodes, each a differentiable function of `z`.
    pub fn tape_value_d1_d2(
        self,
        tape: &mut ExprTape,
        z: VarId,
    ) -> Result<(VarId, VarId, VarId), AutodiffError> {
        self.tape_terms(tape, z, true)
    }

    fn tape_terms(
        self,
        tape: &mut ExprTape,
        z: VarId,
        derivs: bool,
    ) -> Result<(VarId, VarId, VarId), AutodiffError> {
        let zero = tape.zero();
        let one = tape.one();
        let x = tape.value(z);
        Ok(match self {
            Activation::Tanh => {
                let f = tape.tanh(z);
                if !derivs {
                    return Ok((f, zero, zero));
                }
                let f2 = tape.square(f);
                let d1 = tape.sub(one, f2);
                let fd1 = tape.mul(f, d1);
                let d2 = tape.scale(fd1, -2.0);
                (f, d1, d2)
            }
            Activation::Gelu => {
                let half = tape.scale(z, 0.5);
                let scaled = tape.scale(z, FRAC_1_SQRT_2);
                let e = tape.erf(scaled);
                let g = tape.add(e, one);
                let f = tape.mul(half, g);
                if !derivs {
                    return Ok((f, zero, zero));
                }
                let cdf = tape.scale(g, 0.5);
                let z2 = tape.square(z);
                let nz2 = tape.scale(z2, -0.5);
                let ex = tape.exp(nz2)?;
                let pdf = tape.scale(ex, 1.0 / (2.0 * PI).sqrt());
                let d1 = tape.dot(&[(cdf, one), (z, pdf)]);
                let two = tape.constant(2.0);
                let w = tape.sub(two, z2);
                let d2 = tape.mul(pdf, w);
                (f, d1, d2)
            }
            Activation::Softplus | Activation::LogSigmoid => {
                let nz = tape.neg(z);
                let a = tape.abs(z);
                let na = tape.neg(a);
                let ex = tape.exp(na)?;
                let l1 = tape.add(one, ex);
                let l = tape.ln(l1)?;
                let f = match self {
                    Activation::Softplus => {
                        let m = tape.max0(z);
                        tape.add(m, l)
                    }
                    _ => {
                        let m = tape.max0(nz);
                        let s = tape.add(m, l);
                        tape.neg(s)
                    }
                };
                if !derivs {
                    return Ok((f, zero, zero));
                }
                let s = tape_sigmoid(tape, z);
                let oms = tape.sub(one, s);
                let ss = tape.mul(s, oms);
                match self {
                    Activation::Softplus => (f, s, ss),
                    _ => {
                        let d2 = tape.neg(ss);
                        (f, oms, d2)
                    }
                }
            }
            Activation::Sigmoid => {
                let f = tape_sigmoid(tape, z);
                if !derivs {
                    return Ok((f, zero, zero));
                }
                let omf = tape.sub(one, f);
                let d1 = tape.mul(f, omf);
                let two_f = tape.scale(f, 2.0);
                let w = tape.sub(one, two_f);
                let d2 = tape.mul(d1, w);
                (f, d1, d2)
            }
            Activation::TanhShrink => {
                let t = tape.tanh(z);
                let f = tape.sub(z, t);
                if !derivs {
                    return Ok((f, zero, zero));
                }
                let d1 = tape.square(t);
                let omt = tape.sub(one, d1);
                let tw = tape.mul(t, omt);
                let d2 = tape.scale(tw, 2.0);
                (f, d1, d2)
            }
            Activation::Celu => {
                let m = tape.max0(z);
                let nz = tape.neg(z);
                let mn = tape.max0(nz);
                let nmn = tape.neg(mn);
                let e = tape.exp(nmn)?;
                // max(z, 0) + (e - 1) keeps f = z exactly for z > 0
                let em1 = tape.sub(e, one);
                let f = tape.add(m, em1);
                if !derivs {
                    return Ok((f, zero, zero));
                }
                let d2 = if x < 0.0 { e } else { zero };
                (f, e, d2)
            }
            Activation::Softsign => {
                let a = tape.abs(z);
                let q = tape.add(a, one);
                let f = tape.div(z, q)?;
                if !derivs {
                    return Ok((f, zero, zero));
                }
                let d1 = tape.powi(q, -2)?;
                let d2 = if x == 0.0 {
                    zero
                } else {
                    let q3 = tape.powi(q, -3)?;
                    tape.scale(q3, -2.0 * x.signum())
                };
                (f, d1, d2)
            }
            Activation::Relu => {
                let f = tape.max0(z);
                let d1 = if x > 0.0 { one } else { zero };
                (f, d1, zero)
            }
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    (tanh(x * 0.5) + 1.0) * 0.5
}

fn tape_sigmoid(tape: &mut ExprTape, z: VarId) -> VarId {
    let h = tape.scale(z, 0.5);
    let t = tape.tanh(h);
    let g = tape.add_const(t, 1.0);
    tape.scale(g, 0.5)
}

/// `ln(1 + e^{-|x|})`, never overflows.
fn log1p_exp_neg_abs(x: f64) -> f64 {
    ((-x.abs()).exp() + 1.0).ln()
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        Activation::ALL
            .iter()
            .copied()
            .find(|a| a.name() == key)
            .ok_or_else(|| format!("unknown activation '{s}'"))
    }
}
