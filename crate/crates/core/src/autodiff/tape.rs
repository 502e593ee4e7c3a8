//! Append-only scalar expression tape with a single reverse sweep.
//!
//! Every node stores its primal value, computed eagerly when it is recorded.
//! Operands always point at earlier nodes, so the node order is a valid
//! topological order and `backward` is one pass from the output down to the
//! first node.
//!
//! ```
//! use pinnlab::autodiff::ExprTape;
//!
//! let mut tape = ExprTape::new();
//! let x = tape.input(2.0);
//! let y = tape.input(3.0);
//! let z = tape.mul(x, y);
//! let grad = tape.backward(z).unwrap();
//! assert_eq!(tape.value(z), 6.0);
//! assert_eq!(grad.get(x), 3.0);
//! assert_eq!(grad.get(y), 2.0);
//! ```

use std::fmt;

use super::AutodiffError;

/// Handle to a node on an [`ExprTape`].
///
/// Only meaningful for the tape that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Operation kinds accepted by [`ExprTape::record`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Opcode {
    Const(f64),
    Input(f64),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Ln,
    Sin,
    Cos,
    Tanh,
    Erf,
    Abs,
    /// `max(0, x)`, derivative taken as 0 at exactly 0.
    Max0,
    PowInt(i32),
    /// Sum of pairwise products: operands are `[a0, b0, a1, b1, ...]`.
    Dot,
}

impl Opcode {
    pub fn name(&self) -> &'static str {
        match self {
            Opcode::Const(_) => "const",
            Opcode::Input(_) => "input",
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::Mul => "mul",
            Opcode::Div => "div",
            Opcode::Neg => "neg",
            Opcode::Exp => "exp",
            Opcode::Ln => "ln",
            Opcode::Sin => "sin",
            Opcode::Cos => "cos",
            Opcode::Tanh => "tanh",
            Opcode::Erf => "erf",
            Opcode::Abs => "abs",
            Opcode::Max0 => "max0",
            Opcode::PowInt(_) => "pow-int",
            Opcode::Dot => "dot",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Opcode::Const(_) | Opcode::Input(_) => Some(0),
            Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::Div => Some(2),
            Opcode::Dot => None,
            _ => Some(1),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const,
    Input,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Exp(u32),
    Ln(u32),
    Sin(u32),
    Cos(u32),
    Tanh(u32),
    Erf(u32),
    Abs(u32),
    Max0(u32),
    PowInt(u32, i32),
    Dot { start: u32, len: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    value: f64,
}

/// Node ids of the two constants every tape starts with.
const ZERO: VarId = VarId(0);
const ONE: VarId = VarId(1);

/// Append-only computation record.
///
/// A fresh tape already holds the constants 0 and 1 (see [`ExprTape::zero`]
/// and [`ExprTape::one`]). Multiplying by or adding the shared zero constant
/// folds away without recording a node.
#[derive(Debug, Clone)]
pub struct ExprTape {
    nodes: Vec<Node>,
    pairs: Vec<(u32, u32)>,
}

impl Default for ExprTape {
    fn default() -> Self {
        Self::new()
    }
}

impl ExprTape {
    pub fn new() -> Self {
        Self::with_capacity(64)
    }

    pub fn with_capacity(nodes: usize) -> Self {
        let mut tape = ExprTape {
            nodes: Vec::with_capacity(nodes.max(2)),
            pairs: Vec::new(),
        };
        tape.reset();
        tape
    }

    /// Drop every node except the two shared constants, keeping allocations.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.pairs.clear();
        self.nodes.push(Node { op: Op::Const, value: 0.0 });
        self.nodes.push(Node { op: Op::Const, value: 1.0 });
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn zero(&self) -> VarId {
        ZERO
    }

    pub fn one(&self) -> VarId {
        ONE
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.nodes[v.index()].value
    }

    pub fn contains(&self, v: VarId) -> bool {
        v.index() < self.nodes.len()
    }

    fn push(&mut self, op: Op, value: f64) -> VarId {
        let id = VarId(u32::try_from(self.nodes.len()).expect("tape exceeds u32 nodes"));
        self.nodes.push(Node { op, value });
        id
    }

    fn check(&self, v: VarId) -> Result<(), AutodiffError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(AutodiffError::InvalidVar { index: v.index(), len: self.nodes.len() })
        }
    }

    /// Record one operation. Domain violations are reported, never turned
    /// into NaN.
    pub fn record(&mut self, opcode: Opcode, operands: &[VarId]) -> Result<VarId, AutodiffError> {
        for &v in operands {
            self.check(v)?;
        }
        match opcode.arity() {
            Some(n) if n != operands.len() => {
                return Err(AutodiffError::Arity {
                    op: opcode.name(),
                    expected: n,
                    got: operands.len(),
                })
            }
            None if !operands.len().is_multiple_of(2) => {
                return Err(AutodiffError::Arity {
                    op: opcode.name(),
                    expected: operands.len() + 1,
                    got: operands.len(),
                })
            }
            _ => {}
        }
        let a = operands.first().copied().unwrap_or(ZERO);
        let b = operands.get(1).copied().unwrap_or(ZERO);
        let id = match opcode {
            Opcode::Const(c) => self.constant(c),
            Opcode::Input(c) => self.input(c),
            Opcode::Add => self.add(a, b),
            Opcode::Sub => self.sub(a, b),
            Opcode::Mul => self.mul(a, b),
            Opcode::Div => self.div(a, b)?,
            Opcode::Neg => self.neg(a),
            Opcode::Exp => self.exp(a)?,
            Opcode::Ln => self.ln(a)?,
            Opcode::Sin => self.sin(a),
            Opcode::Cos => self.cos(a),
            Opcode::Tanh => self.tanh(a),
            Opcode::Erf => self.erf(a),
            Opcode::Abs => self.abs(a),
            Opcode::Max0 => self.max0(a),
            Opcode::PowInt(n) => self.powi(a, n)?,
            Opcode::Dot => {
                let pairs: Vec<(VarId, VarId)> =
                    operands.chunks_exact(2).map(|p| (p[0], p[1])).collect();
                self.dot(&pairs)
            }
        };
        let value = self.value(id);
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: opcode.name(), value });
        }
        Ok(id)
    }

    pub fn constant(&mut self, c: f64) -> VarId {
        if c == 0.0 && c.is_sign_positive() {
            return ZERO;
        }
        if c == 1.0 {
            return ONE;
        }
        self.push(Op::Const, c)
    }

    /// A leaf whose adjoint is of interest (parameters, coordinates).
    pub fn input(&mut self, c: f64) -> VarId {
        self.push(Op::Input, c)
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        if a == ZERO {
            return b;
        }
        if b == ZERO {
            return a;
        }
        let value = self.value(a) + self.value(b);
        self.push(Op::Add(a.0, b.0), value)
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        if b == ZERO {
            return a;
        }
        let value = self.value(a) - self.value(b);
        self.push(Op::Sub(a.0, b.0), value)
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        if a == ZERO || b == ZERO {
            return ZERO;
        }
        if a == ONE {
            return b;
        }
        if b == ONE {
            return a;
        }
        let value = self.value(a) * self.value(b);
        self.push(Op::Mul(a.0, b.0), value)
    }

    pub fn div(&mut self, a: VarId, b: VarId) -> Result<VarId, AutodiffError> {
        let denom = self.value(b);
        if denom == 0.0 {
            return Err(AutodiffError::Domain { op: "div", value: denom });
        }
        let value = self.value(a) / denom;
        Ok(self.push(Op::Div(a.0, b.0), value))
    }

    pub fn neg(&mut self, a: VarId) -> VarId {
        if a == ZERO {
            return ZERO;
        }
        let value = -self.value(a);
        self.push(Op::Neg(a.0), value)
    }

    pub fn exp(&mut self, a: VarId) -> Result<VarId, AutodiffError> {
        let value = self.value(a).exp();
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: "exp", value });
        }
        Ok(self.push(Op::Exp(a.0), value))
    }

    pub fn ln(&mut self, a: VarId) -> Result<VarId, AutodiffError> {
        let x = self.value(a);
        if x <= 0.0 {
            return Err(AutodiffError::Domain { op: "ln", value: x });
        }
        Ok(self.push(Op::Ln(a.0), x.ln()))
    }

    pub fn sin(&mut self, a: VarId) -> VarId {
        let value = self.value(a).sin();
        self.push(Op::Sin(a.0), value)
    }

    pub fn cos(&mut self, a: VarId) -> VarId {
        let value = self.value(a).cos();
        self.push(Op::Cos(a.0), value)
    }

    pub fn tanh(&mut self, a: VarId) -> VarId {
        let value = super::tanh(self.value(a));
        self.push(Op::Tanh(a.0), value)
    }

    pub fn erf(&mut self, a: VarId) -> VarId {
        let value = super::erf(self.value(a));
        self.push(Op::Erf(a.0), value)
    }

    pub fn abs(&mut self, a: VarId) -> VarId {
        let value = self.value(a).abs();
        self.push(Op::Abs(a.0), value)
    }

    pub fn max0(&mut self, a: VarId) -> VarId {
        let value = self.value(a).max(0.0);
        self.push(Op::Max0(a.0), value)
    }

    pub fn powi(&mut self, a: VarId, n: i32) -> Result<VarId, AutodiffError> {
        let x = self.value(a);
        if n < 0 && x == 0.0 {
            return Err(AutodiffError::Domain { op: "pow-int", value: x });
        }
        Ok(self.push(Op::PowInt(a.0, n), x.powi(n)))
    }

    /// `Σ a_k·b_k`, summed left to right. Pairs touching the shared zero
    /// constant are skipped.
    pub fn dot(&mut self, pairs: &[(VarId, VarId)]) -> VarId {
        let start = self.pairs.len();
        let mut value = 0.0;
        for &(a, b) in pairs {
            if a == ZERO || b == ZERO {
                continue;
            }
            value += self.value(a) * self.value(b);
            self.pairs.push((a.0, b.0));
        }
        let len = self.pairs.len() - start;
        match len {
            0 => ZERO,
            _ => self.push(
                Op::Dot { start: start as u32, len: len as u32 },
                value,
            ),
        }
    }

    /// `scale · a`, with `scale` recorded as a constant.
    pub fn scale(&mut self, a: VarId, scale: f64) -> VarId {
        let c = self.constant(scale);
        self.mul(a, c)
    }

    /// `a + c` with `c` recorded as a constant.
    pub fn add_const(&mut self, a: VarId, c: f64) -> VarId {
        let c = self.constant(c);
        self.add(a, c)
    }

    /// Left-to-right sum of `terms`.
    pub fn sum(&mut self, terms: &[VarId]) -> VarId {
        terms.iter().fold(ZERO, |acc, &t| self.add(acc, t))
    }

    pub fn square(&mut self, a: VarId) -> VarId {
        self.mul(a, a)
    }

    /// Reverse sweep from `output`; returns adjoints of every node.
    pub fn backward(&self, output: VarId) -> Result<Gradient, AutodiffError> {
        self.check(output)?;
        let mut adjoints = Vec::new();
        self.backward_into(output, 1.0, &mut adjoints);
        Ok(Gradient { adjoints })
    }

    /// Reverse sweep seeded with `seed`, writing into a reusable buffer.
    ///
    /// Panics if `output` does not belong to this tape.
    pub fn backward_into(&self, output: VarId, seed: f64, adjoints: &mut Vec<f64>) {
        let end = output.index() + 1;
        assert!(end <= self.nodes.len(), "{output} is not on this tape");
        adjoints.clear();
        adjoints.resize(self.nodes.len(), 0.0);
        adjoints[output.index()] = seed;
        let nodes = &self.nodes;
        let pairs = &self.pairs;
        for i in (0..end).rev() {
            let g = adjoints[i];
            if g == 0.0 {
                continue;
            }
            let node = nodes[i];
            match node.op {
                Op::Const | Op::Input => {}
                Op::Add(a, b) => {
                    adjoints[a as usize] += g;
                    adjoints[b as usize] += g;
                }
                Op::Sub(a, b) => {
                    adjoints[a as usize] += g;
                    adjoints[b as usize] -= g;
                }
                Op::Mul(a, b) => {
                    let va = nodes[a as usize].value;
                    let vb = nodes[b as usize].value;
                    adjoints[a as usize] += g * vb;
                    adjoints[b as usize] += g * va;
                }
                Op::Div(a, b) => {
                    let vb = nodes[b as usize].value;
                    adjoints[a as usize] += g / vb;
                    adjoints[b as usize] -= g * node.value / vb;
                }
                Op::Neg(a) => adjoints[a as usize] -= g,
                Op::Exp(a) => adjoints[a as usize] += g * node.value,
                Op::Ln(a) => adjoints[a as usize] += g / nodes[a as usize].value,
                Op::Sin(a) => adjoints[a as usize] += g * nodes[a as usize].value.cos(),
                Op::Cos(a) => adjoints[a as usize] -= g * nodes[a as usize].value.sin(),
                Op::Tanh(a) => adjoints[a as usize] += g * (1.0 - node.value * node.value),
                Op::Erf(a) => {
                    let x = nodes[a as usize].value;
                    adjoints[a as usize] += g * std::f64::consts::FRAC_2_SQRT_PI * (-x * x).exp();
                }
                Op::Abs(a) => {
                    let x = nodes[a as usize].value;
                    if x > 0.0 {
                        adjoints[a as usize] += g;
                    } else if x < 0.0 {
                        adjoints[a as usize] -= g;
                    }
                }
                Op::Max0(a) => {
                    if nodes[a as usize].value > 0.0 {
                        adjoints[a as usize] += g;
                    }
                }
                Op::PowInt(a, n) => {
                    let x = nodes[a as usize].value;
                    adjoints[a as usize] += g * f64::from(n) * x.powi(n - 1);
                }
                Op::Dot { start, len } => {
                    let start = start as usize;
                    for &(a, b) in &pairs[start..start + len as usize] {
                        let va = nodes[a as usize].value;
                        let vb = nodes[b as usize].value;
                        adjoints[a as usize] += g * vb;
                        adjoints[b as usize] += g * va;
                    }
                }
            }
        }
    }
}

/// Adjoints `∂output/∂v` for every node of the tape the sweep ran on.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    adjoints: Vec<f64>,
}

impl Gradient {
    pub fn get(&self, v: VarId) -> f64 {
        self.adjoints.get(v.index()).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.adjoints
    }
}
