//! Degree-2 Taylor jets whose components live on an [`ExprTape`].
//!
//! A jet carries a value, its first derivatives along a set of input axes and
//! the second derivatives for a requested set of axis pairs. Because every
//! component is itself a tape node, a loss built from jet components (say a
//! PDE residual `u_t + u·u_x − ν·u_xx`) can be differentiated with respect to
//! the network parameters by one reverse sweep.

use arrayvec::ArrayVec;

use super::tape::{ExprTape, Opcode, VarId};
use super::AutodiffError;

pub const MAX_AXES: usize = 3;
pub const MAX_PAIRS: usize = 6;

/// Which first and second derivatives a jet carries.
///
/// Axes are input coordinate indices. Pairs are stored as `(i, j)` with
/// `i <= j`, so `(i, j)` and `(j, i)` name the same entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct JetSpec {
    axes: [u8; MAX_AXES],
    n_axes: u8,
    pairs: [(u8, u8); MAX_PAIRS],
    n_pairs: u8,
}

impl JetSpec {
    pub fn new(axes: &[usize], pairs: &[(usize, usize)]) -> Result<Self, AutodiffError> {
        let mut spec = JetSpec::default();
        for &a in axes {
            if spec.axes().any(|x| x == a) {
                return Err(AutodiffError::DuplicateAxis(a));
            }
            if spec.n_axes() == MAX_AXES || a > u8::MAX as usize {
                return Err(AutodiffError::TooManyAxes(axes.len()));
            }
            spec.axes[spec.n_axes()] = a as u8;
            spec.n_axes += 1;
        }
        for &(i, j) in pairs {
            if !axes.contains(&i) || !axes.contains(&j) {
                return Err(AutodiffError::PairOutsideAxes(i, j));
            }
            let key = (i.min(j), i.max(j));
            if spec.pairs().any(|p| p == key) {
                return Err(AutodiffError::DuplicatePair(i, j));
            }
            spec.pairs[spec.n_pairs()] = (key.0 as u8, key.1 as u8);
            spec.n_pairs += 1;
        }
        Ok(spec)
    }

    /// Value only, no derivatives.
    pub fn value_only() -> Self {
        JetSpec::default()
    }

    pub fn axes(&self) -> impl Iterator<Item = usize> + '_ {
        self.axes[..self.n_axes()].iter().map(|&a| usize::from(a))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs[..self.n_pairs()].iter().map(|&(i, j)| (usize::from(i), usize::from(j)))
    }

    pub fn n_axes(&self) -> usize {
        usize::from(self.n_axes)
    }

    pub fn n_pairs(&self) -> usize {
        usize::from(self.n_pairs)
    }

    pub fn axis_slot(&self, axis: usize) -> Option<usize> {
        self.axes().position(|a| a == axis)
    }

    pub fn pair_slot(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.pairs().position(|p| p == key)
    }

    fn pair_axis_slots(&self, p: usize) -> (usize, usize) {
        let (i, j) = self.pairs[p];
        (
            self.axis_slot(usize::from(i)).expect("pair axes are validated"),
            self.axis_slot(usize::from(j)).expect("pair axes are validated"),
        )
    }
}

/// A value together with its first and (selected) second input derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: VarId,
    first: ArrayVec<VarId, MAX_AXES>,
    second: ArrayVec<VarId, MAX_PAIRS>,
    spec: JetSpec,
}

impl Jet2 {
    /// Jet of a quantity that does not depend on the jet axes.
    pub fn constant(tape: &ExprTape, spec: JetSpec, value: VarId) -> Self {
        let zero = tape.zero();
        Jet2 {
            value,
            first: (0..spec.n_axes()).map(|_| zero).collect(),
            second: (0..spec.n_pairs()).map(|_| zero).collect(),
            spec,
        }
    }

    pub fn from_parts(
        spec: JetSpec,
        value: VarId,
        first: &[VarId],
        second: &[VarId],
    ) -> Result<Self, AutodiffError> {
        if first.len() != spec.n_axes() || second.len() != spec.n_pairs() {
            return Err(AutodiffError::MissingComponent(format!(
                "expected {} first and {} second components, got {} and {}",
                spec.n_axes(),
                spec.n_pairs(),
                first.len(),
                second.len()
            )));
        }
        Ok(Jet2 {
            value,
            first: first.iter().copied().collect(),
            second: second.iter().copied().collect(),
            spec,
        })
    }

    pub fn spec(&self) -> &JetSpec {
        &self.spec
    }

    pub fn first(&self, axis: usize) -> Option<VarId> {
        self.spec.axis_slot(axis).map(|s| self.first[s])
    }

    pub fn second(&self, i: usize, j: usize) -> Option<VarId> {
        self.spec.pair_slot(i, j).map(|s| self.second[s])
    }

    /// `∂/∂x_axis`, or an error naming the missing component.
    pub fn d(&self, axis: usize) -> Result<VarId, AutodiffError> {
        self.first(axis)
            .ok_or_else(|| AutodiffError::MissingComponent(format!("d/dx{axis}")))
    }

    /// `∂²/∂x_i∂x_j`, or an error naming the missing component.
    pub fn dd(&self, i: usize, j: usize) -> Result<VarId, AutodiffError> {
        self.second(i, j)
            .ok_or_else(|| AutodiffError::MissingComponent(format!("d2/dx{i}dx{j}")))
    }

    pub fn first_components(&self) -> &[VarId] {
        &self.first
    }

    pub fn second_components(&self) -> &[VarId] {
        &self.second
    }

    /// Every component VarId: value, firsts, seconds.
    pub fn components(&self) -> impl Iterator<Item = VarId> + '_ {
        std::iter::once(self.value)
            .chain(self.first.iter().copied())
            .chain(self.second.iter().copied())
    }

    /// Compose with a scalar function `f` given `f(u)`, `f'(u)`, `f''(u)` as
    /// tape nodes:
    /// `(f∘u)_i = f'·u_i`, `(f∘u)_ij = f'·u_ij + f''·u_i·u_j`.
    pub fn chain(&self, tape: &mut ExprTape, f: VarId, d1: VarId, d2: VarId) -> Jet2 {
        let first = self.first.iter().map(|&ui| tape.mul(d1, ui)).collect();
        let second = (0..self.spec.n_pairs())
            .map(|p| {
                let (si, sj) = self.spec.pair_axis_slots(p);
                let uij = tape.mul(self.first[si], self.first[sj]);
                tape.dot(&[(d1, self.second[p]), (d2, uij)])
            })
            .collect();
        Jet2 { value: f, first, second, spec: self.spec }
    }

    fn zip_with(
        &self,
        other: &Jet2,
        tape: &mut ExprTape,
        f: impl Fn(&mut ExprTape, VarId, VarId) -> VarId,
    ) -> Jet2 {
        Jet2 {
            value: f(tape, self.value, other.value),
            first: self.first.iter().zip(&other.first).map(|(&a, &b)| f(tape, a, b)).collect(),
            second: self.second.iter().zip(&other.second).map(|(&a, &b)| f(tape, a, b)).collect(),
            spec: self.spec,
        }
    }

    fn map(&self, tape: &mut ExprTape, f: impl Fn(&mut ExprTape, VarId) -> VarId) -> Jet2 {
        Jet2 {
            value: f(tape, self.value),
            first: self.first.iter().map(|&a| f(tape, a)).collect(),
            second: self.second.iter().map(|&a| f(tape, a)).collect(),
            spec: self.spec,
        }
    }

    pub fn add(&self, tape: &mut ExprTape, other: &Jet2) -> Jet2 {
        self.zip_with(other, tape, |t, a, b| t.add(a, b))
    }

    pub fn sub(&self, tape: &mut ExprTape, other: &Jet2) -> Jet2 {
        self.zip_with(other, tape, |t, a, b| t.sub(a, b))
    }

    pub fn neg(&self, tape: &mut ExprTape) -> Jet2 {
        self.map(tape, |t, a| t.neg(a))
    }

    /// Multiply every component by a constant.
    pub fn scale(&self, tape: &mut ExprTape, c: f64) -> Jet2 {
        let c = tape.constant(c);
        self.map(tape, |t, a| t.mul(a, c))
    }

    /// Multiply every component by a tape scalar that does not depend on the
    /// jet axes.
    pub fn scale_by(&self, tape: &mut ExprTape, c: VarId) -> Jet2 {
        self.map(tape, |t, a| t.mul(a, c))
    }

    pub fn mul(&self, tape: &mut ExprTape, other: &Jet2) -> Jet2 {
        let (u, v) = (self, other);
        let value = tape.mul(u.value, v.value);
        let first = (0..u.first.len())
            .map(|i| tape.dot(&[(u.first[i], v.value), (u.value, v.first[i])]))
            .collect();
        let second = (0..u.second.len())
            .map(|p| {
                let (si, sj) = u.spec.pair_axis_slots(p);
                tape.dot(&[
                    (u.second[p], v.value),
                    (u.first[si], v.first[sj]),
                    (u.first[sj], v.first[si]),
                    (u.value, v.second[p]),
                ])
            })
            .collect();
        Jet2 { value, first, second, spec: u.spec }
    }

    /// `Σ_k a_k·b_k` over jets.
    pub fn dot(tape: &mut ExprTape, pairs: &[(&Jet2, &Jet2)]) -> Jet2 {
        let spec = pairs.first().map(|(a, _)| a.spec).unwrap_or_default();
        let mut buf: Vec<(VarId, VarId)> = Vec::with_capacity(4 * pairs.len());
        buf.extend(pairs.iter().map(|(a, b)| (a.value, b.value)));
        let value = tape.dot(&buf);
        let first = (0..spec.n_axes())
            .map(|i| {
                buf.clear();
                for (a, b) in pairs {
                    buf.push((a.first[i], b.value));
                    buf.push((a.value, b.first[i]));
                }
                tape.dot(&buf)
            })
            .collect();
        let second = (0..spec.n_pairs())
            .map(|p| {
                let (si, sj) = spec.pair_axis_slots(p);
                buf.clear();
                for (a, b) in pairs {
                    buf.push((a.second[p], b.value));
                    buf.push((a.first[si], b.first[sj]));
                    buf.push((a.first[sj], b.first[si]));
                    buf.push((a.value, b.second[p]));
                }
                tape.dot(&buf)
            })
            .collect();
        Jet2 { value, first, second, spec }
    }
}

/// Seed jets for the input coordinates of `point`.
///
/// Coordinate `i` becomes a tape input with `∂x_i/∂x_i = 1` when `i` is one
/// of the spec's axes; every other component is the shared zero constant.
pub fn jet_lift(tape: &mut ExprTape, point: &[f64], spec: JetSpec) -> Vec<Jet2> {
    let one = tape.one();
    point
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let value = tape.input(x);
            let mut jet = Jet2::constant(tape, spec, value);
            if let Some(slot) = spec.axis_slot(i) {
                jet.first[slot] = one;
            }
            jet
        })
        .collect()
}

/// Apply one tape opcode to jets, propagating derivatives through degree 2.
pub fn jet_apply(tape: &mut ExprTape, op: Opcode, jets: &[&Jet2]) -> Result<Jet2, AutodiffError> {
    let arity = match op {
        Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::Div => 2,
        Opcode::Const(_) | Opcode::Input(_) => return Err(AutodiffError::NotJetOp(op.name())),
        Opcode::Dot => {
            if !jets.len().is_multiple_of(2) {
                return Err(AutodiffError::Arity { op: op.name(), expected: jets.len() + 1, got: jets.len() });
            }
            jets.len()
        }
        _ => 1,
    };
    if jets.len() != arity {
        return Err(AutodiffError::Arity { op: op.name(), expected: arity, got: jets.len() });
    }
    let spec = jets.first().map(|j| j.spec).unwrap_or_default();
    if jets.iter().any(|j| j.spec != spec) {
        return Err(AutodiffError::SpecMismatch);
    }
    for j in jets {
        for v in j.components() {
            if !tape.contains(v) {
                return Err(AutodiffError::InvalidVar { index: v.index(), len: tape.len() });
            }
        }
    }
    let u = jets.first().copied();
    Ok(match op {
        Opcode::Add => jets[0].add(tape, jets[1]),
        Opcode::Sub => jets[0].sub(tape, jets[1]),
        Opcode::Mul => jets[0].mul(tape, jets[1]),
        Opcode::Div => {
            let recip = reciprocal(tape, jets[1])?;
            jets[0].mul(tape, &recip)
        }
        Opcode::Neg => jets[0].neg(tape),
        Opcode::Dot => {
            let pairs: Vec<(&Jet2, &Jet2)> = jets.chunks_exact(2).map(|p| (p[0], p[1])).collect();
            Jet2::dot(tape, &pairs)
        }
        _ => {
            let u = u.expect("unary op has one operand");
            let x = u.value;
            let (f, d1, d2) = match op {
                Opcode::Exp => {
                    let f = tape.exp(x)?;
                    (f, f, f)
                }
                Opcode::Ln => {
                    let f = tape.ln(x)?;
                    let r = tape.powi(x, -1)?;
                    let r2 = tape.square(r);
                    let d2 = tape.neg(r2);
                    (f, r, d2)
                }
                Opcode::Sin => {
                    let f = tape.sin(x);
                    let c = tape.cos(x);
                    let d2 = tape.neg(f);
                    (f, c, d2)
                }
                Opcode::Cos => {
                    let f = tape.cos(x);
                    let s = tape.sin(x);
                    let d1 = tape.neg(s);
                    let d2 = tape.neg(f);
                    (f, d1, d2)
                }
                Opcode::Tanh => {
                    let f = tape.tanh(x);
                    let f2 = tape.square(f);
                    let one = tape.one();
                    let d1 = tape.sub(one, f2);
                    let fd1 = tape.mul(f, d1);
                    let d2 = tape.scale(fd1, -2.0);
                    (f, d1, d2)
                }
                Opcode::Erf => {
                    let f = tape.erf(x);
                    let x2 = tape.square(x);
                    let nx2 = tape.neg(x2);
                    let g = tape.exp(nx2)?;
                    let d1 = tape.scale(g, std::f64::consts::FRAC_2_SQRT_PI);
                    let xd1 = tape.mul(x, d1);
                    let d2 = tape.scale(xd1, -2.0);
                    (f, d1, d2)
                }
                Opcode::Abs => {
                    let f = tape.abs(x);
                    let s = tape.value(x).signum();
                    let d1 = if tape.value(x) == 0.0 { tape.zero() } else { tape.constant(s) };
                    (f, d1, tape.zero())
                }
                Opcode::Max0 => {
                    let f = tape.max0(x);
                    let d1 = if tape.value(x) > 0.0 { tape.one() } else { tape.zero() };
                    (f, d1, tape.zero())
                }
                Opcode::PowInt(n) => {
                    let f = tape.powi(x, n)?;
                    let d1 = match n {
                        0 => tape.zero(),
                        _ => {
                            let p = tape.powi(x, n - 1)?;
                            tape.scale(p, f64::from(n))
                        }
                    };
                    let d2 = match n {
                        0 | 1 => tape.zero(),
                        _ => {
                            let p = tape.powi(x, n - 2)?;
                            tape.scale(p, f64::from(n) * f64::from(n - 1))
                        }
                    };
                    (f, d1, d2)
                }
                _ => unreachable!("binary and nullary opcodes handled above"),
            };
            u.chain(tape, f, d1, d2)
        }
    })
}

fn reciprocal(tape: &mut ExprTape, v: &Jet2) -> Result<Jet2, AutodiffError> {
    let f = tape.powi(v.value, -1)?;
    let f2 = tape.square(f);
    let d1 = tape.neg(f2);
    let f3 = tape.mul(f2, f);
    let d2 = tape.scale(f3, 2.0);
    Ok(v.chain(tape, f, d1, d2))
}
