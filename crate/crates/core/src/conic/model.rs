//! Conic programs over Hermitian matrices and real vectors.
//!
//! A program is written once, in terms of named variables, linear maps
//! built from [`Atom`]s, equality constraints `expr = 0` and cone
//! constraints `expr ∈ K` (PSD for matrices, nonnegative orthant for
//! vectors). Every atom knows its adjoint, which is what lets the
//! dualizer derive the dual program mechanically.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::*;
use crate::tensor;

/// Vector space of a variable or constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// `n × n` Hermitian matrices.
    Herm(usize),
    /// `ℝᵏ`.
    Real(usize),
}

impl Space {
    pub fn zero(&self) -> Value {
        match *self {
            Space::Herm(n) => Value::Herm(zeros(n, n)),
            Space::Real(k) => Value::Real(vec![0.0; k]),
        }
    }
}

/// Element of a [`Space`].
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Herm(Mat),
    Real(Vec<f64>),
}

impl Value {
    pub fn scalar(x: f64) -> Self {
        Value::Real(vec![x])
    }

    pub fn space(&self) -> Space {
        match self {
            Value::Herm(m) => Space::Herm(m.nrows()),
            Value::Real(v) => Space::Real(v.len()),
        }
    }

    /// Real inner product (`tr(XY)` or the dot product).
    pub fn inner(&self, other: &Value) -> f64 {
        match (self, other) {
            (Value::Herm(a), Value::Herm(b)) => inner(a, b),
            (Value::Real(a), Value::Real(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            _ => f64::NAN,
        }
    }

    pub fn scaled(&self, s: f64) -> Value {
        match self {
            Value::Herm(a) => Value::Herm(a * c(s)),
            Value::Real(v) => Value::Real(v.iter().map(|x| x * s).collect()),
        }
    }

    pub fn add_assign(&mut self, other: &Value) {
        match (self, other) {
            (Value::Herm(a), Value::Herm(b)) => *a += b,
            (Value::Real(a), Value::Real(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            _ => panic!("adding values from different spaces"),
        }
    }

    pub fn as_herm(&self) -> Option<&Mat> {
        match self {
            Value::Herm(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Value::Real(v) => Some(v),
            _ => None,
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        match self {
            Value::Herm(m) => max_abs(m),
            Value::Real(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// Distance below the cone: `max(0, −λ_min)` or `max(0, −min_i v_i)`.
    pub fn cone_violation(&self) -> f64 {
        match self {
            Value::Herm(m) => (-min_eig(m)).max(0.0),
            Value::Real(v) => v.iter().fold(0.0f64, |m, x| m.max(-x)),
        }
    }

    pub(crate) fn is_real_data(&self) -> bool {
        match self {
            Value::Herm(m) => is_real(m),
            Value::Real(_) => true,
        }
    }
}

/// Sparse Hermitian matrix given by all of its nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHerm {
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseHerm {
    pub fn to_dense(&self, n: usize) -> Mat {
        let mut m = zeros(n, n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// `tr(W X)` for Hermitian `X`.
    pub fn inner_with(&self, x: &Mat) -> f64 {
        self.entries.iter().map(|&(i, j, v)| (v * x[(j, i)]).re).sum()
    }

    fn is_real(&self) -> bool {
        self.entries.iter().all(|(_, _, v)| v.im == 0.0)
    }

    fn is_imaginary(&self) -> bool {
        self.entries.iter().all(|(_, _, v)| v.re == 0.0)
    }
}

/// A family of linear functionals `X ↦ tr(W_k X)` on `Herm(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Functionals {
    pub n: usize,
    pub rows: Vec<SparseHerm>,
    /// Set when the family is closed under entrywise conjugation, so that
    /// constraints `tr(W_k X) = 0` restrict to real `X` without loss.
    pub conjugation_closed: bool,
}

impl Functionals {
    pub(crate) fn is_real_data(&self) -> bool {
        self.rows.iter().all(|r| r.is_real())
            || (self.conjugation_closed && self.rows.iter().all(|r| r.is_real() || r.is_imaginary()))
    }
}

/// Elementary linear map with a known adjoint.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    /// `X ↦ sX` on any space.
    Scale(f64),
    /// Partial trace keeping `keep`.
    PartialTrace { dims: Vec<usize>, keep: Vec<usize> },
    /// `X ↦ X ⊗ I` (adjoint of [`Atom::PartialTrace`]).
    Embed { dims: Vec<usize>, keep: Vec<usize> },
    /// Partial transpose on `subset` (self-adjoint).
    PartialTranspose { dims: Vec<usize>, subset: Vec<usize> },
    /// Subsystem reordering.
    Permute { dims: Vec<usize>, perm: Vec<usize> },
    /// `α ↦ tr₁[α (K ⊗ I)]`.
    LinkTrace(Arc<Mat>),
    /// `X ↦ K ⊗ X` (adjoint of [`Atom::LinkTrace`]).
    TensorLeft(Arc<Mat>),
    /// `X ↦ tr(K X)` into `ℝ`.
    TraceWith(Arc<Mat>),
    /// `s ↦ s K` from `ℝ` (adjoint of [`Atom::TraceWith`]).
    TimesMatrix(Arc<Mat>),
    /// `X ↦ (tr(W_k X))_k`.
    Functionals(Arc<Functionals>),
    /// `y ↦ Σ_k y_k W_k` (adjoint of [`Atom::Functionals`]).
    Combination(Arc<Functionals>),
}

impl Atom {
    pub fn adjoint(&self) -> Atom {
        match self {
            Atom::Scale(s) => Atom::Scale(*s),
            Atom::PartialTrace { dims, keep } => Atom::Embed { dims: dims.clone(), keep: keep.clone() },
            Atom::Embed { dims, keep } => Atom::PartialTrace { dims: dims.clone(), keep: keep.clone() },
            Atom::PartialTranspose { .. } => self.clone(),
            Atom::Permute { dims, perm } => {
                Atom::Permute { dims: tensor::permuted_dims(dims, perm), perm: tensor::inverse_perm(perm) }
            }
            Atom::LinkTrace(k) => Atom::TensorLeft(k.clone()),
            Atom::TensorLeft(k) => Atom::LinkTrace(k.clone()),
            Atom::TraceWith(k) => Atom::TimesMatrix(k.clone()),
            Atom::TimesMatrix(k) => Atom::TraceWith(k.clone()),
            Atom::Functionals(f) => Atom::Combination(f.clone()),
            Atom::Combination(f) => Atom::Functionals(f.clone()),
        }
    }

    /// Output space for a given input space.
    pub fn out_space(&self, input: Space) -> Result<Space> {
        let bad = || Err(Error::Model(alloc::format!("{} cannot act on {input:?}", self.name())));
        let full = |dims: &[usize]| dims.iter().product::<usize>();
        match (self, input) {
            (Atom::Scale(_), s) => Ok(s),
            (Atom::PartialTrace { dims, keep }, Space::Herm(n)) if n == full(dims) => {
                Ok(Space::Herm(keep.iter().map(|&i| dims[i]).product()))
            }
            (Atom::Embed { dims, keep }, Space::Herm(n)) if n == keep.iter().map(|&i| dims[i]).product::<usize>() => {
                Ok(Space::Herm(full(dims)))
            }
            (Atom::PartialTranspose { dims, .. } | Atom::Permute { dims, .. }, Space::Herm(n)) if n == full(dims) => {
                Ok(input)
            }
            (Atom::LinkTrace(k), Space::Herm(n)) if k.nrows() > 0 && n % k.nrows() == 0 => {
                Ok(Space::Herm(n / k.nrows()))
            }
            (Atom::TensorLeft(k), Space::Herm(n)) => Ok(Space::Herm(n * k.nrows())),
            (Atom::TraceWith(k), Space::Herm(n)) if n == k.nrows() => Ok(Space::Real(1)),
            (Atom::TimesMatrix(k), Space::Real(1)) => Ok(Space::Herm(k.nrows())),
            (Atom::Functionals(f), Space::Herm(n)) if n == f.n => Ok(Space::Real(f.rows.len())),
            (Atom::Combination(f), Space::Real(k)) if k == f.rows.len() => Ok(Space::Herm(f.n)),
            _ => bad(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Atom::Scale(_) => "scale",
            Atom::PartialTrace { .. } => "partial trace",
            Atom::Embed { .. } => "embed",
            Atom::PartialTranspose { .. } => "partial transpose",
            Atom::Permute { .. } => "permute",
            Atom::LinkTrace(_) => "link trace",
            Atom::TensorLeft(_) => "tensor",
            Atom::TraceWith(_) => "trace with",
            Atom::TimesMatrix(_) => "times matrix",
            Atom::Functionals(_) => "functionals",
            Atom::Combination(_) => "combination",
        }
    }

    pub fn apply(&self, x: &Value) -> Result<Value> {
        self.out_space(x.space())?;
        Ok(match (self, x) {
            (Atom::Scale(s), v) => v.scaled(*s),
            (Atom::PartialTrace { dims, keep }, Value::Herm(m)) => Value::Herm(tensor::partial_trace(m, dims, keep)?),
            (Atom::Embed { dims, keep }, Value::Herm(m)) => Value::Herm(tensor::embed(m, dims, keep)?),
            (Atom::PartialTranspose { dims, subset }, Value::Herm(m)) => {
                Value::Herm(tensor::partial_transpose(m, dims, subset)?)
            }
            (Atom::Permute { dims, perm }, Value::Herm(m)) => Value::Herm(tensor::permute(m, dims, perm)?),
            (Atom::LinkTrace(k), Value::Herm(m)) => Value::Herm(herm_part(&tensor::link_trace(m, k)?)),
            (Atom::TensorLeft(k), Value::Herm(m)) => Value::Herm(kron(k, m)),
            (Atom::TraceWith(k), Value::Herm(m)) => Value::scalar(inner(k, m)),
            (Atom::TimesMatrix(k), Value::Real(s)) => Value::Herm(k.as_ref() * c(s[0])),
            (Atom::Functionals(f), Value::Herm(m)) => Value::Real(f.rows.iter().map(|w| w.inner_with(m)).collect()),
            (Atom::Combination(f), Value::Real(y)) => {
                let mut m = zeros(f.n, f.n);
                for (w, &yk) in f.rows.iter().zip(y) {
                    if yk != 0.0 {
                        for &(i, j, v) in &w.entries {
                            m[(i, j)] += v * c(yk);
                        }
                    }
                }
                Value::Herm(m)
            }
            _ => unreachable!("checked by out_space"),
        })
    }

    pub(crate) fn is_real_data(&self) -> bool {
        match self {
            Atom::LinkTrace(k) | Atom::TensorLeft(k) | Atom::TraceWith(k) | Atom::TimesMatrix(k) => is_real(k),
            Atom::Functionals(f) | Atom::Combination(f) => f.is_real_data(),
            _ => true,
        }
    }
}

/// Composition of atoms, applied left to right.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinMap(pub Vec<Atom>);

impl LinMap {
    pub fn identity() -> Self {
        LinMap(Vec::new())
    }
    pub fn of(atom: Atom) -> Self {
        LinMap(vec![atom])
    }
    /// Appends `atom` (applied after the existing chain).
    pub fn then(mut self, atom: Atom) -> Self {
        self.0.push(atom);
        self
    }
    pub fn adjoint(&self) -> LinMap {
        LinMap(self.0.iter().rev().map(Atom::adjoint).collect())
    }
    pub fn out_space(&self, input: Space) -> Result<Space> {
        self.0.iter().try_fold(input, |s, a| a.out_space(s))
    }
    pub fn apply(&self, x: &Value) -> Result<Value> {
        let mut v = x.clone();
        for a in &self.0 {
            v = a.apply(&v)?;
        }
        Ok(v)
    }
}

/// Index of a variable inside its program.
pub type VarId = usize;

/// `Σ_j map_j(v_j) + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub space: Space,
    pub terms: Vec<(VarId, LinMap)>,
    pub constant: Value,
}

impl Expr {
    pub fn new(space: Space) -> Self {
        Self { space, terms: Vec::new(), constant: space.zero() }
    }
    pub fn term(mut self, var: VarId, map: LinMap) -> Self {
        self.terms.push((var, map));
        self
    }
    /// Adds `var` itself.
    pub fn var(self, var: VarId) -> Self {
        self.term(var, LinMap::identity())
    }
    pub fn plus_const(mut self, v: Value) -> Self {
        self.constant.add_assign(&v);
        self
    }
}

/// Sign restriction of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Free,
    /// PSD for matrices, nonnegative for vectors.
    Cone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub space: Space,
    pub domain: Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Named constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: Expr,
}

/// Conic program `opt Σ_j ⟨C_j, v_j⟩ + c₀` subject to equalities and cone
/// memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub sense: Sense,
    pub vars: Vec<Variable>,
    pub objective: Vec<(VarId, Value)>,
    pub objective_constant: f64,
    pub equalities: Vec<Constraint>,
    pub cones: Vec<Constraint>,
}

impl ConicProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            vars: Vec::new(),
            objective: Vec::new(),
            objective_constant: 0.0,
            equalities: Vec::new(),
            cones: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: &str, space: Space, domain: Domain) -> VarId {
        self.vars.push(Variable { name: name.into(), space, domain });
        self.vars.len() - 1
    }

    /// Adds `⟨coeff, var⟩` to the objective.
    pub fn add_objective(&mut self, var: VarId, coeff: Value) {
        self.objective.push((var, coeff));
    }

    /// `expr = 0`.
    pub fn add_equality(&mut self, name: &str, expr: Expr) {
        self.equalities.push(Constraint { name: name.into(), expr });
    }

    /// `expr ∈ K`.
    pub fn add_cone(&mut self, name: &str, expr: Expr) {
        self.cones.push(Constraint { name: name.into(), expr });
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// Checks that every term type-checks.
    pub fn check(&self) -> Result<()> {
        for (v, coeff) in &self.objective {
            let var = self.vars.get(*v).ok_or_else(|| Error::Model("unknown variable".into()))?;
            if coeff.space() != var.space {
                return Err(Error::Model(alloc::format!("objective coefficient for {} has wrong space", var.name)));
            }
        }
        for con in self.equalities.iter().chain(&self.cones) {
            if con.constant_space() != con.expr.space {
                return Err(Error::Model(alloc::format!("constant of {} has wrong space", con.name)));
            }
            for (v, map) in &con.expr.terms {
                let var = self.vars.get(*v).ok_or_else(|| Error::Model("unknown variable".into()))?;
                let out = map.out_space(var.space)?;
                if out != con.expr.space {
                    return Err(Error::Model(alloc::format!(
                        "term of {} on {} maps into {out:?}, expected {:?}",
                        con.name,
                        var.name,
                        con.expr.space
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate_expr(&self, expr: &Expr, values: &[Value]) -> Result<Value> {
        let mut out = expr.constant.clone();
        for (v, map) in &expr.terms {
            out.add_assign(&map.apply(&values[*v])?);
        }
        Ok(out)
    }

    pub fn objective_value(&self, values: &[Value]) -> f64 {
        self.objective_constant + self.objective.iter().map(|(v, c)| c.inner(&values[*v])).sum::<f64>()
    }

    /// Largest violation of any constraint or variable domain.
    pub fn max_violation(&self, values: &[Value]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (v, var) in self.vars.iter().enumerate() {
            if var.domain == Domain::Cone {
                worst = worst.max(values[v].cone_violation());
            }
        }
        for con in &self.equalities {
            worst = worst.max(self.evaluate_expr(&con.expr, values)?.max_abs());
        }
        for con in &self.cones {
            worst = worst.max(self.evaluate_expr(&con.expr, values)?.cone_violation());
        }
        Ok(worst)
    }

    pub(crate) fn is_real_data(&self) -> bool {
        self.objective.iter().all(|(_, v)| v.is_real_data())
            && self.equalities.iter().chain(&self.cones).all(|c| {
                c.expr.constant.is_real_data() && c.expr.terms.iter().all(|(_, m)| m.0.iter().all(Atom::is_real_data))
            })
    }
}

impl Constraint {
    fn constant_space(&self) -> Space {
        self.expr.constant.space()
    }
}
