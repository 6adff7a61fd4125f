//! Free theories of supermaps: the ALL theory (every superchannel is free)
//! and the PPT theory (superchannels whose Q-representation is a PPT
//! channel across a bipartition α|β of every system).
//!
//! A theory fixes the cone `𝔎 = ℝ₊𝔍` of free (unnormalized) Choi
//! matrices. It is described by a list of linear functionals spanning
//! `L^⊥`, an optional partial-transpose membership, and the trace that
//! picks out `𝔍` inside `𝔎`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::choi::*;
use crate::comb::{causal_marginals, comb_dims, random_comb, validate_comb, CombChoi};
use crate::conic::{
    self, Atom, ConicProgram, Domain, Expr, Functionals, LinMap, Sense, Space, SparseHerm, Value, VarId,
};
use crate::error::{Error, Result};
use crate::linalg::*;
use crate::supermap::{random_superchannel, tensor_superchannels, validate_superchannel, SuperChoi};
use crate::tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoryKind {
    All,
    Ppt,
}

/// Tensor factorization of one system, with the factors held by party β.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub dims: Vec<usize>,
    pub beta: Vec<usize>,
}

impl Factorization {
    /// A single factor held by α.
    pub fn alpha(d: usize) -> Self {
        Self { dims: vec![d], beta: Vec::new() }
    }

    /// A single factor held by β.
    pub fn beta(d: usize) -> Self {
        Self { dims: vec![d], beta: vec![0] }
    }

    /// `α ⊗ β` with the α factor first.
    pub fn split(alpha: usize, beta: usize) -> Self {
        Self { dims: vec![alpha, beta], beta: vec![1] }
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn beta_dim(&self) -> usize {
        self.beta.iter().map(|&i| self.dims[i]).product()
    }

    pub fn alpha_dim(&self) -> usize {
        self.dim() / self.beta_dim()
    }

    fn validate(&self, role: &str) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::InvalidBipartition(format!("{role}: factor dimensions must be positive")));
        }
        for (k, &i) in self.beta.iter().enumerate() {
            if i >= self.dims.len() {
                return Err(Error::InvalidBipartition(format!("{role}: factor {i} does not exist")));
            }
            if self.beta[..k].contains(&i) {
                return Err(Error::InvalidBipartition(format!("{role}: factor {i} assigned twice")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    A0,
    A1,
    B0,
    B1,
}

/// Which channel of a supermap a party layout refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn roles(self) -> [Role; 2] {
        match self {
            Side::A => [Role::A0, Role::A1],
            Side::B => [Role::B0, Role::B1],
        }
    }
}

/// Bipartition of the four systems of a supermap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parties {
    pub a0: Factorization,
    pub a1: Factorization,
    pub b0: Factorization,
    pub b1: Factorization,
}

impl Parties {
    pub fn get(&self, role: Role) -> &Factorization {
        match role {
            Role::A0 => &self.a0,
            Role::A1 => &self.a1,
            Role::B0 => &self.b0,
            Role::B1 => &self.b1,
        }
    }

    pub fn system(&self, side: Side) -> SystemPair {
        let [i, o] = side.roles();
        SystemPair::new(self.get(i).dim(), self.get(o).dim())
    }
}

/// Bipartition of a single channel's input and output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelParties {
    pub input: Factorization,
    pub output: Factorization,
}

impl ChannelParties {
    pub fn system(&self) -> SystemPair {
        SystemPair::new(self.input.dim(), self.output.dim())
    }
}

impl Parties {
    /// Supermap bipartition from the bipartitions of its two channels.
    pub fn from_sides(a: &ChannelParties, b: &ChannelParties) -> Self {
        Self { a0: a.input.clone(), a1: a.output.clone(), b0: b.input.clone(), b1: b.output.clone() }
    }

    pub fn side(&self, side: Side) -> ChannelParties {
        let [i, o] = side.roles();
        ChannelParties { input: self.get(i).clone(), output: self.get(o).clone() }
    }
}

/// A validated free theory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheorySpec {
    pub kind: TheoryKind,
    pub parties: Option<Parties>,
}

/// Validates a theory; a bipartition is required for PPT and forbidden
/// for ALL.
pub fn build_theory(kind: TheoryKind, parties: Option<Parties>) -> Result<TheorySpec> {
    match (kind, &parties) {
        (TheoryKind::All, Some(_)) => {
            return Err(Error::InvalidBipartition("the ALL theory takes no bipartition".into()))
        }
        (TheoryKind::Ppt, None) => return Err(Error::InvalidBipartition("PPT needs a bipartition".into())),
        (TheoryKind::Ppt, Some(p)) => {
            p.a0.validate("A0")?;
            p.a1.validate("A1")?;
            p.b0.validate("B0")?;
            p.b1.validate("B1")?;
        }
        _ => {}
    }
    Ok(TheorySpec { kind, parties })
}

impl TheorySpec {
    pub fn all() -> Self {
        Self { kind: TheoryKind::All, parties: None }
    }

    pub fn ppt(parties: Parties) -> Result<Self> {
        build_theory(TheoryKind::Ppt, Some(parties))
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            TheoryKind::All => "all",
            TheoryKind::Ppt => "ppt",
        }
    }

    /// Expanded factor dimensions and the β factors for a layout whose
    /// subsystems play `roles`. `None` for ALL.
    pub fn transpose_data(&self, roles: &[Role], dims: &[usize]) -> Result<Option<(Vec<usize>, Vec<usize>)>> {
        let Some(parties) = &self.parties else { return Ok(None) };
        let mut fdims = Vec::new();
        let mut beta = Vec::new();
        for (&r, &d) in roles.iter().zip(dims) {
            let f = parties.get(r);
            if f.dim() != d {
                return Err(Error::Dimension(format!(
                    "{r:?} has dimension {d} but the bipartition factors it as {:?}",
                    f.dims
                )));
            }
            beta.extend(f.beta.iter().map(|&i| fdims.len() + i));
            fdims.extend_from_slice(&f.dims);
        }
        Ok(Some((fdims, beta)))
    }

    fn check_side(&self, side: Side, sys: SystemPair) -> Result<()> {
        self.transpose_data(&side.roles(), &[sys.in_dim, sys.out_dim]).map(|_| ())
    }
}

/// Verdict of a free-set test.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeReport {
    pub free: bool,
    /// Smallest eigenvalue of the partially transposed Choi matrix (of the
    /// Choi matrix itself for ALL).
    pub pt_min_eig: f64,
    pub notes: Vec<String>,
}

fn pt_min_eig(theory: &TheorySpec, roles: &[Role], dims: &[usize], m: &Mat) -> Result<f64> {
    match theory.transpose_data(roles, dims)? {
        Some((fd, beta)) => Ok(min_eig(&tensor::partial_transpose(m, &fd, &beta)?)),
        None => Ok(min_eig(m)),
    }
}

/// Free channels: every channel for ALL, PPT channels for PPT.
pub fn is_free_channel(n: &ChannelChoi, theory: &TheorySpec, side: Side) -> Result<FreeReport> {
    let dims = [n.sys.in_dim, n.sys.out_dim];
    let e = pt_min_eig(theory, &side.roles(), &dims, n.matrix())?;
    let free = theory.kind == TheoryKind::All || e >= PSD_FLOOR;
    Ok(FreeReport { free, pt_min_eig: e, notes: Vec::new() })
}

const SUPER_ROLES: [Role; 4] = [Role::A0, Role::A1, Role::B0, Role::B1];

/// A superchannel is free when it is valid and, for PPT, its Choi matrix
/// stays PSD under the β partial transpose.
pub fn is_free_superchannel(theta: &SuperChoi, theory: &TheorySpec) -> Result<FreeReport> {
    let valid = validate_superchannel(theta);
    let e = pt_min_eig(theory, &SUPER_ROLES, &theta.dims(), theta.matrix())?;
    let mut notes = valid.notes;
    if e < PSD_FLOOR {
        notes.push(format!("partial transpose has eigenvalue {e:.3e}"));
    }
    Ok(FreeReport { free: valid.valid && e >= PSD_FLOOR, pt_min_eig: e, notes })
}

fn comb_roles(n: usize) -> Vec<Role> {
    let mut r = vec![Role::B0];
    for _ in 0..n {
        r.push(Role::A0);
        r.push(Role::A1);
    }
    r.push(Role::B1);
    r
}

pub fn is_free_comb(comb: &CombChoi, theory: &TheorySpec) -> Result<FreeReport> {
    let valid = validate_comb(comb)?;
    let e = pt_min_eig(theory, &comb_roles(comb.teeth.len()), &comb.dims(), comb.matrix())?;
    let mut notes = valid.notes;
    if e < PSD_FLOOR {
        notes.push(format!("partial transpose has eigenvalue {e:.3e}"));
    }
    Ok(FreeReport { free: valid.valid && e >= PSD_FLOOR, pt_min_eig: e, notes })
}

/// Sparse Hermitian basis of `d × d` matrices, traceless if asked.
fn herm_basis(d: usize, traceless: bool) -> Vec<Vec<(usize, usize, C64)>> {
    let mut out = Vec::new();
    if traceless {
        for k in 1..d {
            out.push(vec![(0, 0, c(1.0)), (k, k, c(-1.0))]);
        }
    } else {
        for k in 0..d {
            out.push(vec![(k, k, c(1.0))]);
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            out.push(vec![(i, j, c(1.0)), (j, i, c(1.0))]);
            out.push(vec![(i, j, C64::new(0.0, 1.0)), (j, i, C64::new(0.0, -1.0))]);
        }
    }
    out
}

/// Functionals `X ↦ tr[X (H_keep ⊗ T_t ⊗ I_rest)]` with `H` ranging over a
/// basis and `T` over a traceless basis. Their common kernel is the set of
/// `X` whose marginal on `keep ∪ {t}` is `Y_keep ⊗ I_t`.
fn factor_functionals(dims: &[usize], keep: &[usize], t: usize) -> Vec<SparseHerm> {
    let kd: Vec<usize> = keep.iter().map(|&i| dims[i]).collect();
    let rest: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i) && *i != t).collect();
    let rd: Vec<usize> = rest.iter().map(|&i| dims[i]).collect();
    let nk: usize = kd.iter().product();
    let nr: usize = rd.iter().product();
    let mut full = vec![0; dims.len()];
    let mut kdig = vec![0; keep.len()];
    let mut rdig = vec![0; rest.len()];
    let mut index = |k: usize, tv: usize, r: usize| {
        tensor::digits(k, &kd, &mut kdig);
        tensor::digits(r, &rd, &mut rdig);
        for (j, &s) in keep.iter().enumerate() {
            full[s] = kdig[j];
        }
        for (j, &s) in rest.iter().enumerate() {
            full[s] = rdig[j];
        }
        full[t] = tv;
        tensor::undigits(&full, dims)
    };
    let tb = herm_basis(dims[t], true);
    let mut out = Vec::new();
    for h in herm_basis(nk, false) {
        for tt in &tb {
            let mut entries = Vec::with_capacity(h.len() * tt.len() * nr);
            for &(hp, hq, hv) in &h {
                for &(tp, tq, tv) in tt {
                    for r in 0..nr {
                        entries.push((index(hp, tp, r), index(hq, tq, r), hv * tv));
                    }
                }
            }
            out.push(SparseHerm { entries });
        }
    }
    out
}

/// The cone `𝔎` of a theory for one kind of object, with what is needed to
/// constrain a program variable to it.
#[derive(Debug, Clone)]
pub struct FreeCone {
    pub dims: Vec<usize>,
    /// Basis of `L^⊥`: `X ∈ span(𝔎)` iff every functional vanishes.
    pub functionals: Arc<Functionals>,
    /// Trace of the normalized members.
    pub normalization: f64,
    /// Expanded factor dimensions and β factors for PPT.
    pub transpose: Option<(Vec<usize>, Vec<usize>)>,
}

/// Membership data of a matrix against [`FreeCone`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConeMembership {
    pub min_eig: f64,
    pub pt_min_eig: Option<f64>,
    pub subspace_residual: f64,
    pub trace: f64,
}

impl ConeMembership {
    pub fn in_cone(&self, tol: f64) -> bool {
        self.min_eig >= -tol && self.pt_min_eig.is_none_or(|e| e >= -tol) && self.subspace_residual <= tol
    }
}

impl FreeCone {
    fn from_parts(
        dims: Vec<usize>,
        rows: Vec<SparseHerm>,
        normalization: f64,
        transpose: Option<(Vec<usize>, Vec<usize>)>,
    ) -> Self {
        let n = dims.iter().product();
        let functionals = Arc::new(Functionals { n, rows, conjugation_closed: true });
        Self { dims, functionals, normalization, transpose }
    }

    /// Free superchannels `A → B`, layout `[A₀, A₁, B₀, B₁]`.
    pub fn superchannel(theory: &TheorySpec, sys_a: SystemPair, sys_b: SystemPair) -> Result<Self> {
        let dims = vec![sys_a.in_dim, sys_a.out_dim, sys_b.in_dim, sys_b.out_dim];
        let transpose = theory.transpose_data(&SUPER_ROLES, &dims)?;
        let mut rows = factor_functionals(&dims, &[0, 2], 1);
        rows.extend(factor_functionals(&dims, &[], 2));
        Ok(Self::from_parts(dims, rows, (sys_a.out_dim * sys_b.in_dim) as f64, transpose))
    }

    /// Free channels on one side, layout `[in, out]`.
    pub fn channel(theory: &TheorySpec, side: Side, sys: SystemPair) -> Result<Self> {
        let dims = vec![sys.in_dim, sys.out_dim];
        let transpose = theory.transpose_data(&side.roles(), &dims)?;
        let rows = factor_functionals(&dims, &[], 0);
        Ok(Self::from_parts(dims, rows, sys.in_dim as f64, transpose))
    }

    /// Free `n`-slot combs with every slot of type `A`, layout
    /// `[B₀, A₀¹, A₁¹, …, B₁]`.
    pub fn comb(theory: &TheorySpec, n: usize, sys_a: SystemPair, sys_b: SystemPair) -> Result<Self> {
        crate::comb::check_slots(n)?;
        let teeth = vec![sys_a; n];
        let dims = comb_dims(sys_b, &teeth);
        let transpose = theory.transpose_data(&comb_roles(n), &dims)?;
        let mut rows = Vec::new();
        for (keep, slot) in causal_marginals(n) {
            let before: Vec<usize> = keep.into_iter().filter(|&k| k != slot).collect();
            rows.extend(factor_functionals(&dims, &before, slot));
        }
        rows.extend(factor_functionals(&dims, &[], 0));
        let norm = sys_b.in_dim * sys_a.out_dim.pow(n as u32);
        Ok(Self::from_parts(dims, rows, norm as f64, transpose))
    }

    pub fn size(&self) -> usize {
        self.functionals.n
    }

    pub fn pt_atom(&self) -> Option<Atom> {
        self.transpose
            .as_ref()
            .map(|(dims, subset)| Atom::PartialTranspose { dims: dims.clone(), subset: subset.clone() })
    }

    /// Adds `x ∈ 𝔎` to a program (with `tr x` fixed to the normalization
    /// when `normalized`, i.e. `x ∈ 𝔍`). Constraint names are prefixed.
    /// The variable itself must be declared with [`Domain::Cone`].
    pub fn constrain(&self, p: &mut ConicProgram, x: VarId, prefix: &str, normalized: bool) {
        let n = self.size();
        if !self.functionals.rows.is_empty() {
            p.add_equality(
                &format!("{prefix}subspace"),
                Expr::new(Space::Real(self.functionals.rows.len()))
                    .term(x, LinMap::of(Atom::Functionals(self.functionals.clone()))),
            );
        }
        if let Some(atom) = self.pt_atom() {
            p.add_cone(&format!("{prefix}ppt"), Expr::new(Space::Herm(n)).term(x, LinMap::of(atom)));
        }
        if normalized {
            p.add_equality(
                &format!("{prefix}trace"),
                Expr::new(Space::Real(1))
                    .term(x, LinMap::of(Atom::TraceWith(Arc::new(eye(n)))))
                    .plus_const(Value::scalar(-self.normalization)),
            );
        }
    }

    pub fn membership(&self, m: &Mat) -> Result<ConeMembership> {
        let pt = match &self.transpose {
            Some((d, s)) => Some(min_eig(&tensor::partial_transpose(m, d, s)?)),
            None => None,
        };
        let residual = self.functionals.rows.iter().map(|w| w.inner_with(m).abs()).fold(0.0, f64::max);
        Ok(ConeMembership { min_eig: min_eig(m), pt_min_eig: pt, subspace_residual: residual, trace: trace(m).re })
    }

    /// `Σ_k v_k W_k` over the `L^⊥` basis.
    pub fn subspace_element(&self, v: &[f64]) -> Mat {
        match Atom::Combination(self.functionals.clone()).apply(&Value::Real(v.to_vec())) {
            Ok(Value::Herm(m)) => m,
            _ => unreachable!("combination of matching length"),
        }
    }

    /// Decides `W ∈ 𝔎*` by minimizing `s` subject to
    /// `W + sI = P + PT(Q) + V` with `P, Q ⪰ 0` and `V ∈ L^⊥`.
    pub fn dual_membership(&self, w: &Mat) -> Result<DualConeWitness> {
        let n = self.size();
        if w.nrows() != n {
            return Err(Error::Dimension(format!("witness of size {} for a cone on {n}", w.nrows())));
        }
        let k = self.functionals.rows.len();
        let mut p = ConicProgram::new(Sense::Minimize);
        let s = p.add_var("s", Space::Real(1), Domain::Free);
        p.add_objective(s, Value::scalar(1.0));
        let mut expr = Expr::new(Space::Herm(n))
            .term(s, LinMap::of(Atom::TimesMatrix(Arc::new(eye(n)))))
            .plus_const(Value::Herm(w.clone()));
        let v = (k > 0).then(|| p.add_var("v", Space::Real(k), Domain::Free));
        if let Some(v) = v {
            expr = expr.term(v, LinMap::of(Atom::Combination(self.functionals.clone())).then(Atom::Scale(-1.0)));
        }
        let q = self.pt_atom().map(|atom| {
            let q = p.add_var("q", Space::Herm(n), Domain::Cone);
            (q, atom)
        });
        if let Some((q, atom)) = &q {
            expr = expr.term(*q, LinMap::of(atom.clone()).then(Atom::Scale(-1.0)));
        }
        p.add_cone("p", expr);
        let r = conic::solve(&p)?;
        if !r.is_optimal() {
            return Err(Error::Solver(format!("dual-cone membership solve ended with {:?}", r.status)));
        }
        let coefficients = match r.value("v") {
            Some(Value::Real(x)) => x.clone(),
            _ => Vec::new(),
        };
        let subspace = if k > 0 { self.subspace_element(&coefficients) } else { zeros(n, n) };
        let ppt = r.value("q").and_then(|v| v.as_herm().cloned());
        let pt_part = match (&ppt, &self.transpose) {
            (Some(qm), Some((d, sub))) => tensor::partial_transpose(qm, d, sub)?,
            _ => zeros(n, n),
        };
        let psd = herm_part(&(w - &subspace - &pt_part));
        Ok(DualConeWitness {
            w: w.clone(),
            psd,
            ppt,
            subspace,
            coefficients,
            transpose: self.transpose.clone(),
            margin: r.primal,
        })
    }
}

/// Certificate for `W ∈ 𝔎*`: `W = P + PT(Q) + V` with `P, Q ⪰ 0` and
/// `V ∈ L^⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualConeWitness {
    pub w: Mat,
    pub psd: Mat,
    /// `Q`, present for PPT.
    pub ppt: Option<Mat>,
    pub subspace: Mat,
    /// Coordinates of `V` in the `L^⊥` basis.
    pub coefficients: Vec<f64>,
    pub transpose: Option<(Vec<usize>, Vec<usize>)>,
    /// Smallest `s` with `W + sI ∈ 𝔎*`; nonpositive for members.
    pub margin: f64,
}

impl DualConeWitness {
    /// Largest entry of `W − P − PT(Q) − V`.
    pub fn decomposition_error(&self) -> Result<f64> {
        let mut rest = &self.w - &self.psd - &self.subspace;
        if let (Some(q), Some((d, s))) = (&self.ppt, &self.transpose) {
            rest -= tensor::partial_transpose(q, d, s)?;
        }
        Ok(max_abs(&rest))
    }

    /// Smallest eigenvalue over the PSD certificates.
    pub fn certificate_min_eig(&self) -> f64 {
        let e = min_eig(&self.psd);
        self.ppt.as_ref().map_or(e, |q| e.min(min_eig(q)))
    }

    pub fn is_member(&self, tol: f64) -> bool {
        self.margin <= tol && self.certificate_min_eig() >= -tol
    }
}

/// Reorders a tensor product whose subsystems are laid out as
/// `[α part, β part]` per role into each role's own factor order.
fn local_to_canonical(m: &Mat, facts: &[&Factorization]) -> Result<Mat> {
    let mut old_dims = Vec::new();
    let mut old_pos = Vec::new();
    for f in facts {
        let base = old_dims.len();
        let alpha: Vec<usize> = (0..f.dims.len()).filter(|i| !f.beta.contains(i)).collect();
        old_dims.extend(alpha.iter().map(|&i| f.dims[i]));
        old_dims.extend(f.beta.iter().map(|&i| f.dims[i]));
        let mut pos = vec![0; f.dims.len()];
        for (r, &i) in alpha.iter().enumerate() {
            pos[i] = base + r;
        }
        for (r, &i) in f.beta.iter().enumerate() {
            pos[i] = base + alpha.len() + r;
        }
        old_pos.extend(pos);
    }
    tensor::permute(m, &old_dims, &old_pos)
}

/// `m₁ ⊗ m₂` with matching layouts interleaved subsystem by subsystem.
fn interleave(m1: &Mat, d1: &[usize], m2: &Mat, d2: &[usize]) -> Result<Mat> {
    let l = d1.len();
    let mut dims = d1.to_vec();
    dims.extend_from_slice(d2);
    let perm: Vec<usize> = (0..l).flat_map(|k| [k, l + k]).collect();
    tensor::permute(&kron(m1, m2), &dims, &perm)
}

fn local_channel<R: Rng + ?Sized>(parties: &Parties, side: Side, rng: &mut R) -> Result<ChannelChoi> {
    let [ri, ro] = side.roles();
    let (fi, fo) = (parties.get(ri), parties.get(ro));
    let ca = random_channel(SystemPair::new(fi.alpha_dim(), fo.alpha_dim()), 2, rng)?;
    let cb = random_channel(SystemPair::new(fi.beta_dim(), fo.beta_dim()), 2, rng)?;
    let m = interleave(ca.matrix(), &[ca.sys.in_dim, ca.sys.out_dim], cb.matrix(), &[cb.sys.in_dim, cb.sys.out_dim])?;
    ChannelChoi::new(parties.system(side), local_to_canonical(&m, &[fi, fo])?)
}

/// A random free channel. For PPT: a mixture of two local product channels.
pub fn sample_free_channel<R: Rng + ?Sized>(
    theory: &TheorySpec,
    side: Side,
    sys: SystemPair,
    rng: &mut R,
) -> Result<ChannelChoi> {
    theory.check_side(side, sys)?;
    match &theory.parties {
        None => random_channel(sys, 2.max(sys.in_dim.div_ceil(sys.out_dim)), rng),
        Some(parties) => {
            let c1 = local_channel(parties, side, rng)?;
            let c2 = local_channel(parties, side, rng)?;
            let t: f64 = rng.random();
            ChannelChoi::new(sys, c1.matrix() * c(t) + c2.matrix() * c(1.0 - t))
        }
    }
}

fn local_superchannel<R: Rng + ?Sized>(parties: &Parties, rng: &mut R) -> Result<SuperChoi> {
    let half = |alpha: bool| {
        let d = |f: &Factorization| if alpha { f.alpha_dim() } else { f.beta_dim() };
        (SystemPair::new(d(&parties.a0), d(&parties.a1)), SystemPair::new(d(&parties.b0), d(&parties.b1)))
    };
    let (aa, ba) = half(true);
    let (ab, bb) = half(false);
    let ta = random_superchannel(aa, ba, ba.in_dim.max(1), rng)?;
    let tb = random_superchannel(ab, bb, bb.in_dim.max(1), rng)?;
    let t = tensor_superchannels(&ta, &tb)?;
    let m = local_to_canonical(t.matrix(), &[&parties.a0, &parties.a1, &parties.b0, &parties.b1])?;
    SuperChoi::new(parties.system(Side::A), parties.system(Side::B), m)
}

/// A random free superchannel. For PPT this mixes local products
/// `Θ_α ⊗ Θ_β` with replacements by free channels; these are free but
/// need not exhaust the free set.
pub fn sample_free_superchannel<R: Rng + ?Sized>(
    theory: &TheorySpec,
    sys_a: SystemPair,
    sys_b: SystemPair,
    rng: &mut R,
) -> Result<SuperChoi> {
    match &theory.parties {
        None => random_superchannel(sys_a, sys_b, sys_b.in_dim.max(1), rng),
        Some(parties) => {
            theory.check_side(Side::A, sys_a)?;
            theory.check_side(Side::B, sys_b)?;
            let t1 = local_superchannel(parties, rng)?;
            let t2 = if rng.random_bool(0.5) {
                local_superchannel(parties, rng)?
            } else {
                SuperChoi::replacement(sys_a, &sample_free_channel(theory, Side::B, sys_b, rng)?)
            };
            let t: f64 = rng.random();
            SuperChoi::new(sys_a, sys_b, t1.matrix() * c(t) + t2.matrix() * c(1.0 - t))
        }
    }
}

/// A random free comb with `n` slots of type `A`. For PPT: a local product
/// of two combs.
pub fn sample_free_comb<R: Rng + ?Sized>(
    theory: &TheorySpec,
    n: usize,
    sys_a: SystemPair,
    sys_b: SystemPair,
    rng: &mut R,
) -> Result<CombChoi> {
    let teeth = vec![sys_a; n];
    match &theory.parties {
        None => random_comb(sys_b, &teeth, 2, rng),
        Some(p) => {
            theory.check_side(Side::A, sys_a)?;
            theory.check_side(Side::B, sys_b)?;
            let part = |alpha: bool, rng: &mut R| {
                let d = |f: &Factorization| if alpha { f.alpha_dim() } else { f.beta_dim() };
                let a = SystemPair::new(d(&p.a0), d(&p.a1));
                let b = SystemPair::new(d(&p.b0), d(&p.b1));
                random_comb(b, &vec![a; n], 2, rng)
            };
            let ca = part(true, rng)?;
            let cb = part(false, rng)?;
            let m = interleave(ca.matrix(), &ca.dims(), cb.matrix(), &cb.dims())?;
            let roles = comb_roles(n);
            let facts: Vec<&Factorization> = roles.iter().map(|&r| p.get(r)).collect();
            CombChoi::new(sys_b, teeth, local_to_canonical(&m, &facts)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supermap::compose_superchannels;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_ppt() -> TheorySpec {
        // every system is a two-qubit pair split α|β
        let f = Factorization::split(2, 2);
        TheorySpec::ppt(Parties { a0: f.clone(), a1: f.clone(), b0: f.clone(), b1: f }).unwrap()
    }

    fn small_ppt() -> TheorySpec {
        // A: qubit channel held by α; B: qubit input on α, two-qubit output split α|β
        TheorySpec::ppt(Parties {
            a0: Factorization::alpha(2),
            a1: Factorization::alpha(2),
            b0: Factorization::alpha(1),
            b1: Factorization::split(2, 2),
        })
        .unwrap()
    }

    #[test]
    fn bipartition_validation() {
        let f = Factorization { dims: vec![2, 2], beta: vec![1, 1] };
        let p = Parties { a0: f.clone(), a1: Factorization::alpha(2), b0: Factorization::alpha(2), b1: f };
        assert!(matches!(build_theory(TheoryKind::Ppt, Some(p)), Err(Error::InvalidBipartition(_))));
        assert!(build_theory(TheoryKind::Ppt, None).is_err());
        let ok = qubit_ppt().parties;
        assert!(build_theory(TheoryKind::All, ok).is_err());
    }

    #[test]
    fn constraint_counts() {
        let s = SystemPair::new(2, 2);
        let all = FreeCone::superchannel(&TheorySpec::all(), s, s).unwrap();
        // H on A₀B₀ (16) × traceless on A₁ (3), plus traceless on B₀ (3)
        assert_eq!(all.functionals.rows.len(), 51);
        assert!(all.transpose.is_none());
        let q = SystemPair::new(4, 4);
        let ppt = FreeCone::superchannel(&qubit_ppt(), q, q).unwrap();
        assert_eq!(ppt.functionals.rows.len(), 16 * 16 * 15 + 15);
        assert_eq!(ppt.transpose.as_ref().unwrap().1, vec![1, 3, 5, 7]);
    }

    #[test]
    fn valid_superchannels_satisfy_the_functionals() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, b) = (SystemPair::new(2, 3), SystemPair::new(2, 2));
        let cone = FreeCone::superchannel(&TheorySpec::all(), a, b).unwrap();
        for _ in 0..50 {
            let t = random_superchannel(a, b, 2, &mut rng).unwrap();
            let m = cone.membership(t.matrix()).unwrap();
            assert!(m.in_cone(1e-9), "{m:?}");
            assert!((m.trace - cone.normalization).abs() < 1e-9);
        }
        // and a cone member with the right trace is a superchannel
        let t = random_superchannel(a, b, 2, &mut rng).unwrap();
        let bad = t.matrix() + kron(&eye(6), &unit(4, 0, 0)) * c(0.3) - kron(&eye(6), &unit(4, 3, 3)) * c(0.3);
        let m = cone.membership(&bad).unwrap();
        assert!(m.subspace_residual > 1e-3);
    }

    #[test]
    fn channel_and_comb_cones_accept_valid_objects() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = SystemPair::new(2, 2);
        let cone = FreeCone::channel(&TheorySpec::all(), Side::A, s).unwrap();
        let n = random_channel(s, 2, &mut rng).unwrap();
        assert!(cone.membership(n.matrix()).unwrap().in_cone(1e-9));
        let ccone = FreeCone::comb(&TheorySpec::all(), 2, s, SystemPair::new(1, 2)).unwrap();
        for _ in 0..5 {
            let comb = random_comb(SystemPair::new(1, 2), &[s, s], 2, &mut rng).unwrap();
            let m = ccone.membership(comb.matrix()).unwrap();
            assert!(m.in_cone(1e-9) && (m.trace - ccone.normalization).abs() < 1e-9, "{m:?}");
        }
    }

    #[test]
    fn free_channel_examples() {
        let th = small_ppt();
        let dep = ChannelChoi::depolarizing(1, 4);
        assert!(is_free_channel(&dep, &th, Side::B).unwrap().free);
        let prep = ChannelChoi::preparation(&(phi_plus(2) * c(0.5))).unwrap();
        let r = is_free_channel(&prep, &th, Side::B).unwrap();
        assert!(!r.free);
        // the swap has eigenvalue −1; normalized φ⁺ gives −1/2
        assert!((r.pt_min_eig + 0.5).abs() < 1e-12);
        assert!(is_free_channel(&prep, &TheorySpec::all(), Side::B).unwrap().free);
    }

    #[test]
    fn sampled_free_objects_are_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let th = small_ppt();
        let (a, b) = (SystemPair::new(2, 2), SystemPair::new(1, 4));
        let cone = FreeCone::superchannel(&th, a, b).unwrap();
        for _ in 0..20 {
            let t = sample_free_superchannel(&th, a, b, &mut rng).unwrap();
            let rep = is_free_superchannel(&t, &th).unwrap();
            assert!(rep.free, "{rep:?}");
            assert!(cone.membership(t.matrix()).unwrap().in_cone(1e-9));
            let ch = sample_free_channel(&th, Side::B, b, &mut rng).unwrap();
            assert!(is_free_channel(&ch, &th, Side::B).unwrap().free);
            assert!(validate_channel(&ch).valid);
        }
        let comb = sample_free_comb(&th, 2, a, b, &mut rng).unwrap();
        assert!(is_free_comb(&comb, &th).unwrap().free);
    }

    #[test]
    fn identity_is_free_over_a_matching_split() {
        let th = qubit_ppt();
        let q = SystemPair::new(4, 4);
        let id = SuperChoi::identity(q);
        let rep = is_free_superchannel(&id, &th).unwrap();
        assert!(rep.free, "{rep:?}");
        // compositions of free superchannels stay free
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let th2 = TheorySpec::ppt(Parties {
            a0: Factorization::split(2, 2),
            a1: Factorization::split(2, 1),
            b0: Factorization::split(2, 2),
            b1: Factorization::split(2, 1),
        })
        .unwrap();
        let s = SystemPair::new(4, 2);
        for _ in 0..5 {
            let t1 = sample_free_superchannel(&th2, s, s, &mut rng).unwrap();
            let t2 = sample_free_superchannel(&th2, s, s, &mut rng).unwrap();
            let t = compose_superchannels(&t2, &t1).unwrap();
            assert!(is_free_superchannel(&t, &th2).unwrap().free);
        }
    }

    #[test]
    fn dual_cone_membership() {
        let s = SystemPair::new(2, 2);
        let cone = FreeCone::superchannel(&TheorySpec::all(), s, s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = ginibre(16, 16, &mut rng);
        let psd = &g * g.adjoint();
        let w = cone.dual_membership(&psd).unwrap();
        assert!(w.is_member(1e-7));
        assert!(w.decomposition_error().unwrap() < 1e-8);
        let neg = cone.dual_membership(&(-eye(16))).unwrap();
        assert!(!neg.is_member(1e-7));
        assert!((neg.margin - 1.0).abs() < 1e-6);
    }
}
