//! Choi matrices of channels and the elementary operations on them.
//!
//! Conventions: the unnormalized maximally entangled operator
//! `φ⁺ = Σ_ij |ii⟩⟨jj|` is used, so a channel `N: A₀ → A₁` has Choi matrix
//! `J^N = (id ⊗ N)(φ⁺)` on `A₀ ⊗ A₁` with `tr_{A₁} J^N = I_{A₀}`, and
//! `N(ρ) = tr_{A₀}[J^N (ρᵀ ⊗ I)]`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{dim_err, Error, Result};
use crate::linalg::*;
use crate::tensor;

/// Default tolerances.
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const PSD_FLOOR: f64 = -1e-9;
pub const EQUALITY_TOL: f64 = 1e-8;
pub const RANK_REL_TOL: f64 = 1e-9;

/// Input and output dimension of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemPair {
    pub in_dim: usize,
    pub out_dim: usize,
}

impl SystemPair {
    pub const fn new(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim }
    }
    pub const fn choi_dim(&self) -> usize {
        self.in_dim * self.out_dim
    }
}

/// Hermitian matrix with a tensor layout.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dims: Vec<usize>,
    mat: Mat,
}

impl HermitianMatrix {
    /// Checks shape and Hermiticity (within [`HERMITICITY_TOL`]), then stores
    /// the exact Hermitian part.
    pub fn new(dims: Vec<usize>, mat: Mat) -> Result<Self> {
        let n: usize = dims.iter().product();
        if mat.nrows() != n || mat.ncols() != n {
            return dim_err(alloc::format!(
                "matrix is {}x{} but layout {:?} needs {}",
                mat.nrows(),
                mat.ncols(),
                dims,
                n
            ));
        }
        if dims.contains(&0) {
            return dim_err("zero-dimensional subsystem");
        }
        let err = hermiticity_error(&mat);
        if err > HERMITICITY_TOL * (1.0 + max_abs(&mat)) {
            return Err(Error::NotHermitian(err));
        }
        Ok(Self { dims, mat: herm_part(&mat) })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn matrix(&self) -> &Mat {
        &self.mat
    }
    pub fn into_matrix(self) -> Mat {
        self.mat
    }
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<HermitianMatrix> {
        let m = tensor::partial_trace(&self.mat, &self.dims, keep)?;
        let mut k = keep.to_vec();
        k.sort_unstable();
        Ok(Self { dims: k.iter().map(|&i| self.dims[i]).collect(), mat: herm_part(&m) })
    }

    pub fn partial_transpose(&self, subset: &[usize]) -> Result<HermitianMatrix> {
        let m = tensor::partial_transpose(&self.mat, &self.dims, subset)?;
        Ok(Self { dims: self.dims.clone(), mat: m })
    }

    pub fn permute(&self, perm: &[usize]) -> Result<HermitianMatrix> {
        let m = tensor::permute(&self.mat, &self.dims, perm)?;
        Ok(Self { dims: tensor::permuted_dims(&self.dims, perm), mat: m })
    }

    /// Same matrix with a different (compatible) layout.
    pub fn relabel(&self, dims: Vec<usize>) -> Result<HermitianMatrix> {
        if dims.iter().product::<usize>() != self.dim() {
            return dim_err("relabelled layout has a different total dimension");
        }
        Ok(Self { dims, mat: self.mat.clone() })
    }

    pub fn min_eig(&self) -> f64 {
        min_eig(&self.mat)
    }
}

/// Pass/fail verdict plus the measured defects.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub valid: bool,
    pub min_eig: f64,
    /// Largest violation of any marginal condition (entrywise).
    pub marginal_error: f64,
    pub notes: Vec<alloc::string::String>,
}

/// Choi matrix of a channel, layout `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelChoi {
    pub sys: SystemPair,
    pub choi: HermitianMatrix,
}

impl ChannelChoi {
    /// Wraps a matrix without checking CPTP (see [`validate_channel`]).
    pub fn new(sys: SystemPair, mat: Mat) -> Result<Self> {
        Ok(Self { sys, choi: HermitianMatrix::new(vec![sys.in_dim, sys.out_dim], mat)? })
    }

    /// Wraps a matrix and rejects it unless it is CPTP.
    pub fn checked(sys: SystemPair, mat: Mat) -> Result<Self> {
        let ch = Self::new(sys, mat)?;
        let rep = validate_channel(&ch);
        if !rep.valid {
            return Err(Error::InvalidChannel(alloc::format!(
                "min eigenvalue {:.3e}, marginal error {:.3e}",
                rep.min_eig,
                rep.marginal_error
            )));
        }
        Ok(ch)
    }

    pub fn matrix(&self) -> &Mat {
        self.choi.matrix()
    }

    /// Identity channel on dimension `d`.
    pub fn identity(d: usize) -> Self {
        Self::new(SystemPair::new(d, d), phi_plus(d)).expect("identity")
    }

    /// Completely depolarizing channel `ρ ↦ tr(ρ) I/d_out`.
    pub fn depolarizing(d_in: usize, d_out: usize) -> Self {
        let m = eye(d_in * d_out) / c(d_out as f64);
        Self::new(SystemPair::new(d_in, d_out), m).expect("depolarizing")
    }

    /// Preparation of `state` from the trivial input.
    pub fn preparation(state: &Mat) -> Result<Self> {
        Self::new(SystemPair::new(1, state.nrows()), state.clone())
    }

    /// Unitary (or isometric) channel `ρ ↦ UρU†`.
    pub fn unitary(u: &Mat) -> Result<Self> {
        choi_of_channel(core::slice::from_ref(u), SystemPair::new(u.ncols(), u.nrows()))
    }
}

/// Choi matrix from Kraus operators (each `out × in`), checking `Σ K†K = I`.
pub fn choi_of_channel(kraus: &[Mat], sys: SystemPair) -> Result<ChannelChoi> {
    let (a, b) = (sys.in_dim, sys.out_dim);
    if kraus.is_empty() {
        return Err(Error::InvalidChannel("empty Kraus set".to_string()));
    }
    let mut tp = zeros(a, a);
    for k in kraus {
        if k.nrows() != b || k.ncols() != a {
            return dim_err(alloc::format!("Kraus operator is {}x{}, expected {}x{}", k.nrows(), k.ncols(), b, a));
        }
        tp += k.adjoint() * k;
    }
    let dev = max_abs_diff(&tp, &eye(a));
    if dev > EQUALITY_TOL {
        return Err(Error::NotTracePreserving(dev));
    }
    ChannelChoi::new(sys, choi_of_kraus_unchecked(kraus, a, b))
}

/// `Σ_k (I ⊗ K_k) φ⁺ (I ⊗ K_k)†` with no trace-preservation check.
pub fn choi_of_kraus_unchecked(kraus: &[Mat], a: usize, b: usize) -> Mat {
    let mut j = zeros(a * b, a * b);
    for k in kraus {
        // vec with (i, x) ↦ K[x, i]
        let v = DVector::from_fn(a * b, |r, _| k[(r % b, r / b)]);
        j += &v * v.adjoint();
    }
    herm_part(&j)
}

/// Kraus operators from a Choi matrix (`out × in` each), dropping
/// eigenvalues below the relative rank threshold.
pub fn kraus_from_choi(j: &Mat, a: usize, b: usize) -> Vec<Mat> {
    let (vals, vecs) = eigh(j);
    let top = vals.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut out = Vec::new();
    for (k, &v) in vals.iter().enumerate().rev() {
        if v <= RANK_REL_TOL * top.max(f64::MIN_POSITIVE) {
            continue;
        }
        let s = libm::sqrt(v);
        out.push(Mat::from_fn(b, a, |x, i| vecs[(i * b + x, k)] * c(s)));
    }
    if out.is_empty() {
        out.push(zeros(b, a));
    }
    out
}

/// `tr_in[J (Xᵀ ⊗ I)]` for an arbitrary square `x` (not necessarily Hermitian).
pub fn apply_choi(j: &Mat, a: usize, x: &Mat) -> Result<Mat> {
    if x.nrows() != a || x.ncols() != a || j.nrows() % a.max(1) != 0 {
        return dim_err("operator does not match the channel input");
    }
    tensor::link_trace(j, &x.transpose())
}

/// Applies a channel to an operator on its input.
pub fn apply_channel(n: &ChannelChoi, rho: &Mat) -> Result<Mat> {
    apply_choi(n.matrix(), n.sys.in_dim, rho)
}

/// Choi matrix of a linear map given as a closure on `a × a` operators.
pub fn choi_of_map(a: usize, b: usize, f: impl Fn(&Mat) -> Result<Mat>) -> Result<Mat> {
    let mut j = zeros(a * b, a * b);
    for i in 0..a {
        for k in 0..a {
            let y = f(&unit(a, i, k))?;
            if y.nrows() != b || y.ncols() != b {
                return dim_err("map output has the wrong dimension");
            }
            for r in 0..b {
                for s in 0..b {
                    j[(i * b + r, k * b + s)] = y[(r, s)];
                }
            }
        }
    }
    Ok(j)
}

/// `M ∘ N` (first `n`, then `m`).
pub fn compose(m: &ChannelChoi, n: &ChannelChoi) -> Result<ChannelChoi> {
    if n.sys.out_dim != m.sys.in_dim {
        return dim_err("composed channels have mismatched dimensions");
    }
    let j = choi_of_map(n.sys.in_dim, m.sys.out_dim, |x| apply_channel(m, &apply_channel(n, x)?))?;
    ChannelChoi::new(SystemPair::new(n.sys.in_dim, m.sys.out_dim), j)
}

/// `N ⊗ M` with layout `[N.in, M.in, N.out, M.out]` collapsed to `[in, out]`.
pub fn tensor_channels(n: &ChannelChoi, m: &ChannelChoi) -> Result<ChannelChoi> {
    let big = kron(n.matrix(), m.matrix());
    let dims = [n.sys.in_dim, n.sys.out_dim, m.sys.in_dim, m.sys.out_dim];
    let j = tensor::permute(&big, &dims, &[0, 2, 1, 3])?;
    ChannelChoi::new(SystemPair::new(n.sys.in_dim * m.sys.in_dim, n.sys.out_dim * m.sys.out_dim), j)
}

/// Verdict for a candidate channel Choi matrix.
pub fn validate_channel(n: &ChannelChoi) -> ValidationReport {
    let j = n.matrix();
    let me = min_eig(j);
    let marg = tensor::partial_trace(j, &[n.sys.in_dim, n.sys.out_dim], &[0])
        .map(|m| max_abs_diff(&m, &eye(n.sys.in_dim)))
        .unwrap_or(f64::INFINITY);
    let mut notes = Vec::new();
    if me < PSD_FLOOR {
        notes.push(alloc::format!("not completely positive: min eigenvalue {me:.3e}"));
    }
    if marg > EQUALITY_TOL {
        notes.push(alloc::format!("not trace preserving: marginal error {marg:.3e}"));
    }
    ValidationReport { valid: notes.is_empty(), min_eig: me, marginal_error: marg, notes }
}

/// A purification `|ψ⟩ ∈ S ⊗ E` of a PSD operator on `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Purification {
    /// Column vector on `S ⊗ E` (system index most significant).
    pub psi: DVector<C64>,
    pub sys_dim: usize,
    pub env_dim: usize,
}

impl Purification {
    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> Mat {
        outer(&self.psi, &self.psi)
    }
    /// The vector as a `sys × env` matrix `Ψ` with `ΨΨ† = ρ`.
    pub fn as_matrix(&self) -> Mat {
        Mat::from_fn(self.sys_dim, self.env_dim, |s, e| self.psi[s * self.env_dim + e])
    }
}

/// Minimal purification with environment dimension equal to the numerical
/// rank (eigenvalues above `1e-9 ×` the largest).
pub fn purify(rho: &Mat) -> Result<Purification> {
    if !rho.is_square() || rho.nrows() == 0 {
        return dim_err("purify needs a non-empty square matrix");
    }
    let err = hermiticity_error(rho);
    if err > HERMITICITY_TOL * (1.0 + max_abs(rho)) {
        return Err(Error::NotHermitian(err));
    }
    let (vals, vecs) = eigh(rho);
    let top = vals.last().copied().unwrap_or(0.0);
    if vals[0] < PSD_FLOOR * (1.0 + top.abs()) {
        return Err(Error::Argument(alloc::format!("cannot purify an operator with eigenvalue {:.3e}", vals[0])));
    }
    let keep: Vec<usize> = (0..vals.len()).rev().filter(|&k| top > 0.0 && vals[k] > RANK_REL_TOL * top).collect();
    let n = rho.nrows();
    let r = keep.len().max(1);
    let mut psi = DVector::zeros(n * r);
    for (e, &k) in keep.iter().enumerate() {
        let s = libm::sqrt(vals[k]);
        for i in 0..n {
            psi[i * r + e] = vecs[(i, k)] * c(s);
        }
    }
    Ok(Purification { psi, sys_dim: n, env_dim: r })
}

/// Haar-random channel from a random Stinespring isometry
/// `A₀ → A₁ ⊗ E` with environment dimension `env_dim`.
pub fn random_channel<R: Rng + ?Sized>(sys: SystemPair, env_dim: usize, rng: &mut R) -> Result<ChannelChoi> {
    let (a, b) = (sys.in_dim, sys.out_dim);
    if env_dim == 0 || b * env_dim < a {
        return Err(Error::Argument(alloc::format!(
            "environment dimension {env_dim} too small for a {a} → {b} channel"
        )));
    }
    let v = random_isometry(b * env_dim, a, rng);
    let kraus: Vec<Mat> = (0..env_dim).map(|e| Mat::from_fn(b, a, |x, i| v[(x * env_dim + e, i)])).collect();
    ChannelChoi::new(sys, choi_of_kraus_unchecked(&kraus, a, b))
}

/// Left inverse of an isometric channel `ρ ↦ VρV†`:
/// `σ ↦ V†σV + tr[(I − VV†)σ] τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryInverse {
    pub v: Mat,
    pub tau: Mat,
}

impl IsometryInverse {
    pub fn apply(&self, sigma: &Mat) -> Mat {
        let p = eye(self.v.nrows()) - &self.v * self.v.adjoint();
        self.v.adjoint() * sigma * &self.v + &self.tau * (&p * sigma).trace()
    }
    /// Choi matrix of the inverse channel (CPTP when `tau` is a state).
    pub fn choi(&self) -> Result<ChannelChoi> {
        let (din, dout) = (self.v.nrows(), self.v.ncols());
        let j = choi_of_map(din, dout, |x| Ok(self.apply(x)))?;
        ChannelChoi::new(SystemPair::new(din, dout), j)
    }
}

/// Builds the left inverse of an isometry `v` using the fixed state `tau`.
pub fn isometry_left_inverse(v: &Mat, tau: &Mat) -> Result<IsometryInverse> {
    let err = isometry_error(v);
    if err > EQUALITY_TOL {
        return Err(Error::NotIsometry(err));
    }
    if tau.nrows() != v.ncols() || !tau.is_square() {
        return dim_err("fixed state must live on the isometry's input");
    }
    Ok(IsometryInverse { v: v.clone(), tau: tau.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_choi_is_phi_plus() {
        let id = choi_of_channel(&[eye(2)], SystemPair::new(2, 2)).unwrap();
        assert_eq!(id.matrix(), &phi_plus(2));
    }

    #[test]
    fn amplitude_damping_to_ground() {
        let k0 = unit(2, 0, 0);
        let k1 = unit(2, 0, 1);
        let j = choi_of_channel(&[k0, k1], SystemPair::new(2, 2)).unwrap();
        assert!(max_abs_diff(j.matrix(), &kron(&eye(2), &unit(2, 0, 0))) < 1e-15);
    }

    #[test]
    fn non_trace_preserving_kraus_rejected() {
        let k = unit(2, 0, 0);
        assert!(matches!(choi_of_channel(&[k], SystemPair::new(2, 2)), Err(Error::NotTracePreserving(_))));
    }

    #[test]
    fn depolarizing_choi() {
        let d = ChannelChoi::depolarizing(2, 2);
        assert!(max_abs_diff(d.matrix(), &(eye(4) * c(0.5))) < 1e-15);
        assert!(validate_channel(&d).valid);
    }

    #[test]
    fn purify_rank_two_state() {
        let mut rho = zeros(3, 3);
        rho[(0, 0)] = c(0.5);
        rho[(1, 1)] = c(0.5);
        let p = purify(&rho).unwrap();
        assert_eq!(p.env_dim, 2);
        let back = tensor::partial_trace(&p.projector(), &[3, 2], &[0]).unwrap();
        assert!(max_abs_diff(&back, &rho) < 1e-12);
    }

    #[test]
    fn random_channels_are_valid_and_reproducible() {
        let sys = SystemPair::new(2, 3);
        let a = random_channel(sys, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = random_channel(sys, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(validate_channel(&a).valid);
    }

    #[test]
    fn kraus_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = random_channel(SystemPair::new(3, 2), 3, &mut rng).unwrap();
        let ks = kraus_from_choi(n.matrix(), 3, 2);
        let back = choi_of_channel(&ks, n.sys).unwrap();
        assert!(max_abs_diff(back.matrix(), n.matrix()) < 1e-12);
    }

    #[test]
    fn isometry_inverse_undoes_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_isometry(4, 2, &mut rng);
        let rho = random_density(2, 2, &mut rng);
        let tau = eye(2) * c(0.5);
        let inv = isometry_left_inverse(&v, &tau).unwrap();
        let out = inv.apply(&(&v * &rho * v.adjoint()));
        assert!(max_abs_diff(&out, &rho) < 1e-12);
        assert!(validate_channel(&inv.choi().unwrap()).valid);
    }

    #[test]
    fn composition_and_tensor_are_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = random_channel(SystemPair::new(2, 3), 2, &mut rng).unwrap();
        let m = random_channel(SystemPair::new(3, 2), 2, &mut rng).unwrap();
        assert!(validate_channel(&compose(&m, &n).unwrap()).valid);
        assert!(validate_channel(&tensor_channels(&n, &m).unwrap()).valid);
        let rho = random_density(2, 1, &mut rng);
        let lhs = apply_channel(&compose(&m, &n).unwrap(), &rho).unwrap();
        let rhs = apply_channel(&m, &apply_channel(&n, &rho).unwrap()).unwrap();
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }
}
