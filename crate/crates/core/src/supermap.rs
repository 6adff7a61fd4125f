//! Superchannels: Choi matrices, validation, realizations and
//! superinstruments.
//!
//! A superchannel `Θ: (A₀ → A₁) → (B₀ → B₁)` is stored as the Choi matrix `J`
//! on `A₀ ⊗ A₁ ⊗ B₀ ⊗ B₁` of its linear map `Q: A₁B₀ → A₀B₁`. It is valid when
//! `J ⪰ 0`, `J_{A₁B₀} = I` and `J_{AB₀} = J_{A₀B₀} ⊗ u_{A₁}` where `u = I/d`.
//! Its action is `J^{Θ[N]} = tr_A[J ((J^N)ᵀ ⊗ I_B)]`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::choi::*;
use crate::error::{dim_err, Error, Result};
use crate::linalg::*;
use crate::tensor;

/// Choi matrix of a supermap, layout `[A₀, A₁, B₀, B₁]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperChoi {
    pub sys_a: SystemPair,
    pub sys_b: SystemPair,
    pub choi: HermitianMatrix,
}

impl SuperChoi {
    /// Wraps a Hermitian matrix; no validity check.
    pub fn new(sys_a: SystemPair, sys_b: SystemPair, mat: Mat) -> Result<Self> {
        let dims = vec![sys_a.in_dim, sys_a.out_dim, sys_b.in_dim, sys_b.out_dim];
        Ok(Self { sys_a, sys_b, choi: HermitianMatrix::new(dims, mat)? })
    }

    /// Wraps and rejects anything that is not a superchannel.
    pub fn checked(sys_a: SystemPair, sys_b: SystemPair, mat: Mat) -> Result<Self> {
        let s = Self::new(sys_a, sys_b, mat)?;
        let rep = validate_superchannel(&s);
        if !rep.valid {
            return Err(Error::InvalidSuperchannel(rep.notes.join("; ")));
        }
        Ok(s)
    }

    pub fn matrix(&self) -> &Mat {
        self.choi.matrix()
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.sys_a.in_dim, self.sys_a.out_dim, self.sys_b.in_dim, self.sys_b.out_dim]
    }

    /// `|A₁| |B₀|`, the trace of every superchannel Choi matrix.
    pub fn normalization(&self) -> f64 {
        (self.sys_a.out_dim * self.sys_b.in_dim) as f64
    }

    /// The identity supermap `N ↦ N`.
    pub fn identity(sys: SystemPair) -> Self {
        let (a0, a1) = (sys.in_dim, sys.out_dim);
        let j = kron(&phi_plus(a0), &phi_plus(a1));
        let j = tensor::permute(&j, &[a0, a0, a1, a1], &[0, 2, 1, 3]).expect("layout");
        Self::new(sys, sys, j).expect("identity")
    }

    /// The constant supermap `N ↦ M`.
    pub fn replacement(sys_a: SystemPair, m: &ChannelChoi) -> Self {
        let j = kron(&eye(sys_a.choi_dim()), m.matrix()) / c(sys_a.in_dim as f64);
        Self::new(sys_a, m.sys, j).expect("replacement")
    }
}

/// Verdict with the marginal defects of a candidate superchannel.
pub fn validate_superchannel(theta: &SuperChoi) -> ValidationReport {
    let j = theta.matrix();
    let dims = theta.dims();
    let me = min_eig(j);
    let mut notes = Vec::new();
    let marg = superchannel_marginal_error(j, &dims).unwrap_or(f64::INFINITY);
    if me < PSD_FLOOR {
        notes.push(alloc::format!("not positive semidefinite: min eigenvalue {me:.3e}"));
    }
    if marg > EQUALITY_TOL {
        notes.push(alloc::format!("marginal conditions violated by {marg:.3e}"));
    }
    ValidationReport { valid: notes.is_empty(), min_eig: me, marginal_error: marg, notes }
}

fn superchannel_marginal_error(j: &Mat, dims: &[usize; 4]) -> Result<f64> {
    let a1b0 = tensor::partial_trace(j, dims, &[1, 2])?;
    let e1 = max_abs_diff(&a1b0, &eye(dims[1] * dims[2]));
    let ab0 = tensor::partial_trace(j, dims, &[0, 1, 2])?;
    let a0b0 = tensor::partial_trace(j, dims, &[0, 2])?;
    let rhs = tensor::embed(&a0b0, &dims[..3], &[0, 2])? / c(dims[1] as f64);
    Ok(e1.max(max_abs_diff(&ab0, &rhs)))
}

/// `Θ[N]`.
pub fn apply_superchannel(theta: &SuperChoi, n: &ChannelChoi) -> Result<ChannelChoi> {
    if n.sys != theta.sys_a {
        return dim_err("channel does not match the superchannel input");
    }
    let out = tensor::link_trace(theta.matrix(), &n.matrix().transpose())?;
    ChannelChoi::new(theta.sys_b, herm_part(&out))
}

/// Applies the induced map `R` to an arbitrary operator on `A₀A₁`.
pub fn apply_r(theta: &SuperChoi, x: &Mat) -> Result<Mat> {
    apply_choi(theta.matrix(), theta.sys_a.choi_dim(), x)
}

/// Which equivalent linear map a matrix describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rep {
    /// `A₀B₀ → A₁B₁`, layout `[A₀, B₀, A₁, B₁]`.
    P,
    /// `A₁B₀ → A₀B₁`, layout `[A₁, B₀, A₀, B₁]`.
    Q,
    /// `A₀A₁ → B₀B₁`, layout `[A₀A₁, B₀B₁]` (same matrix as `J`).
    R,
}

impl Rep {
    fn perm(self) -> [usize; 4] {
        match self {
            Rep::P => [0, 2, 1, 3],
            Rep::Q => [1, 2, 0, 3],
            Rep::R => [0, 1, 2, 3],
        }
    }
}

/// A superchannel in one of its three map representations.
#[derive(Debug, Clone, PartialEq)]
pub struct RepMatrix {
    pub rep: Rep,
    pub sys_a: SystemPair,
    pub sys_b: SystemPair,
    pub matrix: HermitianMatrix,
}

/// Reorders `J` into the requested representation (a pure permutation).
pub fn rep_convert(theta: &SuperChoi, rep: Rep) -> Result<RepMatrix> {
    let d = theta.dims();
    let p = rep.perm();
    let m = tensor::permute(theta.matrix(), &d, &p)?;
    let dims = match rep {
        Rep::R => vec![d[0] * d[1], d[2] * d[3]],
        _ => tensor::permuted_dims(&d, &p),
    };
    Ok(RepMatrix { rep, sys_a: theta.sys_a, sys_b: theta.sys_b, matrix: HermitianMatrix::new(dims, m)? })
}

/// Inverse of [`rep_convert`].
pub fn rep_to_superchoi(r: &RepMatrix) -> Result<SuperChoi> {
    let d = [r.sys_a.in_dim, r.sys_a.out_dim, r.sys_b.in_dim, r.sys_b.out_dim];
    let p = r.rep.perm();
    let pd = tensor::permuted_dims(&d, &p);
    let m = tensor::permute(r.matrix.matrix(), &pd, &tensor::inverse_perm(&p))?;
    SuperChoi::new(r.sys_a, r.sys_b, m)
}

/// Pre-processing isometry `V: B₀ → E ⊗ A₀` and post-processing channel
/// `E ⊗ A₁ → B₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub sys_a: SystemPair,
    pub sys_b: SystemPair,
    pub env_dim: usize,
    /// `(env_dim · |A₀|) × |B₀|`.
    pub isometry: Mat,
    pub post: ChannelChoi,
}

impl Realization {
    /// Choi matrix of the pre-processing channel `B₀ → E A₀`.
    pub fn pre(&self) -> ChannelChoi {
        ChannelChoi::unitary(&self.isometry).expect("isometry channel")
    }

    /// `E ∘ (N ⊗ id_E) ∘ F`, evaluated directly on operators.
    pub fn apply(&self, n: &ChannelChoi) -> Result<ChannelChoi> {
        let (a0, a1) = (self.sys_a.in_dim, self.sys_a.out_dim);
        let e = self.env_dim;
        let v = &self.isometry;
        let j = choi_of_map(self.sys_b.in_dim, self.sys_b.out_dim, |x| {
            let y = v * x * v.adjoint(); // on E ⊗ A₀
            let y = apply_on_last(n.matrix(), a0, a1, &y, e)?; // on E ⊗ A₁
            apply_choi(self.post.matrix(), e * a1, &y)
        })?;
        ChannelChoi::new(self.sys_b, j)
    }
}

/// `(id_{first} ⊗ N)(Y)` for `Y` on `first ⊗ in`.
pub fn apply_on_last(jn: &Mat, din: usize, dout: usize, y: &Mat, first: usize) -> Result<Mat> {
    if y.nrows() != first * din {
        return dim_err("operator does not factor as first ⊗ input");
    }
    let mut out = zeros(first * dout, first * dout);
    for i in 0..first {
        for k in 0..first {
            let blk = y.view((i * din, k * din), (din, din)).into_owned();
            let img = apply_choi(jn, din, &blk)?;
            out.view_mut((i * dout, k * dout), (dout, dout)).copy_from(&img);
        }
    }
    Ok(out)
}

/// `(N ⊗ id_{last})(Y)` for `Y` on `in ⊗ last`.
pub fn apply_on_first(jn: &Mat, din: usize, dout: usize, y: &Mat, last: usize) -> Result<Mat> {
    let sw = tensor::permute(y, &[din, last], &[1, 0])?;
    let r = apply_on_last(jn, din, dout, &sw, last)?;
    tensor::permute(&r, &[last, dout], &[1, 0])
}

/// Choi matrix of the superchannel with the given realization.
pub fn superchoi_from_realization(r: &Realization) -> Result<SuperChoi> {
    let (a0, a1) = (r.sys_a.in_dim, r.sys_a.out_dim);
    let (b0, b1) = (r.sys_b.in_dim, r.sys_b.out_dim);
    let e = r.env_dim;
    if r.isometry.nrows() != e * a0 || r.isometry.ncols() != b0 {
        return dim_err("isometry must map B₀ to E ⊗ A₀");
    }
    let iso_err = isometry_error(&r.isometry);
    if iso_err > EQUALITY_TOL {
        return Err(Error::NotIsometry(iso_err));
    }
    if r.post.sys != SystemPair::new(e * a1, b1) {
        return dim_err("post-processing must map E ⊗ A₁ to B₁");
    }
    let v_ext = kron(&r.isometry, &eye(a1)); // B₀A₁ → E A₀ A₁
                                             // Q: A₁B₀ → A₀B₁
    let jq = choi_of_map(a1 * b0, a0 * b1, |x| {
        let x = tensor::permute(x, &[a1, b0], &[1, 0])?;
        let y = &v_ext * x * v_ext.adjoint();
        let y = tensor::permute(&y, &[e, a0, a1], &[1, 0, 2])?;
        apply_on_last(r.post.matrix(), e * a1, b1, &y, a0)
    })?;
    let j = tensor::permute(&jq, &[a1, b0, a0, b1], &[2, 0, 1, 3])?;
    SuperChoi::new(r.sys_a, r.sys_b, herm_part(&j))
}

/// Minimal realization with `env_dim = rank(J_{A₀B₀})`.
///
/// The post-processing is the least-squares solution of the Choi
/// identity, obtained with the pseudo-inverse of the purification, then
/// projected onto the trace-preserving subspace.
pub fn realize(theta: &SuperChoi) -> Result<Realization> {
    let rep = validate_superchannel(theta);
    if !rep.valid {
        return Err(Error::InvalidSuperchannel(rep.notes.join("; ")));
    }
    let [a0, a1, b0, b1] = theta.dims();
    let j = theta.matrix();
    let rho = tensor::partial_trace(j, &[a0, a1, b0, b1], &[0, 2])? / c(a1 as f64);
    let (vals, vecs) = eigh(&rho);
    let top = vals.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > RANK_REL_TOL * top).collect();
    let e = keep.len();
    let mut v = zeros(e * a0, b0);
    let mut w = zeros(e, a0 * b0);
    for (k, &idx) in keep.iter().enumerate() {
        let s = libm::sqrt(vals[idx]);
        for x in 0..a0 {
            for b in 0..b0 {
                v[(k * a0 + x, b)] = vecs[(x * b0 + b, idx)] * c(s);
            }
        }
        for i in 0..a0 * b0 {
            w[(k, i)] = vecs[(i, idx)].conj() / c(s);
        }
    }
    let jp = tensor::permute(j, &[a0, a1, b0, b1], &[0, 2, 1, 3])?;
    let wl = kron(&w, &eye(a1 * b1));
    let mut je = herm_part(&(&wl * jp * wl.adjoint()));
    let marg = tensor::partial_trace(&je, &[e * a1, b1], &[0])?;
    je += kron(&(eye(e * a1) - marg), &eye(b1)) / c(b1 as f64);
    let post = ChannelChoi::new(SystemPair::new(e * a1, b1), herm_part(&je))?;
    let out = Realization { sys_a: theta.sys_a, sys_b: theta.sys_b, env_dim: e, isometry: v, post };
    let back = superchoi_from_realization(&out)?;
    let res = max_abs_diff(back.matrix(), j);
    if res > 1e-7 {
        return Err(Error::Realization(res));
    }
    Ok(out)
}

/// Unitary relating two realizations of one superchannel.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// `U` with `V₂ = (U ⊗ I) V₁`, phase-fixed so that its largest-magnitude
    /// entry is real and positive.
    pub unitary: Mat,
    /// Largest entrywise mismatch after alignment (pre and post).
    pub residual: f64,
}

/// Finds `U` on `E` with `F₂ = (U ⊗ id)∘F₁` and `E₂ = E₁∘(U† ⊗ id)`.
pub fn align_realizations(r1: &Realization, r2: &Realization) -> Result<Alignment> {
    if r1.sys_a != r2.sys_a || r1.sys_b != r2.sys_b || r1.env_dim != r2.env_dim {
        return Err(Error::NotAligned(f64::INFINITY));
    }
    let (e, a0, b0, a1) = (r1.env_dim, r1.sys_a.in_dim, r1.sys_b.in_dim, r1.sys_a.out_dim);
    let as_mat = |v: &Mat| Mat::from_fn(e, a0 * b0, |k, i| v[(k * a0 + i / b0, i % b0)]);
    let (p1, p2) = (as_mat(&r1.isometry), as_mat(&r2.isometry));
    let u = polar_unitary(&(&p2 * p1.adjoint()));
    let pre_res = max_abs_diff(&(kron(&u, &eye(a0)) * &r1.isometry), &r2.isometry);
    // E₁ ∘ Ad_{W} with W = U† ⊗ I has Choi (Wᵀ ⊗ I) J (W̄ ⊗ I).
    let wt = kron(&u.adjoint().transpose(), &eye(a1));
    let l = kron(&wt, &eye(r1.post.sys.out_dim));
    let rotated = &l * r1.post.matrix() * l.adjoint();
    let post_res = max_abs_diff(&rotated, r2.post.matrix());
    let residual = pre_res.max(post_res);
    if residual > 1e-6 {
        return Err(Error::NotAligned(residual));
    }
    Ok(Alignment { unitary: fix_phase(&u), residual })
}

/// Multiplies by the phase making the largest-magnitude entry real positive.
pub fn fix_phase(u: &Mat) -> Mat {
    let mut best = ZERO;
    for z in u.iter() {
        if z.norm() > best.norm() + 1e-12 {
            best = *z;
        }
    }
    if best.norm() == 0.0 {
        return u.clone();
    }
    u * (best.conj() / c(best.norm()))
}

/// Random superchannel from a Haar isometry `B₀ → E A₀` and a random
/// post-processing channel.
pub fn random_superchannel<R: Rng + ?Sized>(
    sys_a: SystemPair,
    sys_b: SystemPair,
    env_dim: usize,
    rng: &mut R,
) -> Result<SuperChoi> {
    superchoi_from_realization(&random_realization(sys_a, sys_b, env_dim, rng)?)
}

/// Random realization; `env_dim · |A₀| ≥ |B₀|` is required.
pub fn random_realization<R: Rng + ?Sized>(
    sys_a: SystemPair,
    sys_b: SystemPair,
    env_dim: usize,
    rng: &mut R,
) -> Result<Realization> {
    let (a0, a1, b0, b1) = (sys_a.in_dim, sys_a.out_dim, sys_b.in_dim, sys_b.out_dim);
    if env_dim == 0 || env_dim * a0 < b0 {
        return Err(Error::Argument("environment too small for an isometry B₀ → E A₀".to_string()));
    }
    let isometry = random_isometry(env_dim * a0, b0, rng);
    let post_env = (env_dim * a1).div_ceil(b1).max(2);
    let post = random_channel(SystemPair::new(env_dim * a1, b1), post_env, rng)?;
    Ok(Realization { sys_a, sys_b, env_dim, isometry, post })
}

/// `Θ₂ ∘ Θ₁`.
pub fn compose_superchannels(t2: &SuperChoi, t1: &SuperChoi) -> Result<SuperChoi> {
    if t1.sys_b != t2.sys_a {
        return dim_err("composed superchannels have mismatched systems");
    }
    let j = choi_of_map(t1.sys_a.choi_dim(), t2.sys_b.choi_dim(), |x| apply_r(t2, &apply_r(t1, x)?))?;
    SuperChoi::new(t1.sys_a, t2.sys_b, herm_part(&j))
}

/// `Θ₁ ⊗ Θ₂` acting on `N₁ ⊗ N₂`.
pub fn tensor_superchannels(t1: &SuperChoi, t2: &SuperChoi) -> Result<SuperChoi> {
    let big = kron(t1.matrix(), t2.matrix());
    let mut dims = t1.dims().to_vec();
    dims.extend_from_slice(&t2.dims());
    let j = tensor::permute(&big, &dims, &[0, 4, 1, 5, 2, 6, 3, 7])?;
    let prod = |p: SystemPair, q: SystemPair| SystemPair::new(p.in_dim * q.in_dim, p.out_dim * q.out_dim);
    SuperChoi::new(prod(t1.sys_a, t2.sys_a), prod(t1.sys_b, t2.sys_b), j)
}

/// Collection `{Θ_x}` of CP supermaps whose sum is a superchannel.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperInstrument {
    pub elements: Vec<SuperChoi>,
}

impl SuperInstrument {
    pub fn validate(&self) -> ValidationReport {
        let Some(first) = self.elements.first() else {
            return ValidationReport {
                valid: false,
                min_eig: 0.0,
                marginal_error: f64::INFINITY,
                notes: vec!["empty superinstrument".to_string()],
            };
        };
        let mut sum = zeros(first.matrix().nrows(), first.matrix().ncols());
        let mut me = f64::INFINITY;
        let mut notes = Vec::new();
        for (x, el) in self.elements.iter().enumerate() {
            if el.sys_a != first.sys_a || el.sys_b != first.sys_b {
                notes.push(alloc::format!("element {x} has different systems"));
                continue;
            }
            let m = min_eig(el.matrix());
            me = me.min(m);
            if m < PSD_FLOOR {
                notes.push(alloc::format!("element {x} is not PSD (min eigenvalue {m:.3e})"));
            }
            sum += el.matrix();
        }
        let total = SuperChoi::new(first.sys_a, first.sys_b, sum);
        let marg = match &total {
            Ok(t) => {
                let r = validate_superchannel(t);
                if r.marginal_error > EQUALITY_TOL {
                    notes.push(alloc::format!("sum violates marginals by {:.3e}", r.marginal_error));
                }
                r.marginal_error
            }
            Err(_) => f64::INFINITY,
        };
        ValidationReport { valid: notes.is_empty(), min_eig: me, marginal_error: marg, notes }
    }

    /// Superchannel `Σ_x Θ_x ⊗ |x⟩⟨x|` writing the outcome into a classical
    /// register appended to `B₁` (trivial `X₀`).
    pub fn to_superchannel(&self) -> Result<SuperChoi> {
        let first = self.elements.first().ok_or_else(|| Error::Argument("empty superinstrument".to_string()))?;
        let nx = self.elements.len();
        let n = first.matrix().nrows();
        let mut j = zeros(n * nx, n * nx);
        for (x, el) in self.elements.iter().enumerate() {
            j += kron(el.matrix(), &unit(nx, x, x));
        }
        SuperChoi::new(first.sys_a, SystemPair::new(first.sys_b.in_dim, first.sys_b.out_dim * nx), j)
    }

    /// Inverse of [`SuperInstrument::to_superchannel`]: reads the diagonal
    /// blocks of the classical register.
    pub fn from_superchannel(theta: &SuperChoi, outcomes: usize) -> Result<Self> {
        let b1 = theta.sys_b.out_dim;
        if outcomes == 0 || b1 % outcomes != 0 {
            return dim_err("register size does not divide B₁");
        }
        let sys_b = SystemPair::new(theta.sys_b.in_dim, b1 / outcomes);
        let n = theta.matrix().nrows() / outcomes;
        let elements = (0..outcomes)
            .map(|x| {
                let m = Mat::from_fn(n, n, |i, k| theta.matrix()[(i * outcomes + x, k * outcomes + x)]);
                SuperChoi::new(theta.sys_a, sys_b, m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { elements })
    }

    /// The subnormalized outputs `Θ_x[N]`.
    pub fn apply(&self, n: &ChannelChoi) -> Result<Vec<Mat>> {
        self.elements.iter().map(|el| tensor::link_trace(el.matrix(), &n.matrix().transpose())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(s: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(s)
    }

    #[test]
    fn identity_supermap_is_valid_and_acts_trivially() {
        let sys = SystemPair::new(2, 2);
        let id = SuperChoi::identity(sys);
        assert!(validate_superchannel(&id).valid);
        let n = random_channel(sys, 2, &mut rng(1)).unwrap();
        let out = apply_superchannel(&id, &n).unwrap();
        assert!(max_abs_diff(out.matrix(), n.matrix()) < 1e-12);
    }

    #[test]
    fn replacement_supermap_outputs_constant() {
        let sys = SystemPair::new(2, 3);
        let m = random_channel(SystemPair::new(2, 2), 2, &mut rng(2)).unwrap();
        let t = SuperChoi::replacement(sys, &m);
        assert!(validate_superchannel(&t).valid);
        let n = random_channel(sys, 2, &mut rng(3)).unwrap();
        assert!(max_abs_diff(apply_superchannel(&t, &n).unwrap().matrix(), m.matrix()) < 1e-12);
    }

    #[test]
    fn bad_marginal_is_reported() {
        let t = SuperChoi::identity(SystemPair::new(2, 2));
        let mut m = t.matrix().clone();
        m[(0, 0)] += c(0.1);
        let bad = SuperChoi::new(t.sys_a, t.sys_b, m).unwrap();
        let r = validate_superchannel(&bad);
        assert!(!r.valid);
        assert!(r.marginal_error > 0.05);
    }

    #[test]
    fn choi_action_matches_realization_action() {
        let (sa, sb) = (SystemPair::new(2, 3), SystemPair::new(3, 2));
        let r = random_realization(sa, sb, 2, &mut rng(4)).unwrap();
        let t = superchoi_from_realization(&r).unwrap();
        assert!(validate_superchannel(&t).valid);
        let n = random_channel(sa, 2, &mut rng(5)).unwrap();
        let lhs = apply_superchannel(&t, &n).unwrap();
        let rhs = r.apply(&n).unwrap();
        assert!(max_abs_diff(lhs.matrix(), rhs.matrix()) < 1e-12);
    }

    #[test]
    fn representations_roundtrip_exactly() {
        let t = random_superchannel(SystemPair::new(2, 2), SystemPair::new(2, 3), 2, &mut rng(6)).unwrap();
        for rep in [Rep::P, Rep::Q, Rep::R] {
            let r = rep_convert(&t, rep).unwrap();
            assert_eq!(rep_to_superchoi(&r).unwrap(), t);
        }
    }

    #[test]
    fn realize_recomposes_with_minimal_environment() {
        let t = random_superchannel(SystemPair::new(2, 2), SystemPair::new(2, 2), 2, &mut rng(7)).unwrap();
        let r = realize(&t).unwrap();
        let back = superchoi_from_realization(&r).unwrap();
        assert!(max_abs_diff(back.matrix(), t.matrix()) < 1e-9);
        let rho = t.choi.partial_trace(&[0, 2]).unwrap();
        let rank = eigvalsh(rho.matrix()).iter().filter(|v| **v > 1e-9 * 4.0).count();
        assert_eq!(r.env_dim, rank);
    }

    #[test]
    fn identity_supermap_needs_one_dimensional_memory_per_phi() {
        let t = SuperChoi::identity(SystemPair::new(2, 2));
        let r = realize(&t).unwrap();
        assert_eq!(r.env_dim, 1);
    }

    #[test]
    fn alignment_recovers_rotation() {
        let t = random_superchannel(SystemPair::new(2, 2), SystemPair::new(2, 2), 2, &mut rng(8)).unwrap();
        let r1 = realize(&t).unwrap();
        let w = random_unitary(r1.env_dim, &mut rng(9));
        let a1 = r1.sys_a.out_dim;
        let isometry = kron(&w, &eye(r1.sys_a.in_dim)) * &r1.isometry;
        let l = kron(&kron(&w.adjoint().transpose(), &eye(a1)), &eye(r1.sys_b.out_dim));
        let post = ChannelChoi::new(r1.post.sys, &l * r1.post.matrix() * l.adjoint()).unwrap();
        let r2 = Realization { isometry, post, ..r1.clone() };
        let al = align_realizations(&r1, &r2).unwrap();
        let overlap = (al.unitary.adjoint() * &w).trace().norm() / r1.env_dim as f64;
        assert!(overlap > 1.0 - 1e-9);
    }

    #[test]
    fn different_superchannels_do_not_align() {
        let (sa, sb) = (SystemPair::new(2, 2), SystemPair::new(2, 2));
        let r1 = realize(&random_superchannel(sa, sb, 2, &mut rng(10)).unwrap()).unwrap();
        let r2 = realize(&random_superchannel(sa, sb, 2, &mut rng(11)).unwrap()).unwrap();
        assert!(align_realizations(&r1, &r2).is_err());
    }

    #[test]
    fn superinstrument_flag_encoding() {
        let (sa, sb) = (SystemPair::new(2, 2), SystemPair::new(2, 2));
        let t = random_superchannel(sa, sb, 2, &mut rng(12)).unwrap();
        let parts = SuperInstrument {
            elements: vec![
                SuperChoi::new(sa, sb, t.matrix() * c(0.3)).unwrap(),
                SuperChoi::new(sa, sb, t.matrix() * c(0.7)).unwrap(),
            ],
        };
        assert!(parts.validate().valid);
        let flagged = parts.to_superchannel().unwrap();
        assert!(validate_superchannel(&flagged).valid);
        let back = SuperInstrument::from_superchannel(&flagged, 2).unwrap();
        assert_eq!(back, parts);
        let n = random_channel(sa, 2, &mut rng(13)).unwrap();
        let out = apply_superchannel(&flagged, &n).unwrap();
        let traced = tensor::partial_trace(out.matrix(), &[2, 2, 2], &[0, 1]).unwrap();
        let sum: Mat = parts.apply(&n).unwrap().iter().fold(zeros(4, 4), |a, b| a + b);
        assert!(max_abs_diff(&traced, &sum) < 1e-12);
    }

    #[test]
    fn composition_of_superchannels() {
        let s = SystemPair::new(2, 2);
        let t1 = random_superchannel(s, s, 2, &mut rng(14)).unwrap();
        let t2 = random_superchannel(s, s, 2, &mut rng(15)).unwrap();
        let t = compose_superchannels(&t2, &t1).unwrap();
        assert!(validate_superchannel(&t).valid);
        let n = random_channel(s, 2, &mut rng(16)).unwrap();
        let lhs = apply_superchannel(&t, &n).unwrap();
        let rhs = apply_superchannel(&t2, &apply_superchannel(&t1, &n).unwrap()).unwrap();
        assert!(max_abs_diff(lhs.matrix(), rhs.matrix()) < 1e-12);
        let tt = tensor_superchannels(&t1, &t2).unwrap();
        assert!(validate_superchannel(&tt).valid);
    }
}
