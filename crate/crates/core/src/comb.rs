//! Quantum combs with one or two slots.
//!
//! The Choi matrix of a comb with slots `(A₀ᵏ → A₁ᵏ)` and global
//! input/output `B₀ → B₁` has layout `[B₀, A₀¹, A₁¹, …, A₀ⁿ, A₁ⁿ, B₁]`.
//! Slot channels are contracted with the same link product as a
//! superchannel, one slot at a time.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::choi::*;
use crate::error::{dim_err, Error, Result};
use crate::linalg::*;
use crate::supermap::{apply_on_last, SuperChoi};
use crate::tensor;

/// Largest number of slots with implemented causality constraints.
pub const MAX_SLOTS: usize = 2;

/// Choi matrix of a comb.
#[derive(Debug, Clone, PartialEq)]
pub struct CombChoi {
    pub io: SystemPair,
    pub teeth: Vec<SystemPair>,
    pub choi: HermitianMatrix,
}

/// Subsystem layout `[B₀, A₀¹, A₁¹, …, B₁]`.
pub fn comb_dims(io: SystemPair, teeth: &[SystemPair]) -> Vec<usize> {
    let mut d = vec![io.in_dim];
    for t in teeth {
        d.push(t.in_dim);
        d.push(t.out_dim);
    }
    d.push(io.out_dim);
    d
}

pub(crate) fn check_slots(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SLOTS {
        return Err(Error::UnsupportedSlots(n));
    }
    Ok(())
}

impl CombChoi {
    pub fn new(io: SystemPair, teeth: Vec<SystemPair>, mat: Mat) -> Result<Self> {
        let dims = comb_dims(io, &teeth);
        Ok(Self { io, teeth, choi: HermitianMatrix::new(dims, mat)? })
    }

    pub fn matrix(&self) -> &Mat {
        self.choi.matrix()
    }

    pub fn dims(&self) -> Vec<usize> {
        comb_dims(self.io, &self.teeth)
    }

    /// `|B₀| Π_k |A₁ᵏ|`, the trace of every valid comb.
    pub fn normalization(&self) -> f64 {
        (self.io.in_dim * self.teeth.iter().map(|t| t.out_dim).product::<usize>()) as f64
    }

    /// One-slot comb from a superchannel (subsystem reorder only).
    pub fn from_superchoi(t: &SuperChoi) -> Result<Self> {
        let m = tensor::permute(t.matrix(), &t.dims(), &[2, 0, 1, 3])?;
        Self::new(t.sys_b, vec![t.sys_a], m)
    }

    /// Inverse of [`CombChoi::from_superchoi`].
    pub fn to_superchoi(&self) -> Result<SuperChoi> {
        if self.teeth.len() != 1 {
            return Err(Error::InvalidComb("only one-slot combs are superchannels".into()));
        }
        let m = tensor::permute(self.matrix(), &self.dims(), &[1, 2, 0, 3])?;
        SuperChoi::new(self.teeth[0], self.io, m)
    }
}

/// Marginal equalities defining a comb, as pairs `(keep, slot)`: the
/// marginal on `keep` must factor as `(·) ⊗ u` on the slot output `A₁^slot`.
pub(crate) fn causal_marginals(n: usize) -> Vec<(Vec<usize>, usize)> {
    (1..=n)
        .rev()
        .map(|k| {
            let keep: Vec<usize> = (0..=2 * k).collect();
            (keep, 2 * k)
        })
        .collect()
}

/// Subsystems whose marginal must be proportional to the identity: `B₀`
/// and every slot output.
pub(crate) fn input_like(n: usize) -> Vec<usize> {
    let mut v = vec![0];
    v.extend((1..=n).map(|k| 2 * k));
    v
}

/// Verdict for a candidate comb (`n ≤ 2`).
pub fn validate_comb(comb: &CombChoi) -> Result<ValidationReport> {
    let n = comb.teeth.len();
    check_slots(n)?;
    let dims = comb.dims();
    let j = comb.matrix();
    let me = min_eig(j);
    let ins = input_like(n);
    let din: usize = ins.iter().map(|&i| dims[i]).product();
    let mut err = max_abs_diff(&tensor::partial_trace(j, &dims, &ins)?, &eye(din));
    for (keep, slot) in causal_marginals(n) {
        let sub_dims: Vec<usize> = keep.iter().map(|&i| dims[i]).collect();
        let marg = tensor::partial_trace(j, &dims, &keep)?;
        let rest: Vec<usize> = (0..keep.len()).filter(|&i| i != slot).collect();
        let reduced = tensor::partial_trace(&marg, &sub_dims, &rest)?;
        let rhs = tensor::embed(&reduced, &sub_dims, &rest)? / c(dims[slot] as f64);
        err = err.max(max_abs_diff(&marg, &rhs));
    }
    let mut notes = Vec::new();
    if me < PSD_FLOOR {
        notes.push(alloc::format!("not positive semidefinite: min eigenvalue {me:.3e}"));
    }
    if err > EQUALITY_TOL {
        notes.push(alloc::format!("causal marginals violated by {err:.3e}"));
    }
    Ok(ValidationReport { valid: notes.is_empty(), min_eig: me, marginal_error: err, notes })
}

/// Labels used while wiring a comb out of channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Wire {
    B0,
    In(usize),
    Out(usize),
    Mem(usize),
    B1,
}

/// Comb from a chain of `n + 1` channels with memory:
/// `E₁: B₀ → A₀¹ M₁`, `E_k: A₁^{k-1} M_{k-1} → A₀^k M_k`, `E_{n+1}: A₁ⁿ Mₙ → B₁`.
/// Memory dimensions are read off the channel dimensions.
pub fn comb_from_channels(io: SystemPair, teeth: &[SystemPair], chain: &[ChannelChoi]) -> Result<CombChoi> {
    let n = teeth.len();
    check_slots(n)?;
    if chain.len() != n + 1 {
        return dim_err("a comb with n slots needs n + 1 channels");
    }
    let mut mem = vec![1usize; n + 1];
    for k in 0..n {
        let ch = &chain[k];
        let expected_in = if k == 0 { io.in_dim } else { teeth[k - 1].out_dim * mem[k] };
        if ch.sys.in_dim != expected_in || ch.sys.out_dim % teeth[k].in_dim != 0 {
            return dim_err(alloc::format!("channel {k} does not fit the comb wiring"));
        }
        mem[k + 1] = ch.sys.out_dim / teeth[k].in_dim;
    }
    let last = &chain[n];
    if last.sys != SystemPair::new(teeth[n - 1].out_dim * mem[n], io.out_dim) {
        return dim_err("final channel does not fit the comb wiring");
    }
    let dim_of = |w: Wire| match w {
        Wire::B0 => io.in_dim,
        Wire::In(k) => teeth[k].in_dim,
        Wire::Out(k) => teeth[k].out_dim,
        Wire::Mem(k) => mem[k],
        Wire::B1 => io.out_dim,
    };
    let mut inputs = vec![Wire::B0];
    inputs.extend((0..n).map(Wire::Out));
    let in_dim: usize = inputs.iter().map(|&w| dim_of(w)).product();
    let mut outputs: Vec<Wire> = (0..n).map(Wire::In).collect();
    outputs.push(Wire::B1);
    let out_dim: usize = outputs.iter().map(|&w| dim_of(w)).product();

    let jq = choi_of_map(in_dim, out_dim, |x| {
        let mut y = x.clone();
        let mut labels = inputs.clone();
        for (k, ch) in chain.iter().enumerate() {
            let targets: Vec<Wire> = if k == 0 { vec![Wire::B0] } else { vec![Wire::Out(k - 1), Wire::Mem(k)] };
            let produced: Vec<Wire> = if k == n { vec![Wire::B1] } else { vec![Wire::In(k), Wire::Mem(k + 1)] };
            (y, labels) = apply_wired(&y, &labels, &targets, &produced, ch, &dim_of)?;
        }
        let dims: Vec<usize> = labels.iter().map(|&w| dim_of(w)).collect();
        let perm: Vec<usize> = outputs.iter().map(|w| labels.iter().position(|l| l == w).expect("wire")).collect();
        tensor::permute(&y, &dims, &perm)
    })?;
    // [B₀, A₁¹..A₁ⁿ, A₀¹..A₀ⁿ, B₁] → [B₀, A₀¹, A₁¹, …, B₁]
    let mut q_dims: Vec<usize> = inputs.iter().map(|&w| dim_of(w)).collect();
    q_dims.extend(outputs.iter().map(|&w| dim_of(w)));
    let mut perm = vec![0];
    for k in 0..n {
        perm.push(1 + n + k);
        perm.push(1 + k);
    }
    perm.push(2 * n + 1);
    let j = tensor::permute(&jq, &q_dims, &perm)?;
    CombChoi::new(io, teeth.to_vec(), herm_part(&j))
}

fn apply_wired(
    y: &Mat,
    labels: &[Wire],
    targets: &[Wire],
    produced: &[Wire],
    ch: &ChannelChoi,
    dim_of: &dyn Fn(Wire) -> usize,
) -> Result<(Mat, Vec<Wire>)> {
    let dims: Vec<usize> = labels.iter().map(|&w| dim_of(w)).collect();
    let rest: Vec<usize> = (0..labels.len()).filter(|&i| !targets.contains(&labels[i])).collect();
    let mut perm = rest.clone();
    for t in targets {
        perm.push(labels.iter().position(|l| l == t).expect("target wire"));
    }
    let moved = tensor::permute(y, &dims, &perm)?;
    let first: usize = rest.iter().map(|&i| dims[i]).product();
    let out = apply_on_last(ch.matrix(), ch.sys.in_dim, ch.sys.out_dim, &moved, first)?;
    let mut new_labels: Vec<Wire> = rest.iter().map(|&i| labels[i]).collect();
    new_labels.extend_from_slice(produced);
    Ok((out, new_labels))
}

/// Channel `B₀ → B₁` obtained by plugging `channels[k]` into slot `k`.
pub fn comb_apply(comb: &CombChoi, channels: &[ChannelChoi]) -> Result<ChannelChoi> {
    check_slots(comb.teeth.len())?;
    if channels.len() != comb.teeth.len() {
        return dim_err("one channel per slot is required");
    }
    let mut j = comb.matrix().clone();
    let mut dims = comb.dims();
    for (k, ch) in channels.iter().enumerate() {
        if ch.sys != comb.teeth[k] {
            return dim_err(alloc::format!("channel {k} does not match its slot"));
        }
        // after k contractions slot k sits at positions 1, 2
        let mut perm = vec![1, 2, 0];
        perm.extend(3..dims.len());
        let moved = tensor::permute(&j, &dims, &perm)?;
        j = tensor::link_trace(&moved, &ch.matrix().transpose())?;
        let mut nd = vec![dims[0]];
        nd.extend_from_slice(&dims[3..]);
        dims = nd;
    }
    ChannelChoi::new(comb.io, herm_part(&j))
}

/// Random comb from a chain of random channels with memory dimension `mem`.
pub fn random_comb<R: Rng + ?Sized>(io: SystemPair, teeth: &[SystemPair], mem: usize, rng: &mut R) -> Result<CombChoi> {
    let n = teeth.len();
    check_slots(n)?;
    let mut chain = Vec::new();
    for k in 0..=n {
        let din = if k == 0 { io.in_dim } else { teeth[k - 1].out_dim * mem };
        let dout = if k == n { io.out_dim } else { teeth[k].in_dim * mem };
        chain.push(random_channel(SystemPair::new(din, dout), 2.max(din.div_ceil(dout)), rng)?);
    }
    comb_from_channels(io, teeth, &chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supermap::{apply_superchannel, random_superchannel, validate_superchannel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(s: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(s)
    }

    #[test]
    fn one_slot_comb_is_a_superchannel() {
        let s = SystemPair::new(2, 2);
        let t = random_superchannel(s, SystemPair::new(2, 3), 2, &mut rng(1)).unwrap();
        let comb = CombChoi::from_superchoi(&t).unwrap();
        let rc = validate_comb(&comb).unwrap();
        let rs = validate_superchannel(&t);
        assert!(rc.valid && rs.valid);
        assert!((rc.min_eig - rs.min_eig).abs() < 1e-12);
        assert!((rc.marginal_error - rs.marginal_error).abs() < 1e-12);
        let n = random_channel(s, 2, &mut rng(2)).unwrap();
        let lhs = comb_apply(&comb, core::slice::from_ref(&n)).unwrap();
        let rhs = apply_superchannel(&t, &n).unwrap();
        assert!(max_abs_diff(lhs.matrix(), rhs.matrix()) < 1e-12);
        assert_eq!(comb.to_superchoi().unwrap(), t);
    }

    #[test]
    fn sequential_wiring_composes() {
        let d = 2;
        let s = SystemPair::new(d, d);
        let id = ChannelChoi::identity(d);
        let comb = comb_from_channels(s, &[s, s], &[id.clone(), id.clone(), id]).unwrap();
        assert!(validate_comb(&comb).unwrap().valid);
        let n1 = random_channel(s, 2, &mut rng(3)).unwrap();
        let n2 = random_channel(s, 2, &mut rng(4)).unwrap();
        let out = comb_apply(&comb, &[n1.clone(), n2.clone()]).unwrap();
        let expected = compose(&n2, &n1).unwrap();
        assert!(max_abs_diff(out.matrix(), expected.matrix()) < 1e-12);
    }

    #[test]
    fn parallel_wiring_tensors() {
        let d = 2;
        let s = SystemPair::new(d, d);
        let io = SystemPair::new(d * d, d * d);
        let e1 = ChannelChoi::identity(d * d); // B₀ = (x, y) → A₀¹ = x, M₁ = y
        let swap = ChannelChoi::unitary(&tensor::swap(d)).unwrap(); // (A₁¹, M₁) → (A₀², M₂)
        let e3 = ChannelChoi::unitary(&tensor::swap(d)).unwrap(); // (A₁², M₂) → (A₁¹, A₁²)
        let comb = comb_from_channels(io, &[s, s], &[e1, swap, e3]).unwrap();
        assert!(validate_comb(&comb).unwrap().valid);
        let n1 = random_channel(s, 2, &mut rng(5)).unwrap();
        let n2 = random_channel(s, 2, &mut rng(6)).unwrap();
        let out = comb_apply(&comb, &[n1.clone(), n2.clone()]).unwrap();
        let expected = tensor_channels(&n1, &n2).unwrap();
        assert!(max_abs_diff(out.matrix(), expected.matrix()) < 1e-12);
    }

    #[test]
    fn wrong_order_marginal_fails() {
        // A comb that signals from the second slot's output to the first
        // slot's input violates causality.
        let s = SystemPair::new(2, 2);
        let io = SystemPair::new(1, 1);
        let good = random_comb(io, &[s, s], 2, &mut rng(7)).unwrap();
        assert!(validate_comb(&good).unwrap().valid);
        let dims = good.dims();
        // swap the roles of the two slots
        let perm = [0, 3, 4, 1, 2, 5];
        let bad = CombChoi::new(io, vec![s, s], tensor::permute(good.matrix(), &dims, &perm).unwrap()).unwrap();
        let r = validate_comb(&bad).unwrap();
        assert!(!r.valid, "swapped slots should break causal order: {r:?}");
    }

    #[test]
    fn three_slots_unsupported() {
        let s = SystemPair::new(1, 1);
        let comb = CombChoi::new(s, vec![s, s, s], eye(1)).unwrap();
        assert_eq!(validate_comb(&comb), Err(Error::UnsupportedSlots(3)));
    }

    #[test]
    fn random_combs_are_valid() {
        let s = SystemPair::new(2, 2);
        for seed in 0..5 {
            let comb = random_comb(SystemPair::new(2, 2), &[s, s], 2, &mut rng(seed)).unwrap();
            assert!(validate_comb(&comb).unwrap().valid);
        }
    }
}
