//! Single-shot resource cost and distillation by an exhaustive scan over
//! the dimension of a golden resource, and their adaptive variants in
//! which `n ≤ 2` resources are plugged into a free comb.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::choi::*;
use crate::comb::check_slots;
use crate::conic::{Atom, IpmSettings, LinMap};
use crate::error::{Error, Result};
use crate::linalg::*;
use crate::problems::{conversion_distance, conversion_with, Bound, Form, ZERO_TOL};
use crate::theory::{ChannelParties, Factorization, FreeCone, Parties, TheoryKind, TheorySpec};

/// Maximally entangled preparations `Φ⁺_d`, the golden resources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoldenFamily {
    pub kind: TheoryKind,
}

impl GoldenFamily {
    pub fn new(kind: TheoryKind) -> Self {
        Self { kind }
    }

    /// Preparation (`|B₀| = 1`) of `φ⁺_d / d` on `d × d`.
    pub fn generator(&self, d: usize) -> ChannelChoi {
        ChannelChoi::preparation(&(phi_plus(d) / c(d as f64))).expect("square state")
    }

    /// `Φ⁺_d` is shared as `α:d ⊗ β:d`.
    pub fn parties(&self, d: usize) -> ChannelParties {
        ChannelParties { input: Factorization::alpha(1), output: Factorization::split(d, d) }
    }
}

fn theory_for(kind: TheoryKind, a: Option<&ChannelParties>, b: Option<&ChannelParties>) -> Result<TheorySpec> {
    match kind {
        TheoryKind::All => Ok(TheorySpec::all()),
        TheoryKind::Ppt => match (a, b) {
            (Some(a), Some(b)) => TheorySpec::ppt(Parties::from_sides(a, b)),
            _ => Err(Error::InvalidBipartition("PPT protocols need the channel's bipartition".into())),
        },
    }
}

/// Scan settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub d_max: usize,
    /// Slack added to `ε` when deciding feasibility.
    pub tol: f64,
    /// Dimensions whose free-object Choi matrix exceeds this size are
    /// skipped and reported as such.
    pub max_dim: usize,
    pub settings: IpmSettings,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { d_max: 4, tol: ZERO_TOL, max_dim: 64, settings: IpmSettings::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Cost,
    Distill,
}

/// One golden dimension of a scan. `distance` is `None` when skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub d: usize,
    pub distance: Option<f64>,
    pub feasible: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub task: Task,
    /// Number of resources used (1 for the non-adaptive protocols).
    pub n: usize,
    pub eps: f64,
    /// `log₂` of the optimal dimension; `None` when no scanned dimension
    /// is feasible.
    pub value: Option<f64>,
    pub dimension: Option<usize>,
    pub table: Vec<ScanEntry>,
    pub notes: Vec<String>,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Argument(format!("ε must lie in [0, 1), got {eps}")));
    }
    Ok(())
}

fn scan(
    task: Task,
    n: usize,
    eps: f64,
    kind: TheoryKind,
    opts: &ScanOptions,
    mut distance: impl FnMut(usize) -> Result<Option<f64>>,
) -> Result<ProtocolResult> {
    check_eps(eps)?;
    if opts.d_max == 0 {
        return Err(Error::Argument("d_max must be at least 1".into()));
    }
    let mut table = Vec::with_capacity(opts.d_max);
    let mut notes = Vec::new();
    for d in 1..=opts.d_max {
        let dist = distance(d)?;
        if dist.is_none() {
            notes.push(format!("d = {d} skipped: Choi matrix larger than {}", opts.max_dim));
        }
        table.push(ScanEntry { d, distance: dist, feasible: dist.map(|x| x <= eps + opts.tol) });
    }
    let mut feasible = table.iter().filter(|e| e.feasible == Some(true)).map(|e| e.d);
    let dimension = match task {
        Task::Cost => feasible.next(),
        Task::Distill => feasible.next_back(),
    };
    if dimension.is_none() {
        notes.push(format!("no feasible dimension up to d_max = {}", opts.d_max));
    }
    if task == Task::Distill && kind == TheoryKind::All {
        notes.push("every superchannel is free in the ALL theory, so the yield is capped only by d_max".into());
    }
    Ok(ProtocolResult { task, n, eps, value: dimension.map(|d| libm::log2(d as f64)), dimension, table, notes })
}

/// `log₂ min{d : d(Φ⁺_d → N) ≤ ε}`.
pub fn cost_single_shot(
    n: &ChannelChoi,
    parties: Option<&ChannelParties>,
    eps: f64,
    golden: &GoldenFamily,
    opts: &ScanOptions,
) -> Result<ProtocolResult> {
    scan(Task::Cost, 1, eps, golden.kind, opts, |d| {
        let g = golden.generator(d);
        if g.sys.choi_dim() * n.sys.choi_dim() > opts.max_dim {
            return Ok(None);
        }
        let t = theory_for(golden.kind, Some(&golden.parties(d)), parties)?;
        Ok(Some(conversion_distance(&g, n, &t, Form::Primal, &opts.settings)?.value))
    })
}

/// `log₂ max{d : d(N → Φ⁺_d) ≤ ε}`.
pub fn distill_single_shot(
    n: &ChannelChoi,
    parties: Option<&ChannelParties>,
    eps: f64,
    golden: &GoldenFamily,
    opts: &ScanOptions,
) -> Result<ProtocolResult> {
    scan(Task::Distill, 1, eps, golden.kind, opts, |d| {
        let g = golden.generator(d);
        if g.sys.choi_dim() * n.sys.choi_dim() > opts.max_dim {
            return Ok(None);
        }
        let t = theory_for(golden.kind, parties, Some(&golden.parties(d)))?;
        Ok(Some(conversion_distance(n, &g, &t, Form::Primal, &opts.settings)?.value))
    })
}

/// Conversion distance from `resources`, plugged into the slots of a free
/// comb in the order `slot_order` (slot `k` receives
/// `resources[slot_order[k]]`), to `target`.
pub fn comb_conversion_distance(
    resources: &[ChannelChoi],
    target: &ChannelChoi,
    theory: &TheorySpec,
    slot_order: &[usize],
    form: Form,
    settings: &IpmSettings,
) -> Result<Bound> {
    let n = resources.len();
    check_slots(n)?;
    let sys_a = resources[0].sys;
    if resources.iter().any(|r| r.sys != sys_a) {
        return Err(Error::Dimension("all slots must hold channels on the same system".into()));
    }
    let mut sorted = slot_order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..n).collect::<Vec<_>>() {
        return Err(Error::Argument(format!("{slot_order:?} is not a permutation of the slots")));
    }
    let cone = FreeCone::comb(theory, n, sys_a, target.sys)?;
    // [B₀, A₀¹, A₁¹, …, B₁] → [A₀¹, A₁¹, …, B₀, B₁], then contract the slots
    let mut perm: Vec<usize> = (1..=2 * n).collect();
    perm.extend([0, 2 * n + 1]);
    let mut k = eye(1);
    for &i in slot_order {
        k = kron(&k, &resources[i].matrix().transpose());
    }
    let contract = LinMap::of(Atom::Permute { dims: cone.dims.clone(), perm }).then(Atom::LinkTrace(Arc::new(k)));
    conversion_with(&cone, contract, target, form, settings)
}

fn identity_order(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Adaptive cost: `n` copies of `Φ⁺_d` in a free comb simulate `N`.
pub fn adaptive_cost(
    n_ch: &ChannelChoi,
    parties: Option<&ChannelParties>,
    eps: f64,
    golden: &GoldenFamily,
    n: usize,
    slot_order: Option<&[usize]>,
    opts: &ScanOptions,
) -> Result<ProtocolResult> {
    check_slots(n)?;
    let order = slot_order.map_or_else(|| identity_order(n), <[usize]>::to_vec);
    scan(Task::Cost, n, eps, golden.kind, opts, |d| {
        let g = golden.generator(d);
        if g.sys.choi_dim().pow(n as u32) * n_ch.sys.choi_dim() > opts.max_dim {
            return Ok(None);
        }
        let t = theory_for(golden.kind, Some(&golden.parties(d)), parties)?;
        let res = vec![g; n];
        Ok(Some(comb_conversion_distance(&res, n_ch, &t, &order, Form::Primal, &opts.settings)?.value))
    })
}

/// Adaptive distillation: `n` copies of `N` in a free comb simulate `Φ⁺_d`.
pub fn adaptive_distill(
    n_ch: &ChannelChoi,
    parties: Option<&ChannelParties>,
    eps: f64,
    golden: &GoldenFamily,
    n: usize,
    slot_order: Option<&[usize]>,
    opts: &ScanOptions,
) -> Result<ProtocolResult> {
    check_slots(n)?;
    let order = slot_order.map_or_else(|| identity_order(n), <[usize]>::to_vec);
    scan(Task::Distill, n, eps, golden.kind, opts, |d| {
        let g = golden.generator(d);
        if n_ch.sys.choi_dim().pow(n as u32) * g.sys.choi_dim() > opts.max_dim {
            return Ok(None);
        }
        let t = theory_for(golden.kind, parties, Some(&golden.parties(d)))?;
        let res = vec![n_ch.clone(); n];
        Ok(Some(comb_conversion_distance(&res, &g, &t, &order, Form::Primal, &opts.settings)?.value))
    })
}
