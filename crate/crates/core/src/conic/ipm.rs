//! Infeasible primal–dual path-following interior-point method.
//!
//! Solves `min cᵀx  s.t. Ax = b, x ∈ K` and its dual
//! `max bᵀy  s.t. Aᵀy + z = c, z ∈ K*` where `K` is a product of
//! Hermitian PSD blocks, a nonnegative orthant and a free part. Search
//! directions are HKM with a Mehrotra predictor–corrector; the Schur
//! complement is formed densely and factored with [`super::dense`].
//! Free variables are eliminated through a second Schur complement.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Cholesky as NaCholesky;

use super::compile::StandardForm;
use super::dense::{sym_lower_matvec, Cholesky};
use super::svec::{self, Kind, INV_SQRT2};
use crate::linalg::*;

/// Solver knobs. The defaults are the fixed settings reported with every
/// solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    pub max_iter: usize,
    pub feas_tol: f64,
    pub gap_tol: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self { max_iter: 150, feas_tol: 1e-8, gap_tol: 1e-8 }
    }
}

/// Termination state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// A Farkas certificate for the primal was found.
    Infeasible,
    /// A primal improving ray was found.
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

/// Raw standard-form solution.
#[derive(Debug, Clone)]
pub struct IpmResult {
    pub status: Status,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub iterations: usize,
    pub pobj: f64,
    pub dobj: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub rel_gap: f64,
}

type Entries = Vec<(u32, u32, C64)>;

struct BlockData {
    n: usize,
    offset: usize,
    /// `(global row, entries of the Hermitian row matrix, dense copy)`
    rows: Vec<(usize, Entries, Option<Mat>)>,
}

struct Problem<'a> {
    sf: &'a StandardForm,
    blocks: Vec<BlockData>,
    lp0: usize,
    fr0: usize,
    lp_cols: Vec<Vec<(usize, f64)>>,
    free_cols: Vec<Vec<(usize, f64)>>,
    m: usize,
}

fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<'a> Problem<'a> {
    fn new(sf: &'a StandardForm) -> Self {
        let offs = sf.block_offsets();
        let (lp0, fr0) = (sf.lp_offset(), sf.free_offset());
        let tables: Vec<Vec<(usize, usize, Kind)>> =
            sf.blocks.iter().map(|&n| svec::basis_table(n, sf.field)).collect();
        let mut blocks: Vec<BlockData> =
            sf.blocks.iter().zip(&offs).map(|(&n, &offset)| BlockData { n, offset, rows: Vec::new() }).collect();
        let mut lp_cols = vec![Vec::new(); sf.n_lp];
        let mut free_cols = vec![Vec::new(); sf.n_free];
        let block_of = |col: usize| -> usize { offs.partition_point(|&o| o <= col) - 1 };
        for (i, row) in sf.rows.iter().enumerate() {
            let mut current: Option<(usize, Entries)> = None;
            let flush = |cur: &mut Option<(usize, Entries)>, blocks: &mut Vec<BlockData>| {
                if let Some((b, mut e)) = cur.take() {
                    e.sort_unstable_by_key(|t| (t.0, t.1));
                    let mut merged: Entries = Vec::with_capacity(e.len());
                    for t in e {
                        match merged.last_mut() {
                            Some(l) if l.0 == t.0 && l.1 == t.1 => l.2 += t.2,
                            _ => merged.push(t),
                        }
                    }
                    let n = blocks[b].n;
                    let dense = if merged.len() >= n.max(8) {
                        let mut d = zeros(n, n);
                        for &(p, q, v) in &merged {
                            d[(p as usize, q as usize)] = v;
                        }
                        Some(d)
                    } else {
                        None
                    };
                    blocks[b].rows.push((i, merged, dense));
                }
            };
            for &(col, a) in row {
                if col < lp0 {
                    let b = block_of(col);
                    if current.as_ref().is_some_and(|c| c.0 != b) {
                        flush(&mut current, &mut blocks);
                    }
                    let entry = current.get_or_insert_with(|| (b, Vec::new()));
                    let (p, q, kind) = tables[b][col - offs[b]];
                    let (p, q) = (p as u32, q as u32);
                    match kind {
                        Kind::Diag => entry.1.push((p, p, c(a))),
                        Kind::Sym => {
                            entry.1.push((p, q, c(a * INV_SQRT2)));
                            entry.1.push((q, p, c(a * INV_SQRT2)));
                        }
                        Kind::Anti => {
                            entry.1.push((p, q, C64::new(0.0, a * INV_SQRT2)));
                            entry.1.push((q, p, C64::new(0.0, -a * INV_SQRT2)));
                        }
                    }
                } else if col < fr0 {
                    lp_cols[col - lp0].push((i, a));
                } else {
                    free_cols[col - fr0].push((i, a));
                }
            }
            flush(&mut current, &mut blocks);
        }
        Problem { sf, blocks, lp0, fr0, lp_cols, free_cols, m: sf.rows.len() }
    }

    fn a_mul(&self, x: &[f64]) -> Vec<f64> {
        self.sf.rows.iter().map(|r| r.iter().map(|&(k, v)| v * x[k]).sum()).collect()
    }

    /// Factor of `A Aᵀ`, used to restore `AΔX = r_p` after the Newton solve.
    fn gram_factor(&self) -> Cholesky {
        let m = self.m;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.sf.n_vars()];
        for (i, row) in self.sf.rows.iter().enumerate() {
            for &(k, v) in row {
                cols[k].push((i, v));
            }
        }
        let mut g = vec![0.0; m * m];
        for col in &cols {
            for (a, &(i, v)) in col.iter().enumerate() {
                for &(j, w) in &col[..=a] {
                    g[i * m + j] += v * w;
                }
            }
        }
        Cholesky::factor(g, m, 1e-12)
    }

    fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.sf.n_vars()];
        for (r, &yi) in self.sf.rows.iter().zip(y) {
            if yi != 0.0 {
                for &(k, v) in r {
                    out[k] += v * yi;
                }
            }
        }
        out
    }
}

/// Current iterate.
#[derive(Clone)]
struct Iterate {
    xb: Vec<Mat>,
    zb: Vec<Mat>,
    xl: Vec<f64>,
    zl: Vec<f64>,
    xf: Vec<f64>,
    y: Vec<f64>,
}

struct Direction {
    dxb: Vec<Mat>,
    dzb: Vec<Mat>,
    dxl: Vec<f64>,
    dzl: Vec<f64>,
    dxf: Vec<f64>,
    dy: Vec<f64>,
}

fn flatten(p: &Problem, xb: &[Mat], xl: &[f64], xf: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(p.sf.n_vars());
    for m in xb {
        v.extend(svec::svec(m, p.sf.field));
    }
    v.extend_from_slice(xl);
    v.extend_from_slice(xf);
    v
}

fn block_slice<'v>(p: &Problem, b: usize, v: &'v [f64]) -> &'v [f64] {
    let blk = &p.blocks[b];
    &v[blk.offset..blk.offset + svec::herm_coords(blk.n, p.sf.field)]
}

fn inverse_psd(m: &Mat) -> Option<Mat> {
    NaCholesky::new(herm_part(m)).map(|ch| ch.inverse())
}

/// Largest `α` with `X + αΔX ⪰ 0`.
fn max_step_psd(x: &Mat, dx: &Mat) -> f64 {
    let Some(ch) = NaCholesky::new(herm_part(x)) else { return 0.0 };
    let l = ch.l();
    let Some(t) = l.solve_lower_triangular(dx) else { return 0.0 };
    let Some(s) = l.solve_lower_triangular(&t.adjoint()) else { return 0.0 };
    let lam = min_eig(&s);
    if lam < 0.0 {
        -1.0 / lam
    } else {
        f64::INFINITY
    }
}

fn max_step_lp(x: &[f64], dx: &[f64]) -> f64 {
    x.iter().zip(dx).filter(|(_, d)| **d < 0.0).fold(f64::INFINITY, |a, (xi, di)| a.min(-xi / di))
}

fn row_major(m: &Mat) -> Vec<C64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// Lower triangle of `M_ij = Re tr(A_i X A_j Z⁻¹) + Σ_l a_il a_jl x_l / z_l`.
fn schur(p: &Problem, it: &Iterate, zinv: &[Mat]) -> Vec<f64> {
    let m = p.m;
    let mut out = vec![0.0; m * m];
    for (b, blk) in p.blocks.iter().enumerate() {
        let n = blk.n;
        let x = &it.xb[b];
        let zi = &zinv[b];
        let xr = row_major(x);
        let zr = row_major(zi);
        let g: Vec<Option<Vec<C64>>> =
            blk.rows.iter().map(|(_, _, d)| d.as_ref().map(|a| row_major(&(x * a * zi)))).collect();
        for li in 0..blk.rows.len() {
            let (gi, ref ei, _) = blk.rows[li];
            for lj in 0..=li {
                let (gj, ref ej, _) = blk.rows[lj];
                let val = if let Some(gm) = &g[lj] {
                    ei.iter().map(|&(pp, q, v)| (v * gm[q as usize * n + pp as usize]).re).sum::<f64>()
                } else if let Some(gm) = &g[li] {
                    ej.iter().map(|&(pp, q, v)| (v * gm[q as usize * n + pp as usize]).re).sum::<f64>()
                } else {
                    let mut acc = C64::new(0.0, 0.0);
                    for &(pp, q, v) in ei {
                        let xrow = &xr[q as usize * n..(q as usize + 1) * n];
                        for &(r, s, w) in ej {
                            acc += v * w * xrow[r as usize] * zr[s as usize * n + pp as usize];
                        }
                    }
                    acc.re
                };
                let (r, c_) = if gi >= gj { (gi, gj) } else { (gj, gi) };
                out[r * m + c_] += val;
            }
        }
    }
    for (l, col) in p.lp_cols.iter().enumerate() {
        let w = it.xl[l] / it.zl[l];
        for &(i, a) in col {
            for &(j, b) in col {
                if i >= j {
                    out[i * m + j] += w * a * b;
                }
            }
        }
    }
    out
}

struct Factored {
    chol: Cholesky,
    /// `M⁻¹ A_f` column by column.
    w: Vec<Vec<f64>>,
    s: Option<Cholesky>,
    /// Unregularized lower triangle of `M`, kept for refinement when free
    /// variables are present.
    m: Vec<f64>,
}

/// Factors `[[M, A_f], [A_fᵀ, 0]]`. Without free variables this is a plain
/// Cholesky of `M`. With them the system is regularized to the
/// quasi-definite `[[M + δI, A_f], [A_fᵀ, −δI]]` and solved by a Schur
/// complement on the free block; [`Factored::solve`] refines against the
/// exact system.
fn factor(p: &Problem, mat: Vec<f64>) -> Factored {
    let nf = p.free_cols.len();
    if nf == 0 {
        let chol = Cholesky::factor(mat.clone(), p.m, 1e-13);
        return Factored { chol, w: Vec::new(), s: None, m: mat };
    }
    let m = p.m;
    let scale = (0..m).map(|i| mat[i * m + i]).fold(1.0f64, f64::max);
    let delta = 1e-13 * scale;
    let mut reg = mat.clone();
    for i in 0..m {
        reg[i * m + i] += delta;
    }
    let chol = Cholesky::factor(reg, m, 1e-15);
    let w: Vec<Vec<f64>> = p
        .free_cols
        .iter()
        .map(|col| {
            let mut v = vec![0.0; m];
            for &(i, a) in col {
                v[i] = a;
            }
            chol.solve_in_place(&mut v);
            v
        })
        .collect();
    let mut s = vec![0.0; nf * nf];
    for i in 0..nf {
        for j in 0..=i {
            s[i * nf + j] = p.free_cols[i].iter().map(|&(r, a)| a * w[j][r]).sum();
        }
        s[i * nf + i] += delta;
    }
    Factored { chol, w, s: Some(Cholesky::factor(s, nf, 1e-15)), m: mat }
}

impl Factored {
    fn solve_regularized(&self, p: &Problem, r1: &[f64], rf: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut dy = self.chol.solve(r1);
        let Some(s) = &self.s else { return (dy, Vec::new()) };
        let t: Vec<f64> =
            p.free_cols.iter().zip(rf).map(|(col, r)| col.iter().map(|&(i, a)| a * dy[i]).sum::<f64>() - r).collect();
        let dxf = s.solve(&t);
        for (wj, &d) in self.w.iter().zip(&dxf) {
            for (yi, wi) in dy.iter_mut().zip(wj) {
                *yi -= wi * d;
            }
        }
        (dy, dxf)
    }

    /// `[[M, A_f], [A_fᵀ, 0]] u`.
    fn kkt_mul(&self, p: &Problem, u: &[f64]) -> Vec<f64> {
        let (uy, uf) = u.split_at(p.m);
        let mut out = sym_lower_matvec(&self.m, p.m, uy);
        for (col, &d) in p.free_cols.iter().zip(uf) {
            for &(i, a) in col {
                out[i] += a * d;
            }
        }
        out.extend(p.free_cols.iter().map(|col| col.iter().map(|&(i, a)| a * uy[i]).sum::<f64>()));
        out
    }

    /// Solves `M Δy + A_f Δx_f = r1`, `A_fᵀ Δy = rf`. With free variables
    /// this runs GMRES preconditioned by the regularized factorization.
    fn solve(&self, p: &Problem, r1: &[f64], rf: &[f64]) -> (Vec<f64>, Vec<f64>) {
        if self.s.is_none() {
            return self.solve_regularized(p, r1, rf);
        }
        let mut rhs = r1.to_vec();
        rhs.extend_from_slice(rf);
        let precond = |v: &[f64]| {
            let (a, b) = self.solve_regularized(p, &v[..p.m], &v[p.m..]);
            let mut out = a;
            out.extend(b);
            out
        };
        let u = gmres(|v| self.kkt_mul(p, v), precond, &rhs, 1e-12, 40);
        let (dy, dxf) = u.split_at(p.m);
        (dy.to_vec(), dxf.to_vec())
    }
}

/// Right-preconditioned restarted GMRES for `K u = r`.
fn gmres(
    k: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    r: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Vec<f64> {
    const RESTART: usize = 30;
    let n = r.len();
    let rnorm = norm2(r);
    let mut u = vec![0.0; n];
    if rnorm == 0.0 {
        return u;
    }
    let mut used = 0;
    while used < max_iter {
        let ku = k(&u);
        let res: Vec<f64> = r.iter().zip(&ku).map(|(a, b)| a - b).collect();
        let beta = norm2(&res);
        if beta <= rel_tol * rnorm {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![res.iter().map(|x| x / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::new();
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        for j in 0..RESTART {
            used += 1;
            let z = precond(&basis[j]);
            let mut w = k(&z);
            zs.push(z);
            let mut hcol = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                hcol[i] = hij;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= hij * b);
            }
            let wn = norm2(&w);
            hcol[j + 1] = wn;
            for (i, &(cc, sn)) in cs.iter().enumerate() {
                let (a, b) = (hcol[i], hcol[i + 1]);
                hcol[i] = cc * a + sn * b;
                hcol[i + 1] = -sn * a + cc * b;
            }
            let (a, b) = (hcol[j], hcol[j + 1]);
            let den = libm::hypot(a, b);
            let (cc, sn) = if den == 0.0 { (1.0, 0.0) } else { (a / den, b / den) };
            hcol[j] = den;
            hcol[j + 1] = 0.0;
            cs.push((cc, sn));
            g.push(-sn * g[j]);
            g[j] *= cc;
            hess.push(hcol);
            let done = g[j + 1].abs() <= rel_tol * rnorm || wn == 0.0 || used >= max_iter;
            if !done {
                basis.push(w.iter().map(|x| x / wn).collect());
            }
            if done || j + 1 == RESTART {
                // back substitution
                let kdim = hess.len();
                let mut yv = vec![0.0; kdim];
                for i in (0..kdim).rev() {
                    let mut acc = g[i];
                    for l in i + 1..kdim {
                        acc -= hess[l][i] * yv[l];
                    }
                    yv[i] = if hess[i][i] != 0.0 { acc / hess[i][i] } else { 0.0 };
                }
                for (zi, &yi) in zs.iter().zip(&yv) {
                    u.iter_mut().zip(zi).for_each(|(a, b)| *a += yi * b);
                }
                break;
            }
        }
    }
    u
}

fn direction(
    p: &Problem,
    it: &Iterate,
    zinv: &[Mat],
    fac: &Factored,
    gram: Option<&Cholesky>,
    rp: &[f64],
    rd: &[f64],
    sigma_mu: f64,
    corr: Option<&Direction>,
) -> Direction {
    let field = p.sf.field;
    let nb = p.blocks.len();
    let mut h = Vec::with_capacity(nb);
    let mut hv = Vec::with_capacity(p.sf.n_vars());
    for b in 0..nb {
        let n = p.blocks[b].n;
        let x = &it.xb[b];
        let rdb = svec::smat(block_slice(p, b, rd), n, field);
        let mut t = zinv[b].clone() * c(sigma_mu) - x - x * rdb * &zinv[b];
        if let Some(cd) = corr {
            t -= &cd.dxb[b] * &cd.dzb[b] * &zinv[b];
        }
        hv.extend(svec::svec(&herm_part(&t), field));
        h.push(t);
    }
    let rdl = &rd[p.lp0..p.fr0];
    let hl: Vec<f64> = (0..it.xl.len())
        .map(|l| {
            let cr = corr.map_or(0.0, |cd| cd.dxl[l] * cd.dzl[l]);
            (sigma_mu - it.xl[l] * it.zl[l] - cr - it.xl[l] * rdl[l]) / it.zl[l]
        })
        .collect();
    hv.extend_from_slice(&hl);
    hv.extend(core::iter::repeat_n(0.0, p.sf.n_free));
    let ah = p.a_mul(&hv);
    let rhs: Vec<f64> = rp.iter().zip(&ah).map(|(a, b)| a - b).collect();
    let rdf = &rd[p.fr0..];
    let assemble = |dy: Vec<f64>, dxf: Vec<f64>| {
        let aty = p.at_mul(&dy);
        let mut dxb = Vec::with_capacity(nb);
        let mut dzb = Vec::with_capacity(nb);
        for b in 0..nb {
            let n = p.blocks[b].n;
            let at = svec::smat(block_slice(p, b, &aty), n, field);
            let rdb = svec::smat(block_slice(p, b, rd), n, field);
            dzb.push(&rdb - &at);
            dxb.push(herm_part(&(&h[b] + &it.xb[b] * at * &zinv[b])));
        }
        let atl = &aty[p.lp0..p.fr0];
        let dzl: Vec<f64> = rdl.iter().zip(atl).map(|(r, a)| r - a).collect();
        let dxl: Vec<f64> = (0..hl.len()).map(|l| hl[l] + it.xl[l] / it.zl[l] * atl[l]).collect();
        Direction { dxb, dzb, dxl, dzl, dxf, dy }
    };
    // Refine against the exact Newton equations `AΔX = r_p`, `A_fᵀΔy = r_f`.
    let scale = 1.0 + norm2(rp) + norm2(&ah) + norm2(rdf);
    let (dy, dxf) = fac.solve(p, &rhs, rdf);
    let mut d = assemble(dy, dxf);
    let mut best_err = f64::INFINITY;
    let mut best: Option<Direction> = None;
    for round in 0..4 {
        let full = flatten(p, &d.dxb, &d.dxl, &d.dxf);
        let r1: Vec<f64> = rp.iter().zip(p.a_mul(&full)).map(|(a, b)| a - b).collect();
        let rf: Vec<f64> = p
            .free_cols
            .iter()
            .zip(rdf)
            .map(|(col, r)| r - col.iter().map(|&(i, a)| a * d.dy[i]).sum::<f64>())
            .collect();
        let err = norm2(&r1) + norm2(&rf);
        if err < best_err {
            best_err = err;
            best = Some(d);
        } else {
            break;
        }
        if err <= 1e-14 * scale || round == 3 {
            break;
        }
        let (cy, cf) = fac.solve(p, &r1, &rf);
        let cur = best.as_ref().expect("set above");
        let dy: Vec<f64> = cur.dy.iter().zip(&cy).map(|(a, b)| a + b).collect();
        let dxf: Vec<f64> = cur.dxf.iter().zip(&cf).map(|(a, b)| a + b).collect();
        d = assemble(dy, dxf);
    }
    let mut d = best.expect("at least one round");
    let Some(gram) = gram else { return d };
    // Whatever the Schur solve left over in `AΔX = r_p` is removed by the
    // least-change correction `Aᵀ(AAᵀ)⁻¹ r`. The dual part is untouched.
    let full = flatten(p, &d.dxb, &d.dxl, &d.dxf);
    let r1: Vec<f64> = rp.iter().zip(p.a_mul(&full)).map(|(a, b)| a - b).collect();
    if norm2(&r1) > 0.0 {
        let fix = p.at_mul(&gram.solve(&r1));
        for b in 0..nb {
            let n = p.blocks[b].n;
            d.dxb[b] += svec::smat(block_slice(p, b, &fix), n, field);
        }
        d.dxl.iter_mut().zip(&fix[p.lp0..p.fr0]).for_each(|(x, f)| *x += f);
        d.dxf.iter_mut().zip(&fix[p.fr0..]).for_each(|(x, f)| *x += f);
    }
    d
}

fn step_lengths(it: &Iterate, d: &Direction) -> (f64, f64) {
    let mut ap = max_step_lp(&it.xl, &d.dxl);
    let mut ad = max_step_lp(&it.zl, &d.dzl);
    for b in 0..it.xb.len() {
        ap = ap.min(max_step_psd(&it.xb[b], &d.dxb[b]));
        ad = ad.min(max_step_psd(&it.zb[b], &d.dzb[b]));
    }
    (ap, ad)
}

fn complementarity(it: &Iterate, ap: f64, ad: f64, d: Option<&Direction>) -> f64 {
    let mut s = 0.0;
    for b in 0..it.xb.len() {
        let (x, z) = match d {
            Some(d) => (&it.xb[b] + &d.dxb[b] * c(ap), &it.zb[b] + &d.dzb[b] * c(ad)),
            None => (it.xb[b].clone(), it.zb[b].clone()),
        };
        s += inner(&x, &z);
    }
    for l in 0..it.xl.len() {
        let (x, z) = match d {
            Some(d) => (it.xl[l] + ap * d.dxl[l], it.zl[l] + ad * d.dzl[l]),
            None => (it.xl[l], it.zl[l]),
        };
        s += x * z;
    }
    s
}

fn initial_point(p: &Problem) -> Iterate {
    let sf = p.sf;
    let row_norm2: Vec<Vec<f64>> = {
        // per block squared Frobenius norm of each row restricted to it
        let mut out: Vec<Vec<f64>> = p.blocks.iter().map(|b| vec![0.0; b.rows.len()]).collect();
        for (b, blk) in p.blocks.iter().enumerate() {
            for (k, (_, e, _)) in blk.rows.iter().enumerate() {
                out[b][k] = e.iter().map(|t| t.2.norm_sqr()).sum();
            }
        }
        out
    };
    let cvec = &sf.c;
    let mut xb = Vec::new();
    let mut zb = Vec::new();
    for (b, blk) in p.blocks.iter().enumerate() {
        let n = blk.n as f64;
        let mut xi: f64 = 10f64.max(libm::sqrt(n));
        let mut eta: f64 = 10f64.max(libm::sqrt(n));
        for (k, (gi, _, _)) in blk.rows.iter().enumerate() {
            let an = libm::sqrt(row_norm2[b][k]);
            xi = xi.max(n * (1.0 + sf.b[*gi].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        let cn = norm2(block_slice(p, b, cvec));
        eta = eta.max(cn);
        xb.push(eye(blk.n) * c(xi));
        zb.push(eye(blk.n) * c(eta));
    }
    let mut xl = vec![0.0; sf.n_lp];
    let mut zl = vec![0.0; sf.n_lp];
    for l in 0..sf.n_lp {
        let mut xi: f64 = 10.0;
        let mut eta: f64 = 10.0;
        for &(i, a) in &p.lp_cols[l] {
            xi = xi.max((1.0 + sf.b[i].abs()) / (1.0 + a.abs()));
            eta = eta.max(a.abs());
        }
        eta = eta.max(cvec[p.lp0 + l].abs());
        xl[l] = xi;
        zl[l] = eta;
    }
    Iterate { xb, zb, xl, zl, xf: vec![0.0; sf.n_free], y: vec![0.0; p.m] }
}

/// Solves a standard-form program.
///
/// Near a degenerate optimum the Newton directions lose accuracy and the
/// steps can collapse. A run that ends inconclusively is repeated with
/// primal directions projected back onto `AΔX = r_p`, which fails on
/// different instances, and the better of the two results is kept.
pub fn solve_standard(sf: &StandardForm, settings: &IpmSettings) -> IpmResult {
    let first = solve_conic(sf, settings, false);
    if !matches!(first.status, Status::MaxIterations | Status::NumericalFailure) {
        return first;
    }
    let second = solve_conic(sf, settings, true);
    let merit = |r: &IpmResult| r.pinf.max(r.dinf).max(r.rel_gap);
    if !matches!(second.status, Status::MaxIterations | Status::NumericalFailure) || merit(&second) < merit(&first) {
        second
    } else {
        first
    }
}

/// Iterations without a better iterate before the search stops.
const STALL: usize = 5;

/// Degenerate programs lose accuracy in the Newton system near the optimum
/// and can stall just short of the tolerances. The best iterate is then
/// accepted when it is within ten times the tolerances.
fn near_optimal(r: &IpmResult, settings: &IpmSettings) -> bool {
    r.pinf <= 10.0 * settings.feas_tol && r.dinf <= 10.0 * settings.feas_tol && r.rel_gap <= 10.0 * settings.gap_tol
}

fn solve_conic(sf: &StandardForm, settings: &IpmSettings, project: bool) -> IpmResult {
    let p = Problem::new(sf);
    let gram = project.then(|| p.gram_factor());
    let nu: f64 = (sf.blocks.iter().sum::<usize>() + sf.n_lp).max(1) as f64;
    let mut it = initial_point(&p);
    let bnorm = norm2(&sf.b);
    let cnorm = norm2(&sf.c);
    let mut best: Option<(f64, IpmResult)> = None;
    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    let mut last = None;
    let mut best_k = 0;
    for k in 0..=settings.max_iter {
        iterations = k;
        let xv = flatten(&p, &it.xb, &it.xl, &it.xf);
        let ax = p.a_mul(&xv);
        let rp: Vec<f64> = sf.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = p.at_mul(&it.y);
        let zv = flatten(&p, &it.zb, &it.zl, &vec![0.0; sf.n_free]);
        let rd: Vec<f64> = (0..sf.n_vars()).map(|i| sf.c[i] - aty[i] - zv[i]).collect();
        let pobj = dot(&sf.c, &xv);
        let dobj = dot(&sf.b, &it.y);
        let pinf = norm2(&rp) / (1.0 + bnorm);
        let dinf = norm2(&rd) / (1.0 + cnorm);
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let snapshot = IpmResult {
            status: Status::MaxIterations,
            x: xv.clone(),
            y: it.y.clone(),
            iterations: k,
            pobj,
            dobj,
            pinf,
            dinf,
            rel_gap,
        };
        let merit = pinf.max(dinf).max(rel_gap);
        if best.as_ref().is_none_or(|(m, _)| merit < *m) {
            best = Some((merit, snapshot.clone()));
            best_k = k;
        }
        last = Some(snapshot);
        if pinf <= settings.feas_tol && dinf <= settings.feas_tol && rel_gap <= settings.gap_tol {
            status = Status::Optimal;
            break;
        }
        // Farkas-type certificates
        let ynorm = norm2(&it.y);
        if dobj > 1e3 && ynorm > 1e6 {
            let resid: Vec<f64> = (0..sf.n_vars()).map(|i| sf.c[i] - rd[i]).collect();
            if norm2(&resid) / dobj < 1e-7 {
                status = Status::Infeasible;
                break;
            }
        }
        let xnorm = norm2(&xv);
        if -pobj > 1e3 && xnorm > 1e6 && norm2(&ax) / (-pobj) < 1e-7 {
            status = Status::Unbounded;
            break;
        }
        if k == settings.max_iter
            || (k >= best_k + STALL && best.as_ref().is_some_and(|b| near_optimal(&b.1, settings)))
        {
            break;
        }
        let mu = complementarity(&it, 0.0, 0.0, None) / nu;
        let zinv: Option<Vec<Mat>> = it.zb.iter().map(inverse_psd).collect();
        let Some(zinv) = zinv else {
            status = Status::NumericalFailure;
            break;
        };
        let fac = factor(&p, schur(&p, &it, &zinv));
        let pred = direction(&p, &it, &zinv, &fac, gram.as_ref(), &rp, &rd, 0.0, None);
        let (ap, ad) = step_lengths(&it, &pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff = complementarity(&it, ap, ad, Some(&pred)) / nu;
        let sigma = if mu > 0.0 {
            {
                let r = (mu_aff / mu).clamp(0.0, 1.0);
                r * r * r
            }
        } else {
            0.0
        };
        let corr = direction(&p, &it, &zinv, &fac, gram.as_ref(), &rp, &rd, sigma * mu, Some(&pred));
        let (ap, ad) = step_lengths(&it, &corr);
        let gamma = 0.98;
        let (ap, ad) = ((gamma * ap).min(1.0), (gamma * ad).min(1.0));
        if ap < 1e-12 && ad < 1e-12 {
            status = Status::NumericalFailure;
            break;
        }
        for b in 0..it.xb.len() {
            it.xb[b] = herm_part(&(&it.xb[b] + &corr.dxb[b] * c(ap)));
            it.zb[b] = herm_part(&(&it.zb[b] + &corr.dzb[b] * c(ad)));
        }
        for l in 0..it.xl.len() {
            it.xl[l] += ap * corr.dxl[l];
            it.zl[l] += ad * corr.dzl[l];
        }
        for (x, d) in it.xf.iter_mut().zip(&corr.dxf) {
            *x += ap * d;
        }
        for (y, d) in it.y.iter_mut().zip(&corr.dy) {
            *y += ad * d;
        }
    }
    let mut out = match status {
        Status::Optimal | Status::Infeasible | Status::Unbounded => last.expect("iterate"),
        _ => best.map(|b| b.1).or(last).expect("iterate"),
    };
    if matches!(status, Status::MaxIterations | Status::NumericalFailure) && near_optimal(&out, settings) {
        status = Status::Optimal;
    }
    out.status = status;
    out.iterations = iterations;
    out
}
