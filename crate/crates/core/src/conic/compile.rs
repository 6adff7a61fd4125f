//! Lowering of a [`ConicProgram`] to the standard form
//! `min cᵀx  s.t.  A x = b,  x ∈ S₊ × … × ℝ₊ˡ × ℝᶠ`.
//!
//! Cone constraints become slack variables. Linear maps are turned into
//! sparse coordinate matrices by evaluating each atom on the basis of its
//! smaller side (using the adjoint when the output is smaller).

use alloc::vec;
use alloc::vec::Vec;

use super::model::*;
use super::svec::{self, Field, Kind, INV_SQRT2};
use crate::error::{Error, Result};

/// Sparse matrix stored by columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCols {
    pub rows: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
}

const DROP: f64 = 1e-14;

impl SparseCols {
    fn identity(n: usize) -> Self {
        Self { rows: n, cols: (0..n).map(|i| vec![(i, 1.0)]).collect() }
    }

    fn transpose(&self) -> Self {
        let mut cols = vec![Vec::new(); self.rows];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                cols[i].push((j, v));
            }
        }
        Self { rows: self.cols.len(), cols }
    }

    /// `self ∘ a` (apply `a` first).
    fn after(&self, a: &SparseCols) -> Self {
        let mut acc = vec![0.0; self.rows];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; self.rows];
        let cols = a
            .cols
            .iter()
            .map(|col| {
                for &(k, v) in col {
                    for &(i, w) in &self.cols[k] {
                        if !mark[i] {
                            mark[i] = true;
                            touched.push(i);
                        }
                        acc[i] += v * w;
                    }
                }
                touched.sort_unstable();
                let out: Vec<(usize, f64)> =
                    touched.iter().filter(|&&i| acc[i].abs() > DROP).map(|&i| (i, acc[i])).collect();
                for &i in &touched {
                    acc[i] = 0.0;
                    mark[i] = false;
                }
                touched.clear();
                out
            })
            .collect();
        Self { rows: self.rows, cols }
    }
}

pub(crate) fn coords(space: Space, field: Field) -> usize {
    match space {
        Space::Herm(n) => svec::herm_coords(n, field),
        Space::Real(k) => k,
    }
}

pub(crate) fn to_coords(v: &Value, field: Field) -> Vec<f64> {
    match v {
        Value::Herm(m) => svec::svec(m, field),
        Value::Real(x) => x.clone(),
    }
}

pub(crate) fn from_coords(x: &[f64], space: Space, field: Field) -> Value {
    match space {
        Space::Herm(n) => Value::Herm(svec::smat(x, n, field)),
        Space::Real(_) => Value::Real(x.to_vec()),
    }
}

fn basis_value(space: Space, table: &[(usize, usize, Kind)], k: usize) -> Value {
    match space {
        Space::Herm(n) => Value::Herm(svec::basis_matrix(n, table[k])),
        Space::Real(len) => {
            let mut v = vec![0.0; len];
            v[k] = 1.0;
            Value::Real(v)
        }
    }
}

fn pair_rank(i: usize, j: usize, n: usize) -> usize {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Coordinate contributions of `tr(W X)` for a sparse Hermitian `W`.
fn functional_coords(w: &SparseHerm, n: usize, field: Field) -> Vec<(usize, f64)> {
    let width = if field == Field::Complex { 2 } else { 1 };
    let mut out: Vec<(usize, f64)> = Vec::new();
    for &(p, q, v) in &w.entries {
        if p == q {
            out.push((p, v.re));
        } else {
            let (i, j) = if p < q { (p, q) } else { (q, p) };
            let base = n + width * pair_rank(i, j, n);
            out.push((base, v.re * INV_SQRT2));
            if field == Field::Complex {
                // coefficient Re(v · B[q,p]) with B_anti[i,j] = i/√2, B_anti[j,i] = −i/√2
                let s = if p < q { v.im } else { -v.im };
                out.push((base + 1, s * INV_SQRT2));
            }
        }
    }
    out.sort_unstable_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(out.len());
    for (k, v) in out {
        match merged.last_mut() {
            Some(last) if last.0 == k => last.1 += v,
            _ => merged.push((k, v)),
        }
    }
    merged.retain(|e| e.1.abs() > DROP);
    merged
}

fn atom_matrix(atom: &Atom, input: Space, field: Field) -> Result<SparseCols> {
    let output = atom.out_space(input)?;
    let (nin, nout) = (coords(input, field), coords(output, field));
    match atom {
        Atom::Scale(s) => {
            return Ok(SparseCols { rows: nin, cols: (0..nin).map(|i| vec![(i, *s)]).collect() });
        }
        Atom::Functionals(f) => {
            let rows =
                SparseCols { rows: nin, cols: f.rows.iter().map(|w| functional_coords(w, f.n, field)).collect() };
            return Ok(rows.transpose());
        }
        Atom::Combination(f) => {
            return Ok(SparseCols {
                rows: nout,
                cols: f.rows.iter().map(|w| functional_coords(w, f.n, field)).collect(),
            });
        }
        _ => {}
    }
    let (from, to, op) = if nin <= nout { (input, output, atom.clone()) } else { (output, input, atom.adjoint()) };
    let table = match from {
        Space::Herm(n) => svec::basis_table(n, field),
        Space::Real(_) => Vec::new(),
    };
    let mut m = SparseCols { rows: coords(to, field), cols: Vec::new() };
    for k in 0..coords(from, field) {
        let img = op.apply(&basis_value(from, &table, k))?;
        let col = to_coords(&img, field).into_iter().enumerate().filter(|(_, v)| v.abs() > DROP).collect();
        m.cols.push(col);
    }
    Ok(if nin <= nout { m } else { m.transpose() })
}

/// Coordinate matrix of a chain of atoms.
pub fn map_matrix(map: &LinMap, input: Space, field: Field) -> Result<SparseCols> {
    let mut acc = SparseCols::identity(coords(input, field));
    let mut space = input;
    for atom in &map.0 {
        let m = atom_matrix(atom, space, field)?;
        acc = m.after(&acc);
        space = atom.out_space(space)?;
    }
    Ok(acc)
}

/// Where a program variable lives in the standard-form vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Slot {
    pub offset: usize,
    pub len: usize,
}

/// Standard-form data.
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub field: Field,
    /// Sizes of the PSD blocks, laid out first.
    pub blocks: Vec<usize>,
    pub n_lp: usize,
    pub n_free: usize,
    /// Sparse rows of `A`, sorted by column.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl StandardForm {
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut o = 0;
        for &n in &self.blocks {
            off.push(o);
            o += svec::herm_coords(n, self.field);
        }
        off
    }
    pub fn lp_offset(&self) -> usize {
        self.blocks.iter().map(|&n| svec::herm_coords(n, self.field)).sum()
    }
    pub fn free_offset(&self) -> usize {
        self.lp_offset() + self.n_lp
    }
    pub fn n_vars(&self) -> usize {
        self.free_offset() + self.n_free
    }
}

/// A compiled program plus the bookkeeping needed to read results back.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub sf: StandardForm,
    pub(crate) var_slots: Vec<Slot>,
    /// Row range of every equality, then every cone constraint, before
    /// presolve.
    pub(crate) con_rows: Vec<Slot>,
    /// Original row → kept row.
    pub(crate) row_map: Vec<Option<usize>>,
    /// `+1` for minimization, `−1` when the objective was negated.
    pub(crate) sign: f64,
    pub(crate) constant: f64,
}

/// Compiles a program. Real data yields a real symmetric formulation
/// (complex conjugation maps optimal solutions to optimal solutions, so
/// averaging gives a real optimum).
pub fn compile(p: &ConicProgram) -> Result<Compiled> {
    p.check()?;
    let field = if p.is_real_data() { Field::Real } else { Field::Complex };
    enum Kindv {
        Psd(usize),
        Lp(usize),
        Free(usize),
    }
    let mut blocks = Vec::new();
    let mut n_lp = 0;
    let mut n_free = 0;
    let mut assign = |space: Space, domain: Domain| -> Kindv {
        match (space, domain) {
            (Space::Herm(n), Domain::Cone) => {
                blocks.push(n);
                Kindv::Psd(blocks.len() - 1)
            }
            (Space::Real(k), Domain::Cone) => {
                n_lp += k;
                Kindv::Lp(n_lp - k)
            }
            (s, Domain::Free) => {
                let k = coords(s, field);
                n_free += k;
                Kindv::Free(n_free - k)
            }
        }
    };
    let var_kinds: Vec<Kindv> = p.vars.iter().map(|v| assign(v.space, v.domain)).collect();
    let slack_kinds: Vec<Kindv> = p.cones.iter().map(|c| assign(c.expr.space, Domain::Cone)).collect();
    let mut sf = StandardForm { field, blocks, n_lp, n_free, rows: Vec::new(), b: Vec::new(), c: Vec::new() };
    let offs = sf.block_offsets();
    let (lp0, fr0) = (sf.lp_offset(), sf.free_offset());
    let slot = |k: &Kindv, space: Space| -> Slot {
        let len = coords(space, field);
        let offset = match *k {
            Kindv::Psd(b) => offs[b],
            Kindv::Lp(o) => lp0 + o,
            Kindv::Free(o) => fr0 + o,
        };
        Slot { offset, len }
    };
    let var_slots: Vec<Slot> = p.vars.iter().zip(&var_kinds).map(|(v, k)| slot(k, v.space)).collect();
    let slack_slots: Vec<Slot> = p.cones.iter().zip(&slack_kinds).map(|(c, k)| slot(k, c.expr.space)).collect();

    let sign = if p.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut cvec = vec![0.0; sf.n_vars()];
    for (v, coeff) in &p.objective {
        let s = var_slots[*v];
        for (k, x) in to_coords(coeff, field).into_iter().enumerate() {
            cvec[s.offset + k] += sign * x;
        }
    }
    sf.c = cvec;

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut b = Vec::new();
    let mut con_rows = Vec::new();
    let all = p.equalities.iter().map(|c| (c, None)).chain(p.cones.iter().zip(slack_slots.iter().map(Some)));
    for (con, slack) in all {
        let r0 = rows.len();
        let nr = coords(con.expr.space, field);
        let mut block_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nr];
        for (v, map) in &con.expr.terms {
            let m = map_matrix(map, p.vars[*v].space, field)?;
            let s = var_slots[*v];
            for (j, col) in m.cols.iter().enumerate() {
                for &(i, val) in col {
                    block_rows[i].push((s.offset + j, val));
                }
            }
        }
        if let Some(s) = slack {
            for (i, row) in block_rows.iter_mut().enumerate() {
                row.push((s.offset + i, -1.0));
            }
        }
        for row in block_rows.iter_mut() {
            row.sort_unstable_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(k, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == k => last.1 += v,
                    _ => merged.push((k, v)),
                }
            }
            merged.retain(|e| e.1.abs() > DROP);
            *row = merged;
        }
        rows.extend(block_rows);
        b.extend(to_coords(&con.expr.constant, field).into_iter().map(|x| -x));
        con_rows.push(Slot { offset: r0, len: nr });
    }
    // presolve: drop empty rows
    let mut row_map = vec![None; rows.len()];
    for (i, row) in rows.iter().enumerate() {
        if row.is_empty() {
            if b[i].abs() > 1e-9 {
                return Err(Error::Model(alloc::format!("constraint row {i} reads 0 = {:.3e}", b[i])));
            }
        } else {
            row_map[i] = Some(sf.rows.len());
            sf.rows.push(row.clone());
            sf.b.push(b[i]);
        }
    }
    Ok(Compiled { sf, var_slots, con_rows, row_map, sign, constant: p.objective_constant })
}

impl Compiled {
    /// Program values from a standard-form primal vector.
    pub fn values(&self, p: &ConicProgram, x: &[f64]) -> Vec<Value> {
        p.vars
            .iter()
            .zip(&self.var_slots)
            .map(|(v, s)| from_coords(&x[s.offset..s.offset + s.len], v.space, self.sf.field))
            .collect()
    }

    /// Multipliers of every equality followed by every cone constraint,
    /// in the sign convention of [`super::dual::dualize`].
    pub fn multipliers(&self, p: &ConicProgram, y: &[f64]) -> Vec<Value> {
        let spaces = p.equalities.iter().chain(&p.cones).map(|c| c.expr.space);
        spaces
            .zip(&self.con_rows)
            .map(|(space, s)| {
                let raw: Vec<f64> =
                    (s.offset..s.offset + s.len).map(|r| self.row_map[r].map_or(0.0, |k| y[k] * self.sign)).collect();
                from_coords(&raw, space, self.sf.field)
            })
            .collect()
    }

    /// Objective of the original program for a standard-form objective.
    pub fn original_objective(&self, std_obj: f64) -> f64 {
        self.sign * std_obj + self.constant
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::*;
    use alloc::sync::Arc;
    use rand::SeedableRng;

    fn check_map(atom: Atom, input: Space, field: Field) {
        let m = map_matrix(&LinMap::of(atom.clone()), input, field).unwrap();
        let out = atom.out_space(input).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = match input {
            Space::Herm(n) => {
                let g = herm_part(&ginibre(n, n, &mut rng));
                Value::Herm(if field == Field::Real { g.map(|z| c(z.re)) } else { g })
            }
            Space::Real(k) => Value::Real((0..k).map(|i| i as f64 - 0.5).collect()),
        };
        let direct = to_coords(&atom.apply(&x).unwrap(), field);
        let xc = to_coords(&x, field);
        let mut via = vec![0.0; coords(out, field)];
        for (j, col) in m.cols.iter().enumerate() {
            for &(i, v) in col {
                via[i] += v * xc[j];
            }
        }
        for (a, b) in direct.iter().zip(&via) {
            assert!((a - b).abs() < 1e-10, "{atom:?}: {a} vs {b}");
        }
    }

    #[test]
    fn coordinate_matrices_agree_with_atoms() {
        let k = Arc::new(herm_part(&ginibre(2, 2, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1))));
        let kr = Arc::new(k.map(|z| c(z.re)));
        let f = Arc::new(Functionals {
            n: 4,
            rows: vec![
                SparseHerm { entries: vec![(0, 1, C64::new(0.0, 1.0)), (1, 0, C64::new(0.0, -1.0))] },
                SparseHerm { entries: vec![(2, 2, c(1.0)), (3, 1, c(2.0)), (1, 3, c(2.0))] },
            ],
            conjugation_closed: true,
        });
        for field in [Field::Complex, Field::Real] {
            let kk = if field == Field::Real { kr.clone() } else { k.clone() };
            check_map(Atom::PartialTrace { dims: vec![2, 3], keep: vec![1] }, Space::Herm(6), field);
            check_map(Atom::Embed { dims: vec![2, 3], keep: vec![0] }, Space::Herm(2), field);
            check_map(Atom::PartialTranspose { dims: vec![2, 2], subset: vec![1] }, Space::Herm(4), field);
            check_map(Atom::Permute { dims: vec![2, 3], perm: vec![1, 0] }, Space::Herm(6), field);
            check_map(Atom::LinkTrace(kk.clone()), Space::Herm(6), field);
            check_map(Atom::TensorLeft(kk.clone()), Space::Herm(3), field);
            check_map(Atom::TraceWith(kk.clone()), Space::Herm(2), field);
            check_map(Atom::TimesMatrix(kk.clone()), Space::Real(1), field);
            check_map(Atom::Functionals(f.clone()), Space::Herm(4), field);
            check_map(Atom::Combination(f.clone()), Space::Real(2), field);
        }
    }
}
