//! Subsystem bookkeeping on row-major Kronecker layouts.
//!
//! A matrix on `H_0 ⊗ H_1 ⊗ … ⊗ H_{k-1}` is indexed by the mixed-radix
//! number whose most significant digit belongs to subsystem 0.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{kron, Mat, C64, ZERO};

fn product(dims: &[usize]) -> usize {
    dims.iter().product()
}

fn check_square(m: &Mat, dims: &[usize]) -> Result<()> {
    let n = product(dims);
    if m.nrows() != n || m.ncols() != n {
        return dim_err(alloc::format!(
            "matrix is {}x{} but layout {:?} has dimension {}",
            m.nrows(),
            m.ncols(),
            dims,
            n
        ));
    }
    Ok(())
}

fn check_indices(idx: &[usize], count: usize) -> Result<()> {
    for (k, &i) in idx.iter().enumerate() {
        if i >= count {
            return Err(Error::Subsystem { index: i, count });
        }
        if idx[..k].contains(&i) {
            return dim_err(alloc::format!("subsystem {i} listed twice"));
        }
    }
    Ok(())
}

/// Mixed-radix digits of `index` for `dims`.
pub fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

/// Inverse of [`digits`].
pub fn undigits(ds: &[usize], dims: &[usize]) -> usize {
    ds.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d)
}

/// For the reordering in which new subsystem `k` is old subsystem `perm[k]`,
/// returns the old flat index of every new flat index.
pub fn permutation_index_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let n = product(dims);
    let mut map = vec![0; n];
    let mut nd = vec![0; dims.len()];
    let mut od = vec![0; dims.len()];
    for (i, slot) in map.iter_mut().enumerate() {
        digits(i, &new_dims, &mut nd);
        for (k, &p) in perm.iter().enumerate() {
            od[p] = nd[k];
        }
        *slot = undigits(&od, dims);
    }
    map
}

/// Reorder subsystems: new subsystem `k` is old subsystem `perm[k]`.
pub fn permute(m: &Mat, dims: &[usize], perm: &[usize]) -> Result<Mat> {
    check_square(m, dims)?;
    if perm.len() != dims.len() {
        return dim_err("permutation length differs from subsystem count");
    }
    check_indices(perm, dims.len())?;
    let map = permutation_index_map(dims, perm);
    let n = map.len();
    Ok(Mat::from_fn(n, n, |i, j| m[(map[i], map[j])]))
}

/// Dimensions after applying `perm`.
pub fn permuted_dims(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    perm.iter().map(|&p| dims[p]).collect()
}

/// Inverse permutation.
pub fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

fn split(dims: &[usize], keep: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    check_indices(keep, dims.len())?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !kept.contains(i)).collect();
    Ok((kept, traced))
}

/// Partial trace keeping the subsystems in `keep` (returned in their
/// original relative order).
pub fn partial_trace(m: &Mat, dims: &[usize], keep: &[usize]) -> Result<Mat> {
    check_square(m, dims)?;
    let (kept, traced) = split(dims, keep)?;
    let dk: usize = kept.iter().map(|&i| dims[i]).product();
    let dt: usize = traced.iter().map(|&i| dims[i]).product();
    let mut perm = kept.clone();
    perm.extend_from_slice(&traced);
    let map = permutation_index_map(dims, &perm);
    let mut out = Mat::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut s = ZERO;
            for t in 0..dt {
                s += m[(map[i * dt + t], map[j * dt + t])];
            }
            out[(i, j)] = s;
        }
    }
    Ok(out)
}

/// Partial trace over the listed subsystems.
pub fn trace_out(m: &Mat, dims: &[usize], traced: &[usize]) -> Result<Mat> {
    check_indices(traced, dims.len())?;
    let keep: Vec<usize> = (0..dims.len()).filter(|i| !traced.contains(i)).collect();
    partial_trace(m, dims, &keep)
}

/// Adjoint of [`partial_trace`]: `X ↦ X ⊗ I` with the identity factors
/// placed back at the traced positions.
pub fn embed(x: &Mat, dims: &[usize], keep: &[usize]) -> Result<Mat> {
    let (kept, traced) = split(dims, keep)?;
    let dk: usize = kept.iter().map(|&i| dims[i]).product();
    let dt: usize = traced.iter().map(|&i| dims[i]).product();
    if x.nrows() != dk || x.ncols() != dk {
        return dim_err("embedded operator has wrong dimension");
    }
    let mut perm = kept.clone();
    perm.extend_from_slice(&traced);
    let big = kron(x, &Mat::identity(dt, dt));
    let pdims = permuted_dims(dims, &perm);
    permute(&big, &pdims, &crate::tensor::inverse_perm(&perm))
}

/// Partial transpose on the subsystems in `subset`.
pub fn partial_transpose(m: &Mat, dims: &[usize], subset: &[usize]) -> Result<Mat> {
    check_square(m, dims)?;
    check_indices(subset, dims.len())?;
    if subset.is_empty() {
        return Ok(m.clone());
    }
    let n = m.nrows();
    let k = dims.len();
    let mut out = Mat::zeros(n, n);
    let mut rd = vec![0; k];
    let mut cd = vec![0; k];
    for i in 0..n {
        digits(i, dims, &mut rd);
        for j in 0..n {
            digits(j, dims, &mut cd);
            let (mut r2, mut c2) = (rd.clone(), cd.clone());
            for &s in subset {
                r2[s] = cd[s];
                c2[s] = rd[s];
            }
            out[(undigits(&r2, dims), undigits(&c2, dims))] = m[(i, j)];
        }
    }
    Ok(out)
}

/// `tr_1[α (K ⊗ I)]` for `α` on `H_1 ⊗ H_2` with `dim H_1 = k.nrows()`.
pub fn link_trace(alpha: &Mat, k: &Mat) -> Result<Mat> {
    let a = k.nrows();
    if a == 0 || alpha.nrows() % a != 0 || alpha.nrows() != alpha.ncols() || !k.is_square() {
        return dim_err("link operand dimensions are incompatible");
    }
    let b = alpha.nrows() / a;
    let mut out = Mat::zeros(b, b);
    for p in 0..a {
        for q in 0..a {
            let kqp: C64 = k[(q, p)];
            if kqp == ZERO {
                continue;
            }
            for i in 0..b {
                for j in 0..b {
                    out[(i, j)] += alpha[(p * b + i, q * b + j)] * kqp;
                }
            }
        }
    }
    Ok(out)
}

/// Swap operator on `d ⊗ d`.
pub fn swap(d: usize) -> Mat {
    let mut m = Mat::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + j, j * d + i)] = crate::linalg::ONE;
        }
    }
    m
}

/// Permutation operator `P` with `P (⊗_k v_k) = ⊗_k v_{perm[k]}`.
pub fn permutation_operator(dims: &[usize], perm: &[usize]) -> Mat {
    let map = permutation_index_map(dims, perm);
    let n = map.len();
    let mut p = Mat::zeros(n, n);
    for (i, &o) in map.iter().enumerate() {
        p[(i, o)] = crate::linalg::ONE;
    }
    p
}
