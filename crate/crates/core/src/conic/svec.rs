//! Isometric coordinates for Hermitian matrices.
//!
//! Basis: `E_ii`, then for every `i < j` the pair `(E_ij + E_ji)/√2` and (in
//! the complex field only) `i(E_ij − E_ji)/√2`. The coordinates of `X` are
//! `X_ii`, `√2 Re X_ij` and `√2 Im X_ij`, so the Euclidean inner product
//! of coordinate vectors equals `tr(XY)`.

use alloc::vec::Vec;

use crate::linalg::{Mat, C64};

/// Scalar field of the Hermitian variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    /// Real symmetric matrices only.
    Real,
    /// Complex Hermitian matrices.
    Complex,
}

pub(crate) const SQRT2: f64 = core::f64::consts::SQRT_2;
pub(crate) const INV_SQRT2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Number of coordinates for `n × n` Hermitian matrices.
pub fn herm_coords(n: usize, field: Field) -> usize {
    match field {
        Field::Real => n * (n + 1) / 2,
        Field::Complex => n * n,
    }
}

/// Kind of basis element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Diag,
    Sym,
    Anti,
}

/// Basis element `k` as `(i, j, kind)` with `i ≤ j`.
pub fn basis_table(n: usize, field: Field) -> Vec<(usize, usize, Kind)> {
    let mut t: Vec<(usize, usize, Kind)> = (0..n).map(|i| (i, i, Kind::Diag)).collect();
    for i in 0..n {
        for j in i + 1..n {
            t.push((i, j, Kind::Sym));
            if field == Field::Complex {
                t.push((i, j, Kind::Anti));
            }
        }
    }
    t
}

/// Coordinates of a Hermitian matrix.
pub fn svec(m: &Mat, field: Field) -> Vec<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(herm_coords(n, field));
    for i in 0..n {
        v.push(m[(i, i)].re);
    }
    for i in 0..n {
        for j in i + 1..n {
            let z = m[(i, j)];
            v.push(SQRT2 * z.re);
            if field == Field::Complex {
                v.push(SQRT2 * z.im);
            }
        }
    }
    v
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], n: usize, field: Field) -> Mat {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(v[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            let re = v[k] * INV_SQRT2;
            k += 1;
            let im = if field == Field::Complex {
                k += 1;
                v[k - 1] * INV_SQRT2
            } else {
                0.0
            };
            m[(i, j)] = C64::new(re, im);
            m[(j, i)] = C64::new(re, -im);
        }
    }
    m
}

/// Basis matrix number `k`.
pub fn basis_matrix(n: usize, entry: (usize, usize, Kind)) -> Mat {
    let (i, j, kind) = entry;
    let mut m = Mat::zeros(n, n);
    match kind {
        Kind::Diag => m[(i, i)] = C64::new(1.0, 0.0),
        Kind::Sym => {
            m[(i, j)] = C64::new(INV_SQRT2, 0.0);
            m[(j, i)] = C64::new(INV_SQRT2, 0.0);
        }
        Kind::Anti => {
            m[(i, j)] = C64::new(0.0, INV_SQRT2);
            m[(j, i)] = C64::new(0.0, -INV_SQRT2);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::*;
    use rand::SeedableRng;

    #[test]
    fn svec_is_an_isometry() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = herm_part(&ginibre(4, 4, &mut rng));
        let b = herm_part(&ginibre(4, 4, &mut rng));
        let (va, vb) = (svec(&a, Field::Complex), svec(&b, Field::Complex));
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        assert!((dot - inner(&a, &b)).abs() < 1e-12);
        assert!(max_abs_diff(&smat(&va, 4, Field::Complex), &a) < 1e-14);
    }

    #[test]
    fn basis_matches_coordinates() {
        for field in [Field::Real, Field::Complex] {
            let t = basis_table(3, field);
            assert_eq!(t.len(), herm_coords(3, field));
            for (k, &e) in t.iter().enumerate() {
                let v = svec(&basis_matrix(3, e), field);
                for (l, x) in v.iter().enumerate() {
                    assert!((x - if k == l { 1.0 } else { 0.0 }).abs() < 1e-15);
                }
            }
        }
    }
}
