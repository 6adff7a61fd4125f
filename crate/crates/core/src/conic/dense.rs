//! Blocked dense Cholesky factorization for the Schur complement system.
//!
//! Pivots that collapse relative to their original diagonal are replaced by
//! a huge value, which zeroes the corresponding solution component. This
//! is the usual way interior-point codes tolerate linearly dependent
//! equality constraints.

use alloc::vec;
use alloc::vec::Vec;

const BLOCK: usize = 96;
const HUGE: f64 = 1e64;

/// Lower-triangular factor `L` with `A ≈ L Lᵀ`, row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
    /// Number of pivots that were skipped.
    pub skipped: usize,
}

impl Cholesky {
    /// Factors the symmetric matrix whose lower triangle is stored row-major
    /// in `a` (the upper triangle is ignored and overwritten).
    pub fn factor(mut a: Vec<f64>, n: usize, rel_tol: f64) -> Self {
        assert_eq!(a.len(), n * n);
        let diag: Vec<f64> = (0..n).map(|i| a[i * n + i].abs()).collect();
        let scale = diag.iter().fold(0.0f64, |m, d| m.max(*d)).max(f64::MIN_POSITIVE);
        let mut skipped = 0;
        let mut k0 = 0;
        while k0 < n {
            let k1 = (k0 + BLOCK).min(n);
            // diagonal block and panel, unblocked within the current columns
            for j in k0..k1 {
                let mut d = a[j * n + j];
                for p in k0..j {
                    d -= a[j * n + p] * a[j * n + p];
                }
                let floor = rel_tol * diag[j].max(1e-30 * scale);
                let ljj = if d <= floor {
                    skipped += 1;
                    libm::sqrt(HUGE)
                } else {
                    libm::sqrt(d)
                };
                a[j * n + j] = ljj;
                let inv = 1.0 / ljj;
                let (head, tail) = a.split_at_mut((j + 1) * n);
                let rowj = &head[j * n + k0..j * n + j];
                for i in j + 1..n {
                    let rowi = &mut tail[(i - j - 1) * n..(i - j) * n];
                    let mut s = rowi[j];
                    for (p, &ljp) in rowj.iter().enumerate() {
                        s -= rowi[k0 + p] * ljp;
                    }
                    rowi[j] = s * inv;
                }
            }
            // trailing update A22 -= P Pᵀ on the lower triangle, block column
            // by block column
            if k1 < n {
                let kb = k1 - k0;
                let mut j0 = k1;
                while j0 < n {
                    let j1 = (j0 + BLOCK).min(n);
                    let rows = n - j0;
                    let cols = j1 - j0;
                    let ptr = a.as_mut_ptr();
                    // SAFETY: the read panels (columns k0..k1) and the written
                    // block (columns j0..j1, j0 ≥ k1) are disjoint column
                    // ranges of the same row-major buffer; all indices are in
                    // bounds since rows ≥ j0 and columns < n.
                    unsafe {
                        matrixmultiply::dgemm(
                            rows,
                            kb,
                            cols,
                            -1.0,
                            ptr.add(j0 * n + k0),
                            n as isize,
                            1,
                            ptr.add(j0 * n + k0),
                            1,
                            n as isize,
                            1.0,
                            ptr.add(j0 * n + j0),
                            n as isize,
                            1,
                        );
                    }
                    j0 = j1;
                }
            }
            k0 = k1;
        }
        for i in 0..n {
            for j in i + 1..n {
                a[i * n + j] = 0.0;
            }
        }
        Self { n, l: a, skipped }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            b[i] /= self.l[i * n + i];
            let bi = b[i];
            let row = &self.l[i * n..i * n + i];
            for (x, l) in b[..i].iter_mut().zip(row) {
                *x -= l * bi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// `y = A x` for a full row-major symmetric matrix stored as lower triangle.
pub fn sym_lower_matvec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = &a[i * n..i * n + i];
        let xi = x[i];
        let mut s = a[i * n + i] * xi;
        for ((yj, &v), &xj) in y[..i].iter_mut().zip(row).zip(&x[..i]) {
            s += v * xj;
            *yj += v * xi;
        }
        y[i] += s;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_spd(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| g[i * n + k] * g[j * n + k]).sum::<f64>();
            }
            a[i * n + i] += 1.0;
        }
        a
    }

    #[test]
    fn solves_spd_system_across_blocks() {
        let n = 230;
        let a = random_spd(n, 1);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = sym_lower_matvec(&a, n, &x);
        let ch = Cholesky::factor(a, n, 1e-14);
        assert_eq!(ch.skipped, 0);
        let sol = ch.solve(&b);
        let err = sol.iter().zip(&x).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn dependent_rows_are_skipped() {
        // rank-one-deficient: last row/column duplicates the first
        let n = 5;
        let mut a = random_spd(n, 2);
        for j in 0..n {
            a[(n - 1) * n + j] = a[j];
            a[j * n + n - 1] = a[j];
        }
        a[(n - 1) * n + n - 1] = a[0];
        let ch = Cholesky::factor(a.clone(), n, 1e-12);
        assert_eq!(ch.skipped, 1);
        let b = sym_lower_matvec(&a, n, &[1.0, 2.0, 3.0, 4.0, 0.0]);
        let x = ch.solve(&b);
        let r = sym_lower_matvec(&a, n, &x);
        let err = r.iter().zip(&b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(err < 1e-8, "{err}");
    }
}
