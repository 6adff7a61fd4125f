//! Dense complex matrix helpers on top of `nalgebra`.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Complex scalar.
pub type C64 = Complex64;
/// Dense complex matrix.
pub type Mat = DMatrix<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Kronecker product of a list, left to right.
pub fn kron_all(ms: &[&Mat]) -> Mat {
    let mut out = eye(1);
    for m in ms {
        out = kron(&out, m);
    }
    out
}

pub fn dagger(a: &Mat) -> Mat {
    a.adjoint()
}

/// `(a + a†)/2`.
pub fn herm_part(a: &Mat) -> Mat {
    (a + a.adjoint()) * c(0.5)
}

pub fn trace(a: &Mat) -> C64 {
    a.trace()
}

/// Real Hilbert–Schmidt inner product `Re tr(a† b)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn frobenius(a: &Mat) -> f64 {
    libm::sqrt(a.iter().map(|z| z.norm_sqr()).sum())
}

/// Largest entrywise deviation of `a` from Hermiticity.
pub fn hermiticity_error(a: &Mat) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let h = herm_part(a);
    let mut e = SymmetricEigen::new(h.clone());
    // The QR iteration can break down (NaN) on highly structured inputs
    // such as tensor products of maximally entangled states. A fixed
    // unitary conjugation removes the structure without changing the
    // spectrum.
    let mut seed = 0x5eed;
    while e.eigenvalues.iter().any(|v| !v.is_finite()) && seed < 0x5eed + 4 {
        let u = random_unitary(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut r = SymmetricEigen::new(herm_part(&(&u * &h * u.adjoint())));
        r.eigenvectors = u.adjoint() * r.eigenvectors;
        e = r;
        seed += 1;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let mut vecs = zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &e.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn eigvalsh(a: &Mat) -> Vec<f64> {
    eigh(a).0
}

pub fn min_eig(a: &Mat) -> f64 {
    eigvalsh(a).first().copied().unwrap_or(0.0)
}

pub fn max_eig(a: &Mat) -> f64 {
    eigvalsh(a).last().copied().unwrap_or(0.0)
}

/// Apply `f` to the spectrum of a Hermitian matrix.
pub fn spectral_map(a: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let (vals, vecs) = eigh(a);
    let mut scaled = vecs.clone();
    for (k, v) in vals.iter().enumerate() {
        let s = c(f(*v));
        for r in 0..scaled.nrows() {
            scaled[(r, k)] *= s;
        }
    }
    scaled * vecs.adjoint()
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm(a: &Mat) -> f64 {
    eigvalsh(a).iter().map(|v| v.abs()).sum()
}

/// Projection onto the PSD cone (clips negative eigenvalues).
pub fn psd_part(a: &Mat) -> Mat {
    spectral_map(a, |v| v.max(0.0))
}

/// Computational basis ket as a column.
pub fn ket(n: usize, i: usize) -> DVector<C64> {
    let mut v = DVector::zeros(n);
    v[i] = ONE;
    v
}

/// `|i⟩⟨j|` in dimension `n`.
pub fn unit(n: usize, i: usize, j: usize) -> Mat {
    let mut m = zeros(n, n);
    m[(i, j)] = ONE;
    m
}

/// Unnormalized maximally entangled projector `Σ_ij |ii⟩⟨jj|` on `d ⊗ d`.
pub fn phi_plus(d: usize) -> Mat {
    let mut m = zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = ONE;
        }
    }
    m
}

/// Outer product `|u⟩⟨v|`.
pub fn outer(u: &DVector<C64>, v: &DVector<C64>) -> Mat {
    u * v.adjoint()
}

/// True when every entry has negligible imaginary part.
pub fn is_real(a: &Mat) -> bool {
    a.iter().all(|z| z.im.abs() <= 1e-15 * (1.0 + z.re.abs()))
}

pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Mat::from_fn(rows, cols, |_, _| C64::new(normal(rng), normal(rng)))
}

/// Haar-random isometry with `rows ≥ cols` (columns orthonormal).
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rows, cols, rng);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut out = q.columns(0, cols).into_owned();
    for k in 0..cols {
        let d = r[(k, k)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..rows {
            out[(i, k)] *= ph;
        }
    }
    out
}

/// Haar-random unitary.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    random_isometry(n, n, rng)
}

/// Random density matrix of the given rank (induced measure).
pub fn random_density<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> Mat {
    let g = ginibre(n, rank.max(1), rng);
    let m = &g * g.adjoint();
    let t = m.trace().re;
    m / c(t)
}

/// `‖V†V − I‖_max`.
pub fn isometry_error(v: &Mat) -> f64 {
    max_abs_diff(&(v.adjoint() * v), &eye(v.ncols()))
}

/// Unitary factor of the polar decomposition of a square matrix.
pub fn polar_unitary(a: &Mat) -> Mat {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}
