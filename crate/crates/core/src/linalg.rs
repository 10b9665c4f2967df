//! Dense complex linear algebra helpers on top of `nalgebra`.
//!
//! Everything here works on `DMatrix<Complex64>`. The only non-trivial
//! routine is the ordered complex Schur decomposition used by the Riccati
//! solver; `nalgebra` computes an unordered Schur form and the reordering
//! is done here with adjacent Givens swaps.

use nalgebra::{Cholesky, DMatrix, Schur, SymmetricEigen, SVD};
use num_complex::Complex64 as C64;

use crate::error::{QlsError, Result};

pub type CMat = DMatrix<C64>;

const SCHUR_MAX_ITER: usize = 10_000;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> CMat {
    let n = values.len();
    CMat::from_fn(n, n, |i, j| if i == j { r(values[i]) } else { C64::new(0.0, 0.0) })
}

/// Build a matrix from real row-major entries.
pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_fn(rows, cols, |i, j| r(data[i * cols + j]))
}

/// Entrywise complex conjugate (the `#` operation on matrices).
pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

/// `½ (M + M†)`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `‖M − M†‖_F ≤ tol · max(1, ‖M‖_F)`.
pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && frobenius(&(m - m.adjoint())) <= tol * frobenius(m).max(1.0)
}

/// Eigenvalues of a Hermitian matrix in ascending order. Only the Hermitian
/// part of `m` is used.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn lambda_max(m: &CMat) -> f64 {
    *hermitian_eigenvalues(m).last().unwrap_or(&0.0)
}

pub fn lambda_min(m: &CMat) -> f64 {
    *hermitian_eigenvalues(m).first().unwrap_or(&0.0)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Eigenvalues of a general square complex matrix (diagonal of its Schur form).
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(QlsError::Shape(format!(
            "eigenvalues of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if !all_finite(m) {
        return Err(QlsError::Numerical("eigenvalues: non-finite input".into()));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| QlsError::Numerical("complex Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Complex Schur decomposition `M = Q T Q†` with the eigenvalues selected by
/// `select` moved to the leading block. Returns `(Q, T, k)` where `k` is the
/// number of selected eigenvalues.
pub fn ordered_schur(m: &CMat, select: impl Fn(C64) -> bool) -> Result<(CMat, CMat, usize)> {
    if !m.is_square() {
        return Err(QlsError::Shape("ordered_schur: matrix not square".into()));
    }
    if !all_finite(m) {
        return Err(QlsError::Numerical("ordered_schur: non-finite input".into()));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| QlsError::Numerical("complex Schur iteration did not converge".into()))?;
    let (mut q, mut t) = schur.unpack();
    let n = t.nrows();
    // clean the strictly lower part; nalgebra leaves round-off there
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }

    // Move each selected eigenvalue up to the next free leading slot.
    let mut head = 0;
    for k in 0..n {
        if select(t[(k, k)]) {
            let mut pos = k;
            while pos > head {
                swap_adjacent(&mut t, &mut q, pos - 1);
                pos -= 1;
            }
            head += 1;
        }
    }
    Ok((q, t, head))
}

/// Swap the diagonal entries `k` and `k+1` of upper-triangular `t`,
/// accumulating the rotation in `q`.
fn swap_adjacent(t: &mut CMat, q: &mut CMat, k: usize) {
    let n = t.nrows();
    let a = t[(k, k)];
    let b = t[(k + 1, k + 1)];
    let off = t[(k, k + 1)];
    // eigenvector of the 2x2 block for eigenvalue b
    let v0 = off;
    let v1 = b - a;
    let nv = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    if nv == 0.0 {
        return;
    }
    let (cs, sn) = (v0 / nv, v1 / nv);
    // G = [[cs, -conj(sn)], [sn, conj(cs)]], unitary with first column v/|v|
    // rows: T <- G† T
    for j in 0..n {
        let x = t[(k, j)];
        let y = t[(k + 1, j)];
        t[(k, j)] = cs.conj() * x + sn.conj() * y;
        t[(k + 1, j)] = -sn * x + cs * y;
    }
    // columns: T <- T G, Q <- Q G
    for i in 0..n {
        let x = t[(i, k)];
        let y = t[(i, k + 1)];
        t[(i, k)] = x * cs + y * sn;
        t[(i, k + 1)] = -x * sn.conj() + y * cs.conj();
        let x = q[(i, k)];
        let y = q[(i, k + 1)];
        q[(i, k)] = x * cs + y * sn;
        q[(i, k + 1)] = -x * sn.conj() + y * cs.conj();
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
    t[(k, k)] = b;
    t[(k + 1, k + 1)] = a;
}

/// Smallest eigenvalue `θ` of the Hermitian-definite pencil `A v = θ B v`
/// (`B > 0`), i.e. the largest `θ` with `A − θ B ⪰ 0`.
pub fn min_generalized_eigenvalue(a: &CMat, b: &CMat) -> Result<f64> {
    let b = hermitian_part(b);
    // complex Cholesky happily takes square roots of negative pivots
    if lambda_min(&b) <= 0.0 {
        return Err(QlsError::Numerical("pencil: B is not positive definite".into()));
    }
    let chol = Cholesky::new(b)
        .ok_or_else(|| QlsError::Numerical("pencil: B is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| QlsError::Numerical("pencil: singular Cholesky factor".into()))?;
    let reduced = &l_inv * hermitian_part(a) * l_inv.adjoint();
    Ok(lambda_min(&reduced))
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// `[A, B] = AB − BA`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}
