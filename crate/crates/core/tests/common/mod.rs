#![allow(dead_code)]

use qls_core::linalg::{self, CMat};
use qls_core::model::{self, QuantumLinearModel};
use qls_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| Complex64::new(gauss(rng), gauss(rng)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    linalg::hermitian_part(&random_matrix(rng, n, n))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = random_matrix(rng, n, n);
    (&a + a.transpose()).scale(0.5)
}

/// Random positive definite `P = [[A, B], [B#, A#]]`.
pub fn random_structured_p(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let p = model::doubled_up(&random_hermitian(rng, n), &random_symmetric(rng, n));
    let shift = (-linalg::lambda_min(&p)).max(0.0) + 0.1 + rng.random::<f64>();
    p + linalg::identity(2 * n).scale(shift)
}

pub fn random_model(rng: &mut ChaCha8Rng, n: usize) -> QuantumLinearModel {
    QuantumLinearModel {
        n,
        m1: random_hermitian(rng, n),
        m2: random_symmetric(rng, n),
        n1: random_matrix(rng, 1, n),
        n2: random_matrix(rng, 1, n),
        e1: random_matrix(rng, 1, n),
        e2: random_matrix(rng, 1, n),
    }
}

/// Random Hurwitz `F` (abscissa ≤ −0.2) with `B`, `C` of compatible shapes.
pub fn random_hurwitz_triple(rng: &mut ChaCha8Rng, k: usize, m: usize, p: usize) -> (CMat, CMat, CMat) {
    let mut f = random_matrix(rng, k, k);
    let a = qls_core::bounded_real::spectral_abscissa(&f).unwrap();
    let shift = a + 0.2 + rng.random::<f64>();
    for i in 0..k {
        f[(i, i)] -= Complex64::new(shift, 0.0);
    }
    (f, random_matrix(rng, k, m), random_matrix(rng, p, k))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
