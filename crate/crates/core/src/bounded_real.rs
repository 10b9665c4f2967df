//! Hurwitz test, H∞ norm, and the strict bounded real Riccati equation for
//! the scaled triple `(F, B̄, C̄)`.

use log::debug;
use nalgebra::LU;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QlsError, Result};
use crate::linalg::{self, CMat};
use crate::model::{self, DoubledMatrices, PerturbationSpec};

pub const DEFAULT_HINF_TOL: f64 = 1e-10;
/// Frequencies in the coarse grid that seeds the bisection bracket (per sign).
const BRACKET_GRID_POINTS: usize = 80;
const MAX_BISECTION_ITERS: usize = 200;
const MAX_BRACKET_EXPANSIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HinfResult {
    pub norm: f64,
    pub peak_frequency: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: CMat,
    pub residual: f64,
    pub closed_loop_abscissa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QmiCheck {
    pub w: CMat,
    pub lambda_max: f64,
}

/// The five scaling constants `τ1..τ5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scalings(pub [f64; 5]);

impl Scalings {
    pub fn tau(&self, k: usize) -> f64 {
        self.0[k - 1]
    }

    pub fn tau_sq(&self, k: usize) -> f64 {
        self.0[k - 1] * self.0[k - 1]
    }
}

/// `max Re λ(F)`.
pub fn spectral_abscissa(f: &CMat) -> Result<f64> {
    let eig = linalg::eigenvalues(f)?;
    Ok(eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// `σmax(C (iωI − F)⁻¹ B)`.
pub fn transfer_gain(f: &CMat, b: &CMat, c: &CMat, omega: f64) -> f64 {
    let n = f.nrows();
    let mut resolvent = -f.clone();
    for i in 0..n {
        resolvent[(i, i)] += C64::new(0.0, omega);
    }
    match LU::new(resolvent).solve(b) {
        Some(x) => linalg::spectral_norm(&(c * x)),
        None => f64::INFINITY,
    }
}

/// Frequencies characteristic of `F`: the pole frequencies and a symmetric
/// log-spaced grid spanning three decades around the pole magnitudes.
fn frequency_grid(f: &CMat, points_per_side: usize) -> Result<Vec<f64>> {
    let eig = linalg::eigenvalues(f)?;
    let mags: Vec<f64> = eig.iter().map(|z| z.norm()).filter(|m| *m > 0.0).collect();
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min).min(1.0) * 1e-3;
    let hi = mags.iter().copied().fold(0.0, f64::max).max(1.0) * 1e3;
    let mut grid = vec![0.0];
    grid.extend(eig.iter().map(|z| z.im));
    let (llo, lhi) = (lo.log10(), hi.log10());
    let m = points_per_side.max(2);
    for k in 0..m {
        let w = 10f64.powf(llo + (lhi - llo) * k as f64 / (m - 1) as f64);
        grid.push(w);
        grid.push(-w);
    }
    Ok(grid)
}

fn grid_max(f: &CMat, b: &CMat, c: &CMat, grid: &[f64]) -> (f64, f64) {
    grid.par_iter()
        .map(|&w| (transfer_gain(f, b, c, w), w))
        .reduce(|| (f64::NEG_INFINITY, 0.0), |x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x })
}

/// Dense frequency sweep of `σmax(C(iωI−F)⁻¹B)` over `points` log-spaced
/// frequencies (split between both signs) plus the pole frequencies, followed
/// by golden-section polishing around the best few grid maxima. Independent
/// of the Hamiltonian route used by [`hinf_norm`].
pub fn frequency_sweep(f: &CMat, b: &CMat, c: &CMat, points: usize) -> Result<(f64, f64)> {
    let mut grid = frequency_grid(f, points / 2)?;
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let gains: Vec<f64> = grid.par_iter().map(|&w| transfer_gain(f, b, c, w)).collect();

    // local maxima on the grid, best first
    let mut peaks: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let left = if i > 0 { gains[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < grid.len() { gains[i + 1] } else { f64::NEG_INFINITY };
            gains[i] >= left && gains[i] >= right
        })
        .collect();
    peaks.sort_by(|&x, &y| gains[y].total_cmp(&gains[x]));
    peaks.truncate(8);

    let mut best = (f64::NEG_INFINITY, 0.0);
    for (&g, &w) in gains.iter().zip(&grid) {
        if g > best.0 {
            best = (g, w);
        }
    }
    for i in peaks {
        let a = if i > 0 { grid[i - 1] } else { grid[i] };
        let z = if i + 1 < grid.len() { grid[i + 1] } else { grid[i] };
        let (g, w) = golden_max(|w| transfer_gain(f, b, c, w), a, z, 80);
        if g > best.0 {
            best = (g, w);
        }
    }
    Ok(best)
}

fn golden_max(obj: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = obj(x1);
    let mut f2 = obj(x2);
    for _ in 0..iters {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = obj(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = obj(x1);
        }
    }
    if f1 > f2 {
        (f1, x1)
    } else {
        (f2, x2)
    }
}

/// `[[F, BB†/γ], [−C†C/γ, −F†]]`.
fn hamiltonian(f: &CMat, bbh: &CMat, chc: &CMat, level: f64) -> CMat {
    let n = f.nrows();
    let mut h = linalg::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(f);
    h.view_mut((0, n), (n, n)).copy_from(&bbh.unscale(level));
    h.view_mut((n, 0), (n, n)).copy_from(&(-chc.unscale(level)));
    h.view_mut((n, n), (n, n)).copy_from(&(-f.adjoint()));
    h
}

/// Probe the level `γ̂`: returns the best gain found at candidate crossing
/// frequencies (`≥ γ̂` means `γ̂` is not an upper bound).
fn probe_level(f: &CMat, b: &CMat, c: &CMat, bbh: &CMat, chc: &CMat, level: f64, tol_imag: f64) -> Result<(f64, f64)> {
    let h = hamiltonian(f, bbh, chc, level);
    let eig = linalg::eigenvalues(&h)?;
    let thresh = tol_imag.max(1e-8 * linalg::frobenius(&h));
    let mut freqs: Vec<f64> = eig.iter().filter(|z| z.re.abs() <= thresh).map(|z| z.im).collect();
    if freqs.is_empty() {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    freqs.sort_by(f64::total_cmp);
    let mut probes = freqs.clone();
    probes.extend(freqs.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let mut best = (f64::NEG_INFINITY, 0.0);
    for w in probes {
        let g = transfer_gain(f, b, c, w);
        if g > best.0 {
            best = (g, w);
        }
    }
    Ok(best)
}

/// H∞ norm of `C (sI − F)⁻¹ B` by bisection on the Hamiltonian imaginary-axis
/// test. `tol` is the relative bracket width at termination.
pub fn hinf_norm(f: &CMat, b: &CMat, c: &CMat, tol: f64) -> Result<HinfResult> {
    let n = f.nrows();
    if !f.is_square() || b.nrows() != n || c.ncols() != n {
        return Err(QlsError::Shape(format!(
            "hinf_norm: F {}x{}, B {}x{}, C {}x{}",
            f.nrows(),
            f.ncols(),
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let abscissa = spectral_abscissa(f)?;
    if abscissa >= 0.0 {
        return Err(QlsError::NotHurwitz { abscissa });
    }
    let grid = frequency_grid(f, BRACKET_GRID_POINTS)?;
    let (glb, gw) = grid_max(f, b, c, &grid);
    if !glb.is_finite() {
        return Err(QlsError::Bisection("non-finite gain on frequency grid".into()));
    }
    if glb == 0.0 {
        return Ok(HinfResult { norm: 0.0, peak_frequency: 0.0, iterations: 0 });
    }

    let bbh = b * b.adjoint();
    let chc = c.adjoint() * c;
    let tol_imag = 1e-9 * linalg::frobenius(f);
    let (mut lo, mut peak) = (glb, gw);
    let mut hi = 2.0 * glb + 1e-12;
    let mut iterations = 0;

    let mut expansions = 0;
    loop {
        let (g, w) = probe_level(f, b, c, &bbh, &chc, hi, tol_imag)?;
        if g > lo {
            lo = g;
            peak = w;
        }
        if g < hi {
            break;
        }
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS {
            return Err(QlsError::Bisection("could not find an upper bound".into()));
        }
        hi *= 2.0;
    }

    while hi - lo > tol * (1.0 + lo) {
        iterations += 1;
        if iterations > MAX_BISECTION_ITERS {
            return Err(QlsError::Bisection(format!("no convergence, bracket [{lo}, {hi}]")));
        }
        let mid = 0.5 * (lo + hi);
        let (g, w) = probe_level(f, b, c, &bbh, &chc, mid, tol_imag)?;
        if g > lo {
            lo = g;
            peak = w;
        }
        if g < mid {
            hi = mid;
        } else if lo >= hi {
            // the gain probe overshot the old upper bound; re-establish it
            hi = lo * (1.0 + tol);
        }
    }
    debug!("hinf_norm: [{lo:.12e}, {hi:.12e}] after {iterations} iterations");
    Ok(HinfResult { norm: 0.5 * (lo + hi), peak_frequency: peak, iterations })
}

/// Solve `A† X + X A = −Q` by Kronecker vectorization (small dense systems).
pub fn solve_lyapunov(a: &CMat, q: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let eye = linalg::identity(n);
    let op = linalg::kron(&eye, &a.adjoint()) + linalg::kron(&a.transpose(), &eye);
    let rhs = CMat::from_iterator(n * n, 1, q.iter().map(|z| -z));
    let x = LU::new(op)
        .solve(&rhs)
        .ok_or_else(|| QlsError::Numerical("singular Lyapunov operator".into()))?;
    Ok(CMat::from_iterator(n, n, x.iter().copied()))
}

fn riccati_residual_matrix(f: &CMat, r: &CMat, q: &CMat, p: &CMat) -> CMat {
    f.adjoint() * p + p * f + p * r * p + q
}

/// Frobenius norm of `F†P + PF + 2PBB†P + ½C†C + εI`.
pub fn riccati_residual(f: &CMat, b: &CMat, c: &CMat, eps: f64, p: &CMat) -> f64 {
    let (r, q) = riccati_terms(f, b, c, eps);
    linalg::frobenius(&riccati_residual_matrix(f, &r, &q, p))
}

fn riccati_terms(f: &CMat, b: &CMat, c: &CMat, eps: f64) -> (CMat, CMat) {
    let r = (b * b.adjoint()).scale(2.0);
    let q = (c.adjoint() * c).scale(0.5) + linalg::identity(f.nrows()).scale(eps);
    (r, q)
}

/// Stabilizing solution of `F†P + PF + 2PBB†P + ½C†C + εI = 0` from the
/// stable invariant subspace of the Hamiltonian `[[F, 2BB†], [−Q, −F†]]`,
/// polished by Newton steps.
pub fn solve_sbr_riccati(f: &CMat, b: &CMat, c: &CMat, eps: f64, tol_res: f64) -> Result<RiccatiSolution> {
    let n = f.nrows();
    if !(eps > 0.0) {
        return Err(QlsError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let infeasible = || -> QlsError {
        let norm = hinf_norm(f, b, c, 1e-8).map(|h| h.norm).unwrap_or(f64::INFINITY);
        QlsError::RiccatiInfeasible { norm }
    };
    let (r, q) = riccati_terms(f, b, c, eps);
    let mut h = linalg::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(f);
    h.view_mut((0, n), (n, n)).copy_from(&r);
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q));
    h.view_mut((n, n), (n, n)).copy_from(&(-f.adjoint()));

    let axis_tol = 1e-9 * linalg::frobenius(&h).max(1.0);
    let eig = linalg::eigenvalues(&h)?;
    if eig.iter().any(|z| z.re.abs() <= axis_tol) {
        return Err(infeasible());
    }
    let (qs, _, k) = linalg::ordered_schur(&h, |z| z.re < 0.0)?;
    if k != n {
        return Err(infeasible());
    }
    let u1 = qs.view((0, 0), (n, n)).into_owned();
    let u2 = qs.view((n, 0), (n, n)).into_owned();
    // P U1 = U2  ⇔  U1† P† = U2†
    let p_adj = LU::new(u1.adjoint()).solve(&u2.adjoint()).ok_or_else(infeasible)?;
    let mut p = linalg::hermitian_part(&p_adj.adjoint());

    let mut residual = linalg::frobenius(&riccati_residual_matrix(f, &r, &q, &p));
    for _ in 0..4 {
        if residual <= 0.01 * tol_res {
            break;
        }
        let closed = f + &r * &p;
        let res = riccati_residual_matrix(f, &r, &q, &p);
        let Ok(delta) = solve_lyapunov(&closed, &res) else { break };
        let candidate = linalg::hermitian_part(&(&p + delta));
        let cand_res = linalg::frobenius(&riccati_residual_matrix(f, &r, &q, &candidate));
        if cand_res < residual {
            p = candidate;
            residual = cand_res;
        } else {
            break;
        }
    }

    let closed_loop_abscissa = spectral_abscissa(&(f + &r * &p))?;
    if closed_loop_abscissa >= 0.0 || linalg::lambda_min(&p) <= 0.0 {
        return Err(infeasible());
    }
    if residual > tol_res {
        return Err(QlsError::Numerical(format!(
            "Riccati residual {residual:.3e} exceeds tolerance {tol_res:.3e}"
        )));
    }
    Ok(RiccatiSolution { p, residual, closed_loop_abscissa })
}

/// `½ (P + Σ P# Σ)`: projects onto the doubled-up block structure.
pub fn quantum_symmetrize(p: &CMat) -> CMat {
    let sigma = model::block_swap(p.nrows() / 2);
    (p + &sigma * linalg::conj(p) * &sigma).scale(0.5)
}

/// Left-hand side of the quadratic matrix inequality
///
/// `F†P + PF + P(2δ2(1/τ1²+1/τ4²) JẼ†ẼJ + (2/τ3²) JÑ†ÑJ)P
///   + ((τ3²+τ4²+τ5²)/2γ²) Ẽ†Ẽ + ((τ1²+τ2²)/2) Ñ†Ñ`
///
/// assembled term by term, and its largest eigenvalue.
pub fn check_qmi(p: &CMat, d: &DoubledMatrices, tau: &Scalings, pert: &PerturbationSpec) -> QmiCheck {
    let modes = d.m.nrows() / 2;
    let f = model::build_f_from(d, modes);
    let j = model::signature(modes);
    let ee = d.e_tilde.adjoint() * &d.e_tilde;
    let nn = d.n_tilde.adjoint() * &d.n_tilde;
    let g2 = pert.gamma * pert.gamma;
    let inner = (&j * &ee * &j).scale(2.0 * pert.delta2 * (1.0 / tau.tau_sq(1) + 1.0 / tau.tau_sq(4)))
        + (&j * &nn * &j).scale(2.0 / tau.tau_sq(3));
    let w = f.adjoint() * p
        + p * &f
        + p * inner * p
        + ee.scale((tau.tau_sq(3) + tau.tau_sq(4) + tau.tau_sq(5)) / (2.0 * g2))
        + nn.scale((tau.tau_sq(1) + tau.tau_sq(2)) / 2.0);
    let w = linalg::hermitian_part(&w);
    let lambda_max = linalg::lambda_max(&w);
    QmiCheck { w, lambda_max }
}
