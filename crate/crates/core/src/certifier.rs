//! Robust mean-square stability certificates.
//!
//! Pipeline: Hurwitz test → scaling search → Riccati solve → structure
//! projection → τ2, τ5 → decay rate `c` → `μ`, `λ̃`, `λ` → `(c1, c2, c3)`.
//!
//! The Riccati equation is solved for the shifted matrix `F + (α/2)I`, which
//! is the same as asking for `F†P + PF + 2PB̄B̄†P + ½C̄†C̄ = −αP − εI`. With
//! `α = 0` and a tiny `ε` the certificate would be valid but its decay rate
//! would be about `ε`; the shift and `ε` are therefore searched to maximize
//! the final `c`.

use log::{debug, info, warn};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bounded_real::{self, QmiCheck, Scalings, DEFAULT_HINF_TOL};
use crate::error::{QlsError, Result};
use crate::io::{cmat_serde, complex_serde};
use crate::linalg::{self, CMat};
use crate::model::{self, DoubledMatrices, PerturbationSpec, QuantumLinearModel};
use crate::scaling_search::{self, ScaledProblem, ScalingTriple, SearchOptions};

/// Relative tolerance for "⪯ 0" checks on certificate matrices.
pub const TOL_NEG: f64 = 1e-9;
/// Relative Riccati residual bound (against `‖C̄†C̄‖_F`).
pub const RICCATI_REL_TOL: f64 = 1e-8;

const ALPHA_FRACTIONS: [f64; 9] = [0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 0.95];
const EPS_FRACTIONS: [f64; 6] = [1e-8, 1e-6, 1e-4, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tau25Policy {
    /// Each added term gets spectral norm at most `η/4`.
    #[default]
    Default,
    /// Coordinate golden-section on `(log τ2², log τ5²)` minimizing `c3`.
    OptimizeC3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub search: SearchOptions,
    pub policy: Tau25Policy,
    /// Skip the search and use these scalings.
    pub pinned: Option<ScalingTriple>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { search: SearchOptions::default(), policy: Tau25Policy::Default, pinned: None }
    }
}

/// Which Riccati equation produced `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiccatiVariant {
    /// Plain equation, solution Σ-symmetrized.
    Plain,
    /// `B̄` and `C̄` augmented with their Σ-conjugates.
    Invariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub riccati_residual: f64,
    pub riccati_eps: f64,
    pub decay_shift: f64,
    pub closed_loop_abscissa: f64,
    pub riccati_variant: RiccatiVariant,
    /// `‖P_raw − P_sym‖_F / ‖P_raw‖_F` for the plain Riccati solution.
    pub structure_deviation: f64,
    pub base_qmi_eta: f64,
    /// `λmax(W + c2·P)`; ≤ 0 up to rounding.
    pub decay_check: f64,
    pub search_evaluations: usize,
    /// The alternative closed form `−½ẼΣJPJẼᵀ`, kept for comparison with `mu`.
    #[serde(with = "complex_serde")]
    pub mu_closed_form_alt: C64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub feasible: bool,
    pub tau: [f64; 5],
    #[serde(rename = "P", with = "cmat_serde")]
    pub p: CMat,
    #[serde(with = "complex_serde")]
    pub mu: C64,
    pub lambda_tilde: f64,
    pub lambda: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub hinf: f64,
    pub qmi_lambda_max: f64,
    pub diagnostics: Diagnostics,
}

impl StabilityCertificate {
    pub fn scalings(&self) -> Scalings {
        Scalings(self.tau)
    }

    pub fn triple(&self) -> ScalingTriple {
        ScalingTriple { tau1: self.tau[0], tau3: self.tau[2], tau4: self.tau[3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InfeasibleReason {
    NonHurwitz { abscissa: f64 },
    NoFeasibleScalings { best_norm: f64 },
    RiccatiFailure { detail: String },
}

impl std::fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfeasibleReason::NonHurwitz { abscissa } => {
                write!(f, "non-Hurwitz: {} (spectral abscissa {abscissa:.6e})", scaling_search::HURWITZ_FAILED)
            }
            InfeasibleReason::NoFeasibleScalings { best_norm } => write!(
                f,
                "no feasible scalings found (best norm {best_norm:.6}); not a proof of instability"
            ),
            InfeasibleReason::RiccatiFailure { detail } => write!(f, "Riccati failure: {detail}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertifyOutcome {
    Certified(Box<StabilityCertificate>),
    Infeasible(InfeasibleReason),
}

impl CertifyOutcome {
    pub fn certificate(&self) -> Option<&StabilityCertificate> {
        match self {
            CertifyOutcome::Certified(c) => Some(c),
            CertifyOutcome::Infeasible(_) => None,
        }
    }
}

/// `−½[ζ,[V,ζ]]` for `V = x†Px`, `ζ = Ẽx`, in closed form: `Ẽ J Σ Pᵀ J Ẽᵀ`.
pub fn compute_mu(e_tilde: &CMat, p: &CMat) -> Result<C64> {
    check_row(e_tilde, p, "compute_mu")?;
    let k = p.nrows() / 2;
    let j = model::signature(k);
    let sigma = model::block_swap(k);
    Ok((e_tilde * &j * &sigma * p.transpose() * &j * e_tilde.transpose())[(0, 0)])
}

/// `−½ ẼΣJPJẼᵀ`, the alternative closed form. Equals `½·compute_mu(P#)`;
/// kept only for the comparison reported in the diagnostics.
pub fn compute_mu_alt(e_tilde: &CMat, p: &CMat) -> Result<C64> {
    check_row(e_tilde, p, "compute_mu_alt")?;
    let k = p.nrows() / 2;
    let j = model::signature(k);
    let sigma = model::block_swap(k);
    Ok((e_tilde * &sigma * &j * p * &j * e_tilde.transpose())[(0, 0)] * -0.5)
}

fn check_row(e_tilde: &CMat, p: &CMat, what: &str) -> Result<()> {
    if e_tilde.nrows() != 1 || e_tilde.ncols() != p.nrows() || !p.is_square() || p.nrows() % 2 != 0 {
        return Err(QlsError::Shape(format!(
            "{what}: Ẽ is {}x{}, P is {}x{}",
            e_tilde.nrows(),
            e_tilde.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    Ok(())
}

fn selector(n: usize, upper: bool) -> CMat {
    let mut v = vec![0.0; 2 * n];
    let range = if upper { 0..n } else { n..2 * n };
    for i in range {
        v[i] = 1.0;
    }
    linalg::diag(&v)
}

/// `tr(P J N† [I 0; 0 0] N J)`.
pub fn compute_lambda_tilde(d: &DoubledMatrices, p: &CMat) -> f64 {
    lambda_tilde_with(d, p, true)
}

/// `tr(P J N† [0 0; 0 I] N J)`: the constant produced by `ℒ_{L1}(x†Px)` for
/// any Hermitian `P`. Coincides with [`compute_lambda_tilde`] when `P` has
/// the doubled-up block structure.
pub fn compute_lambda_tilde_general(d: &DoubledMatrices, p: &CMat) -> f64 {
    lambda_tilde_with(d, p, false)
}

fn lambda_tilde_with(d: &DoubledMatrices, p: &CMat, upper: bool) -> f64 {
    let k = p.nrows() / 2;
    let j = model::signature(k);
    let sel = selector(d.n.nrows() / 2, upper);
    (p * &j * d.n.adjoint() * sel * &d.n * &j).trace().re
}

/// `λ = λ̃ + (δ3/(2τ2²) + δ3/(2τ5²))|μ|² + ((τ3²+τ4²+τ5²)/2)δ1`.
pub fn assemble_lambda(lambda_tilde: f64, mu: C64, tau: &Scalings, pert: &PerturbationSpec) -> f64 {
    lambda_tilde
        + (pert.delta3 / (2.0 * tau.tau_sq(2)) + pert.delta3 / (2.0 * tau.tau_sq(5))) * mu.norm_sqr()
        + 0.5 * (tau.tau_sq(3) + tau.tau_sq(4) + tau.tau_sq(5)) * pert.delta1
}

/// Largest `c` with `W + cP ⪯ 0`.
pub fn compute_c(w_full: &CMat, p: &CMat) -> Result<f64> {
    let c = linalg::min_generalized_eigenvalue(&(-w_full), p)?;
    if !(c > 0.0) {
        return Err(QlsError::QmiInfeasible(c));
    }
    Ok(c)
}

fn norm_or_tiny(m: &CMat) -> f64 {
    linalg::spectral_norm(m).max(f64::MIN_POSITIVE.sqrt())
}

/// `(τ2, τ5)` for a base QMI margin `η > 0` under the given policy.
pub fn select_tau25(
    d: &DoubledMatrices,
    pert: &PerturbationSpec,
    p: &CMat,
    triple: &ScalingTriple,
    policy: Tau25Policy,
) -> Result<(f64, f64)> {
    let base = bounded_real::check_qmi(p, d, &with_tau25(triple, 0.0, 0.0), pert);
    let eta = -base.lambda_max;
    if !(eta > 0.0) {
        return Err(QlsError::QmiInfeasible(base.lambda_max));
    }
    let nn = norm_or_tiny(&(d.n_tilde.adjoint() * &d.n_tilde));
    let ee = norm_or_tiny(&(d.e_tilde.adjoint() * &d.e_tilde));
    let g2 = pert.gamma * pert.gamma;
    let t2 = eta / (2.0 * nn);
    let t5 = (eta / (2.0 * nn)).min(eta * g2 / (2.0 * ee));
    match policy {
        Tau25Policy::Default => Ok((t2.sqrt(), t5.sqrt())),
        Tau25Policy::OptimizeC3 => {
            let upper = [(2.0 * eta / nn).log10(), (2.0 * eta * g2 / ee).log10()];
            optimize_c3(d, pert, p, triple, [t2.log10(), t5.log10()], upper)
        }
    }
}

fn with_tau25(t: &ScalingTriple, tau2: f64, tau5: f64) -> Scalings {
    Scalings([t.tau1, tau2, t.tau3, t.tau4, tau5])
}

/// `c3` for given `(log τ2², log τ5²)`, or `+∞` when the QMI fails.
fn c3_objective(d: &DoubledMatrices, pert: &PerturbationSpec, p: &CMat, triple: &ScalingTriple, x: [f64; 2]) -> f64 {
    let tau = with_tau25(triple, 10f64.powf(0.5 * x[0]), 10f64.powf(0.5 * x[1]));
    let w = bounded_real::check_qmi(p, d, &tau, pert);
    if !(w.lambda_max < 0.0) {
        return f64::INFINITY;
    }
    let Ok(c) = compute_c(&w.w, p) else { return f64::INFINITY };
    let mu = compute_mu(&d.e_tilde, p).unwrap_or_default();
    let lt = compute_lambda_tilde_general(d, p).max(0.0);
    assemble_lambda(lt, mu, &tau, pert) / (c * linalg::lambda_min(p))
}

fn optimize_c3(
    d: &DoubledMatrices,
    pert: &PerturbationSpec,
    p: &CMat,
    triple: &ScalingTriple,
    start: [f64; 2],
    upper: [f64; 2],
) -> Result<(f64, f64)> {
    let mut x = start;
    let mut best = c3_objective(d, pert, p, triple, x);
    for _ in 0..3 {
        for k in 0..2 {
            let lo = x[k].min(start[k]) - 8.0;
            let hi = upper[k];
            let line = |v: f64| {
                let mut y = x;
                y[k] = v;
                c3_objective(d, pert, p, triple, y)
            };
            let (v, val) = golden_min(line, lo, hi, 1e-7);
            if val < best {
                best = val;
                x[k] = v;
            }
        }
    }
    Ok((10f64.powf(0.5 * x[0]), 10f64.powf(0.5 * x[1])))
}

fn golden_min(obj: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
    let (mut f1, mut f2) = (obj(x1), obj(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = obj(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = obj(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Constants derived from a fixed `(P, τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constants {
    pub qmi: QmiCheck,
    pub c: f64,
    pub mu: C64,
    pub lambda_tilde: f64,
    pub lambda: f64,
    pub c1: f64,
    pub c3: f64,
}

pub fn derive_constants(
    d: &DoubledMatrices,
    pert: &PerturbationSpec,
    p: &CMat,
    tau: &Scalings,
    warnings: &mut Vec<String>,
) -> Result<Constants> {
    let qmi = bounded_real::check_qmi(p, d, tau, pert);
    if !(qmi.lambda_max < 0.0) {
        return Err(QlsError::QmiInfeasible(qmi.lambda_max));
    }
    let c = compute_c(&qmi.w, p)?;
    let mu = compute_mu(&d.e_tilde, p)?;
    let mut lambda_tilde = compute_lambda_tilde_general(d, p);
    let scale = linalg::frobenius(p) * linalg::frobenius(&d.n).powi(2);
    if lambda_tilde < 0.0 {
        if lambda_tilde < -1e-12 * scale.max(1.0) {
            return Err(QlsError::Numerical(format!("negative trace constant λ̃ = {lambda_tilde:e}")));
        }
        warnings.push(format!("λ̃ = {lambda_tilde:e} clamped to 0"));
        lambda_tilde = 0.0;
    }
    let lambda = assemble_lambda(lambda_tilde, mu, tau, pert);
    let (lmin, lmax) = (linalg::lambda_min(p), linalg::lambda_max(p));
    Ok(Constants { qmi, c, mu, lambda_tilde, lambda, c1: lmax / lmin, c3: lambda / (c * lmin) })
}

/// One certificate attempt for a fixed triple, shift `α` and `ε`.
#[derive(Debug, Clone)]
struct Attempt {
    p: CMat,
    tau: Scalings,
    consts: Constants,
    residual: f64,
    closed_loop: f64,
    variant: RiccatiVariant,
    deviation: f64,
    eta: f64,
    alpha: f64,
    eps: f64,
    warnings: Vec<String>,
}

fn attempt(
    problem: &ScaledProblem,
    triple: &ScalingTriple,
    bc: &(CMat, CMat),
    alpha: f64,
    eps: f64,
    policy: Tau25Policy,
) -> Result<Attempt> {
    let (b, c) = bc;
    let d = &problem.doubled;
    let n2 = problem.f.nrows();
    let shifted = &problem.f + linalg::identity(n2).scale(0.5 * alpha);
    let tol_res = RICCATI_REL_TOL * linalg::frobenius(&(c.adjoint() * c)).max(1e-300);
    let sol = bounded_real::solve_sbr_riccati(&shifted, b, c, eps, tol_res)?;

    let mut warnings = Vec::new();
    let p_sym = bounded_real::quantum_symmetrize(&sol.p);
    let deviation = linalg::frobenius(&(&sol.p - &p_sym)) / linalg::frobenius(&sol.p);
    let base = |p: &CMat| bounded_real::check_qmi(p, d, &with_tau25(triple, 0.0, 0.0), &problem.pert);
    let ok = |p: &CMat| linalg::lambda_min(p) > 0.0 && base(p).lambda_max < 0.0;
    // V = x†Px only sees the Σ-symmetric part of P, so an unstructured P is
    // never a certificate. If symmetrizing breaks the inequality, solve the
    // Riccati equation with Σ-augmented B and C: its stabilizing solution is
    // Σ-invariant and dominates the original inequality.
    let (p, variant, residual, closed_loop) = if ok(&p_sym) {
        (p_sym, RiccatiVariant::Plain, sol.residual, sol.closed_loop_abscissa)
    } else {
        let sigma = model::block_swap(n2 / 2);
        let mut b_aug = linalg::zeros(n2, 2 * b.ncols());
        b_aug.view_mut((0, 0), (n2, b.ncols())).copy_from(b);
        b_aug.view_mut((0, b.ncols()), (n2, b.ncols())).copy_from(&(&sigma * linalg::conj(b)));
        let mut c_aug = linalg::zeros(2 * c.nrows(), n2);
        c_aug.view_mut((0, 0), (c.nrows(), n2)).copy_from(c);
        c_aug.view_mut((c.nrows(), 0), (c.nrows(), n2)).copy_from(&(linalg::conj(c) * &sigma));
        let inv = bounded_real::solve_sbr_riccati(&shifted, &b_aug, &c_aug, eps, tol_res)?;
        let p_inv = bounded_real::quantum_symmetrize(&inv.p);
        if !ok(&p_inv) {
            let worst = if linalg::lambda_min(&p_inv) > 0.0 { base(&p_inv).lambda_max } else { f64::INFINITY };
            return Err(QlsError::QmiInfeasible(worst));
        }
        warnings.push(format!(
            "symmetrized P fails the inequality (structure deviation {deviation:.3e}); used the Σ-invariant Riccati solution"
        ));
        (p_inv, RiccatiVariant::Invariant, inv.residual, inv.closed_loop_abscissa)
    };
    let eta = -base(&p).lambda_max;
    let (tau2, tau5) = select_tau25(d, &problem.pert, &p, triple, policy)?;
    let tau = with_tau25(triple, tau2, tau5);
    let consts = derive_constants(d, &problem.pert, &p, &tau, &mut warnings)?;
    if consts.c3 > 1e8 {
        warnings.push(format!("c3 = {:.3e} is very large (small QMI margin)", consts.c3));
    }
    Ok(Attempt {
        p,
        tau,
        consts,
        residual,
        closed_loop,
        variant,
        deviation,
        eta,
        alpha,
        eps,
        warnings,
    })
}

fn better_attempt(cur: Option<Attempt>, cand: Result<Attempt>) -> Option<Attempt> {
    match (cur, cand) {
        (None, Ok(a)) => Some(a),
        (Some(c), Ok(a)) if a.consts.c > c.consts.c => Some(a),
        (cur, Err(e)) => {
            debug!("certificate attempt rejected: {e}");
            cur
        }
        (cur, _) => cur,
    }
}

/// Search `(α, ε)` for the largest decay rate `c`.
fn best_attempt(problem: &ScaledProblem, triple: &ScalingTriple, policy: Tau25Policy) -> Result<Attempt> {
    let bc = problem.bar_matrices(triple)?;
    let alpha_max = -2.0 * problem.abscissa;
    let q_scale = linalg::spectral_norm(&(bc.1.adjoint() * &bc.1)).max(1e-12);
    let run = |alpha: f64, eps: f64| attempt(problem, triple, &bc, alpha, eps, policy);

    let mut best: Option<Attempt> = None;
    let mut last_err = None;
    for &fa in &ALPHA_FRACTIONS {
        for &fe in &EPS_FRACTIONS {
            let r = run(fa * alpha_max, fe * q_scale);
            if let Err(e) = &r {
                last_err = Some(e.to_string());
            }
            best = better_attempt(best, r);
        }
    }
    let Some(mut best) = best else {
        return Err(QlsError::Numerical(last_err.unwrap_or_else(|| "no Riccati solution".into())));
    };

    // golden refinement: α on [0, 0.99 α_max], then log ε
    for _ in 0..2 {
        let eps = best.eps;
        let obj = |a: f64| run(a, eps).map(|x| -x.consts.c).unwrap_or(f64::INFINITY);
        let (a, _) = golden_min(obj, 0.0, 0.99 * alpha_max, 1e-6 * alpha_max.max(1e-12));
        best = better_attempt(Some(best), run(a, eps)).expect("incumbent kept");
        let alpha = best.alpha;
        let lo = (q_scale * 1e-10).log10();
        let hi = (q_scale * 10.0).log10();
        let obj = |le: f64| run(alpha, 10f64.powf(le)).map(|x| -x.consts.c).unwrap_or(f64::INFINITY);
        let (le, _) = golden_min(obj, lo, hi, 1e-6);
        best = better_attempt(Some(best), run(alpha, 10f64.powf(le))).expect("incumbent kept");
    }
    Ok(best)
}

pub fn certify(model: &QuantumLinearModel, pert: &PerturbationSpec, opts: &CertifyOptions) -> Result<CertifyOutcome> {
    let problem = match ScaledProblem::new(model, pert) {
        Ok(p) => p,
        Err(QlsError::NotHurwitz { abscissa }) => {
            return Ok(CertifyOutcome::Infeasible(InfeasibleReason::NonHurwitz { abscissa }))
        }
        Err(e) => return Err(e),
    };

    let (triple, hinf, evaluations) = match opts.pinned {
        Some(t) => {
            let t = ScalingTriple::new(t.tau1, t.tau3, t.tau4)?;
            let h = problem.evaluate(&t)?;
            if !(h < 1.0 - opts.search.margin) {
                return Ok(CertifyOutcome::Infeasible(InfeasibleReason::NoFeasibleScalings { best_norm: h }));
            }
            (t, h, 1)
        }
        None => {
            let out = scaling_search::search_problem(&problem, &opts.search)?;
            if !out.feasible {
                return Ok(CertifyOutcome::Infeasible(InfeasibleReason::NoFeasibleScalings {
                    best_norm: out.best_norm,
                }));
            }
            (out.best, out.best_norm, out.evaluations)
        }
    };
    info!("scalings {triple:?}, hinf {hinf:.6}");

    let a = match best_attempt(&problem, &triple, opts.policy) {
        Ok(a) => a,
        Err(e) => {
            return Ok(CertifyOutcome::Infeasible(InfeasibleReason::RiccatiFailure { detail: e.to_string() }))
        }
    };
    for w in &a.warnings {
        warn!("{w}");
    }
    let d = &problem.doubled;
    let decay_check = linalg::lambda_max(&(&a.consts.qmi.w + a.p.scale(a.consts.c)));
    let cert = StabilityCertificate {
        feasible: true,
        tau: a.tau.0,
        mu: a.consts.mu,
        lambda_tilde: a.consts.lambda_tilde,
        lambda: a.consts.lambda,
        c: a.consts.c,
        c1: a.consts.c1,
        c2: a.consts.c,
        c3: a.consts.c3,
        hinf,
        qmi_lambda_max: a.consts.qmi.lambda_max,
        diagnostics: Diagnostics {
            riccati_residual: a.residual,
            riccati_eps: a.eps,
            decay_shift: a.alpha,
            closed_loop_abscissa: a.closed_loop,
            riccati_variant: a.variant,
            structure_deviation: a.deviation,
            base_qmi_eta: a.eta,
            decay_check,
            search_evaluations: evaluations,
            mu_closed_form_alt: compute_mu_alt(&d.e_tilde, &a.p)?,
            warnings: a.warnings.clone(),
        },
        p: a.p,
    };
    let report = verify_certificate(model, pert, &cert)?;
    if !report.passed() {
        return Err(QlsError::Numerical(format!("emitted certificate failed re-verification: {report}")));
    }
    Ok(CertifyOutcome::Certified(Box::new(cert)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.items.push(CheckItem { name: name.to_string(), passed, detail });
    }
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in &self.items {
            writeln!(f, "{} {}: {}", if i.passed { "ok  " } else { "FAIL" }, i.name, i.detail)?;
        }
        Ok(())
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() <= 1e-300
}

/// Re-derive every certificate claim from the model and the stored `τ`, `P`.
/// Shape mismatches are errors; everything else is reported.
pub fn verify_certificate(
    model: &QuantumLinearModel,
    pert: &PerturbationSpec,
    cert: &StabilityCertificate,
) -> Result<CheckReport> {
    let d = model.assemble_doubled()?;
    let dim = 2 * model.n;
    if cert.p.nrows() != dim || cert.p.ncols() != dim {
        return Err(QlsError::Shape(format!(
            "certificate P is {}x{}, model needs {dim}x{dim}",
            cert.p.nrows(),
            cert.p.ncols()
        )));
    }
    let mut rep = CheckReport::default();
    let rel = 1e-8;
    rep.push("feasible flag", cert.feasible, format!("{}", cert.feasible));
    let tau_ok = cert.tau.iter().all(|t| *t > 0.0 && t.is_finite());
    rep.push("scalings positive", tau_ok, format!("{:?}", cert.tau));
    if !tau_ok {
        return Ok(rep);
    }

    let herm = linalg::is_hermitian(&cert.p, 1e-12);
    rep.push("P Hermitian", herm, String::new());
    let dev = linalg::max_abs_diff(&cert.p, &bounded_real::quantum_symmetrize(&cert.p));
    let scale = linalg::frobenius(&cert.p).max(1e-300);
    rep.push("P doubled-up", dev <= 1e-10 * scale, format!("‖P − ΣP#Σ‖/2 = {dev:.3e}"));
    let p = linalg::hermitian_part(&cert.p);
    let (lmin, lmax) = (linalg::lambda_min(&p), linalg::lambda_max(&p));
    rep.push("P positive definite", lmin > 0.0, format!("λmin(P) = {lmin:.6e}"));
    if lmin <= 0.0 {
        return Ok(rep);
    }

    let f = model.build_f()?;
    let abscissa = bounded_real::spectral_abscissa(&f)?;
    rep.push("F Hurwitz", abscissa < 0.0, format!("abscissa {abscissa:.6e}"));
    if abscissa < 0.0 {
        let t = cert.triple();
        let b = model::build_bar_b(&d, t.tau1, t.tau3, t.tau4, pert)?;
        let c = model::build_bar_c(&d, t.tau1, t.tau3, t.tau4, pert)?;
        let h = bounded_real::hinf_norm(&f, &b, &c, DEFAULT_HINF_TOL)?.norm;
        rep.push("H∞ bound < 1", h < 1.0, format!("recomputed {h:.9}"));
        rep.push("H∞ value matches", close(h, cert.hinf, 1e-6), format!("stored {:.9}", cert.hinf));
    }

    let tau = cert.scalings();
    let qmi = bounded_real::check_qmi(&p, &d, &tau, pert);
    let scale = linalg::frobenius(&qmi.w).max(1e-300);
    rep.push("QMI negative", qmi.lambda_max < 0.0, format!("λmax(W) = {:.6e}", qmi.lambda_max));
    rep.push(
        "QMI value matches",
        close(qmi.lambda_max, cert.qmi_lambda_max, 1e-6),
        format!("stored {:.6e}", cert.qmi_lambda_max),
    );

    let decay = linalg::lambda_max(&(&qmi.w + p.scale(cert.c2)));
    let tol_neg = TOL_NEG * scale.max(cert.c2.abs() * lmax);
    rep.push("W + c2·P ⪯ 0", decay <= tol_neg, format!("λmax = {decay:.6e} (tol {tol_neg:.1e})"));
    rep.push("c2 > 0", cert.c2 > 0.0, format!("{}", cert.c2));
    rep.push("c2 = c", cert.c2 == cert.c, format!("c = {}, c2 = {}", cert.c, cert.c2));

    let mu = compute_mu(&d.e_tilde, &p)?;
    rep.push("μ matches", (mu - cert.mu).norm() <= rel * mu.norm().max(1.0), format!("recomputed {mu}"));
    let lt = compute_lambda_tilde_general(&d, &p).max(0.0);
    rep.push("λ̃ matches", close(lt, cert.lambda_tilde, rel), format!("recomputed {lt:.9e}"));
    let lambda = assemble_lambda(lt, mu, &tau, pert);
    rep.push("λ matches", close(lambda, cert.lambda, rel), format!("recomputed {lambda:.9e}"));
    let c1 = lmax / lmin;
    rep.push("c1 matches", close(c1, cert.c1, rel) && c1 >= 1.0, format!("recomputed {c1:.9e}"));
    let c3 = lambda / (cert.c2 * lmin);
    rep.push("c3 matches", close(c3, cert.c3, rel), format!("λ/(c2·λmin(P)) = {c3:.9e}"));
    Ok(rep)
}
