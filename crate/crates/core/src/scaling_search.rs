//! Search for scalings `(τ1, τ3, τ4)` that make `‖C̄(sI−F)⁻¹B̄‖∞ < 1`.
//!
//! The search runs in `log10(τ²)` coordinates: a coarse grid seeds a
//! coordinate descent with golden-section line searches in the fixed order
//! τ3, τ1, τ4. Failure to find a feasible triple only means none was found
//! in the searched region; it says nothing about instability.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounded_real::{self, DEFAULT_HINF_TOL};
use crate::error::{QlsError, Result};
use crate::linalg::CMat;
use crate::model::{self, DoubledMatrices, PerturbationSpec, QuantumLinearModel};

pub const HURWITZ_FAILED: &str = "Hurwitz condition failed";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingTriple {
    pub tau1: f64,
    pub tau3: f64,
    pub tau4: f64,
}

impl ScalingTriple {
    pub fn new(tau1: f64, tau3: f64, tau4: f64) -> Result<Self> {
        let t = ScalingTriple { tau1, tau3, tau4 };
        if !t.is_valid() {
            return Err(QlsError::InvalidParameter(format!("scalings must be positive and finite: {t:?}")));
        }
        Ok(t)
    }

    /// From `log10(τ1²), log10(τ3²), log10(τ4²)`.
    pub fn from_log_squares(x: [f64; 3]) -> Self {
        let t = |v: f64| 10f64.powf(0.5 * v);
        ScalingTriple { tau1: t(x[0]), tau3: t(x[1]), tau4: t(x[2]) }
    }

    pub fn log_squares(&self) -> [f64; 3] {
        [
            (self.tau1 * self.tau1).log10(),
            (self.tau3 * self.tau3).log10(),
            (self.tau4 * self.tau4).log10(),
        ]
    }

    pub fn is_valid(&self) -> bool {
        [self.tau1, self.tau3, self.tau4].iter().all(|t| *t > 0.0 && t.is_finite())
    }

    fn lex_key(&self) -> [f64; 3] {
        [self.tau1, self.tau3, self.tau4]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub grid_decades: f64,
    pub points_per_decade: usize,
    pub refine_iters: usize,
    pub margin: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { grid_decades: 5.0, points_per_decade: 3, refine_iters: 6, margin: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub triple: ScalingTriple,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub best: ScalingTriple,
    pub best_norm: f64,
    pub feasible: bool,
    pub evaluations: usize,
    /// Incumbent after the grid stage and after every coordinate step.
    pub trace: Vec<TraceEntry>,
    pub reason: Option<String>,
}

/// `(F, doubled matrices, perturbation)` with `F` checked Hurwitz once.
#[derive(Debug, Clone)]
pub struct ScaledProblem {
    pub doubled: DoubledMatrices,
    pub f: CMat,
    pub pert: PerturbationSpec,
    pub abscissa: f64,
}

impl ScaledProblem {
    pub fn new(model: &QuantumLinearModel, pert: &PerturbationSpec) -> Result<Self> {
        pert.validate()?;
        let doubled = model.assemble_doubled()?;
        let f = model::build_f_from(&doubled, model.n);
        let abscissa = bounded_real::spectral_abscissa(&f)?;
        if abscissa >= 0.0 {
            return Err(QlsError::NotHurwitz { abscissa });
        }
        Ok(ScaledProblem { doubled, f, pert: pert.clone(), abscissa })
    }

    pub fn bar_matrices(&self, t: &ScalingTriple) -> Result<(CMat, CMat)> {
        let b = model::build_bar_b(&self.doubled, t.tau1, t.tau3, t.tau4, &self.pert)?;
        let c = model::build_bar_c(&self.doubled, t.tau1, t.tau3, t.tau4, &self.pert)?;
        Ok((b, c))
    }

    pub fn evaluate(&self, t: &ScalingTriple) -> Result<f64> {
        let (b, c) = self.bar_matrices(t)?;
        Ok(bounded_real::hinf_norm(&self.f, &b, &c, DEFAULT_HINF_TOL)?.norm)
    }

    fn objective(&self, x: [f64; 3]) -> f64 {
        let t = ScalingTriple::from_log_squares(x);
        match self.evaluate(&t) {
            Ok(v) => v,
            Err(e) => {
                warn!("evaluation failed at {t:?}: {e}");
                f64::INFINITY
            }
        }
    }
}

/// `‖C̄(sI−F)⁻¹B̄‖∞` for one scaling triple.
pub fn evaluate(model: &QuantumLinearModel, pert: &PerturbationSpec, triple: &ScalingTriple) -> Result<f64> {
    ScaledProblem::new(model, pert)?.evaluate(triple)
}

fn better(a: (f64, ScalingTriple), b: (f64, ScalingTriple)) -> (f64, ScalingTriple) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if b.1.lex_key() < a.1.lex_key() {
                b
            } else {
                a
            }
        }
    }
}

pub fn search(model: &QuantumLinearModel, pert: &PerturbationSpec, opts: &SearchOptions) -> Result<SearchOutcome> {
    let problem = match ScaledProblem::new(model, pert) {
        Ok(p) => p,
        Err(QlsError::NotHurwitz { .. }) => {
            return Ok(SearchOutcome {
                best: ScalingTriple { tau1: 1.0, tau3: 1.0, tau4: 1.0 },
                best_norm: f64::INFINITY,
                feasible: false,
                evaluations: 0,
                trace: Vec::new(),
                reason: Some(HURWITZ_FAILED.to_string()),
            })
        }
        Err(e) => return Err(e),
    };
    search_problem(&problem, opts)
}

pub fn search_problem(problem: &ScaledProblem, opts: &SearchOptions) -> Result<SearchOutcome> {
    if !(opts.grid_decades > 0.0) || opts.points_per_decade == 0 || !(opts.margin >= 0.0) {
        return Err(QlsError::InvalidParameter(format!("invalid search options {opts:?}")));
    }
    let half = 0.5 * opts.grid_decades;
    let steps = (opts.grid_decades * opts.points_per_decade as f64).round().max(1.0) as usize;
    let axis: Vec<f64> = (0..=steps).map(|k| -half + opts.grid_decades * k as f64 / steps as f64).collect();
    let mut points = Vec::with_capacity(axis.len().pow(3));
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                points.push([a, b, c]);
            }
        }
    }

    let seed = points
        .par_iter()
        .map(|&x| (problem.objective(x), ScalingTriple::from_log_squares(x)))
        .reduce(|| (f64::INFINITY, ScalingTriple { tau1: 1.0, tau3: 1.0, tau4: 1.0 }), better);
    let mut evaluations = points.len();
    let (mut best_norm, best) = seed;
    let mut x = best.log_squares();
    let mut trace = vec![TraceEntry { triple: best, norm: best_norm }];
    debug!("grid seed {best:?} -> {best_norm}");

    // sweep order τ3, τ1, τ4 in log-square coordinates
    const ORDER: [usize; 3] = [1, 0, 2];
    for round in 0..opts.refine_iters {
        let width = half * 0.5f64.powi(round as i32);
        for &axis_idx in &ORDER {
            let centre = x[axis_idx];
            let line = |v: f64| {
                let mut y = x;
                y[axis_idx] = v;
                problem.objective(y)
            };
            let (v, val, used) = golden_min(line, centre - width, centre + width, 1e-6);
            evaluations += used;
            if val < best_norm {
                best_norm = val;
                x[axis_idx] = v;
            }
            trace.push(TraceEntry { triple: ScalingTriple::from_log_squares(x), norm: best_norm });
        }
    }

    let best = ScalingTriple::from_log_squares(x);
    let feasible = best_norm < 1.0 - opts.margin;
    Ok(SearchOutcome {
        best,
        best_norm,
        feasible,
        evaluations,
        trace,
        reason: (!feasible).then(|| "no feasible scalings found in searched region".to_string()),
    })
}

/// Golden-section minimization on `[a, b]`; returns `(argmin, min, evaluations)`.
fn golden_min(obj: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = obj(x1);
    let mut f2 = obj(x2);
    let mut used = 2;
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = obj(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = obj(x2);
        }
        used += 1;
    }
    if f1 <= f2 {
        (x1, f1, used)
    } else {
        (x2, f2, used)
    }
}
