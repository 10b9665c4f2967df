//! Nominal linear quantum system, perturbation class, and the doubled-up
//! matrices derived from them.
//!
//! A model with `n` modes has Hamiltonian `H = ½ x† M x` and nominal
//! coupling `L1 = Ñ x` where `x = [a; a#]`. The perturbation channel is the
//! scalar operator `ζ = Ẽ x`, and the perturbation `L2 = f(ζ)` is only known
//! through the sector parameters `γ, δ1, δ2, δ3` (plus, optionally, concrete
//! polynomial coefficients used by the Fock-space oracle).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{QlsError, Result};
use crate::linalg::{self, CMat};

pub const DEFAULT_TOL_SYM: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumLinearModel {
    pub n: usize,
    pub m1: CMat,
    pub m2: CMat,
    pub n1: CMat,
    pub n2: CMat,
    pub e1: CMat,
    pub e2: CMat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub gamma: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// Coefficients `S_0..S_K` of `f(ζ) = Σ S_k ζ^k`.
    pub poly: Option<Vec<C64>>,
}

/// A model file: nominal system plus the perturbation class.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainSystem {
    pub model: QuantumLinearModel,
    pub perturbation: PerturbationSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `M = [[M1, M2], [M2#, M1#]]`, `Ñ = [N1 N2]`, `N = [[N1, N2], [N2#, N1#]]`,
/// `Ẽ = [E1 E2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubledMatrices {
    pub m: CMat,
    pub n_tilde: CMat,
    pub n: CMat,
    pub e_tilde: CMat,
}

/// `J = diag(I_n, −I_n)`.
pub fn signature(n: usize) -> CMat {
    let mut v = vec![1.0; n];
    v.extend(std::iter::repeat_n(-1.0, n));
    linalg::diag(&v)
}

/// `Σ = [[0, I_n], [I_n, 0]]`.
pub fn block_swap(n: usize) -> CMat {
    let mut s = linalg::zeros(2 * n, 2 * n);
    for i in 0..n {
        s[(i, n + i)] = linalg::r(1.0);
        s[(n + i, i)] = linalg::r(1.0);
    }
    s
}

/// `[[A, B], [B#, A#]]`.
pub fn doubled_up(a: &CMat, b: &CMat) -> CMat {
    let (r, c) = (a.nrows(), a.ncols());
    let mut out = linalg::zeros(2 * r, 2 * c);
    out.view_mut((0, 0), (r, c)).copy_from(a);
    out.view_mut((0, c), (r, c)).copy_from(b);
    out.view_mut((r, 0), (r, c)).copy_from(&linalg::conj(b));
    out.view_mut((r, c), (r, c)).copy_from(&linalg::conj(a));
    out
}

fn hstack(a: &CMat, b: &CMat) -> CMat {
    let mut out = linalg::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

fn rel_asym(m: &CMat, other: &CMat) -> f64 {
    linalg::frobenius(&(m - other)) / linalg::frobenius(m).max(1.0)
}

impl QuantumLinearModel {
    pub fn validate(&self, tol_sym: f64) -> ValidationReport {
        let n = self.n;
        let mut violations = Vec::new();
        if n == 0 {
            violations.push("mode count n must be at least 1".to_string());
        }
        let blocks: [(&str, &CMat, usize); 6] = [
            ("M1", &self.m1, n),
            ("M2", &self.m2, n),
            ("N1", &self.n1, 1),
            ("N2", &self.n2, 1),
            ("E1", &self.e1, 1),
            ("E2", &self.e2, 1),
        ];
        let mut shapes_ok = true;
        for (name, m, rows) in blocks {
            if m.nrows() != rows || m.ncols() != n {
                shapes_ok = false;
                let extra = if name.starts_with('E') && m.nrows() > 1 {
                    " (multi-channel perturbation not supported)"
                } else if name.starts_with('N') && m.nrows() > 1 {
                    " (multi-channel coupling not supported)"
                } else {
                    ""
                };
                violations.push(format!(
                    "{name} has shape {}x{}, expected {rows}x{n}{extra}",
                    m.nrows(),
                    m.ncols()
                ));
            }
            if !linalg::all_finite(m) {
                violations.push(format!("{name} has non-finite entries"));
            }
        }
        if shapes_ok && n > 0 {
            if rel_asym(&self.m1, &self.m1.adjoint()) > tol_sym {
                violations.push("M1 not Hermitian".to_string());
            }
            if rel_asym(&self.m2, &self.m2.transpose()) > tol_sym {
                violations.push("M2 not symmetric".to_string());
            }
        }
        ValidationReport { violations }
    }

    /// Validate, then replace `M1` by `½(M1 + M1†)` and `M2` by `½(M2 + M2ᵀ)`.
    pub fn validated(&self, tol_sym: f64) -> Result<QuantumLinearModel> {
        let report = self.validate(tol_sym);
        if !report.is_valid() {
            return Err(QlsError::InvalidModel(report.violations));
        }
        let mut out = self.clone();
        out.m1 = linalg::hermitian_part(&self.m1);
        out.m2 = (&self.m2 + self.m2.transpose()).scale(0.5);
        Ok(out)
    }

    pub fn assemble_doubled(&self) -> Result<DoubledMatrices> {
        let model = self.validated(DEFAULT_TOL_SYM)?;
        Ok(DoubledMatrices {
            m: doubled_up(&model.m1, &model.m2),
            n_tilde: hstack(&model.n1, &model.n2),
            n: doubled_up(&model.n1, &model.n2),
            e_tilde: hstack(&model.e1, &model.e2),
        })
    }

    /// `F = −iJM − ½ J N† J N`, with the 2×2 output signature in the middle.
    pub fn build_f(&self) -> Result<CMat> {
        let d = self.assemble_doubled()?;
        Ok(build_f_from(&d, self.n))
    }
}

pub(crate) fn build_f_from(d: &DoubledMatrices, n: usize) -> CMat {
    let j = signature(n);
    let j_out = signature(1);
    let minus_i = linalg::c(0.0, -1.0);
    (&j * &d.m).map(|z| z * minus_i) - (&j * d.n.adjoint() * &j_out * &d.n).scale(0.5)
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.gamma, self.delta1, self.delta2, self.delta3]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(QlsError::InvalidPerturbation("non-finite sector parameter".into()));
        }
        if self.gamma <= 0.0 {
            return Err(QlsError::InvalidPerturbation(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        for (name, v) in [("delta1", self.delta1), ("delta2", self.delta2), ("delta3", self.delta3)] {
            if v < 0.0 {
                return Err(QlsError::InvalidPerturbation(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if let Some(poly) = &self.poly {
            if poly.is_empty() {
                return Err(QlsError::InvalidPerturbation("poly must have at least one coefficient".into()));
            }
            if poly.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(QlsError::InvalidPerturbation("non-finite poly coefficient".into()));
            }
        }
        Ok(())
    }

    /// Polynomial degree `K`, if concrete coefficients are present.
    pub fn degree(&self) -> Option<usize> {
        self.poly.as_ref().map(|p| p.len().saturating_sub(1))
    }
}

fn check_scalings(tau1: f64, tau3: f64, tau4: f64) -> Result<()> {
    for (name, t) in [("tau1", tau1), ("tau3", tau3), ("tau4", tau4)] {
        if !(t > 0.0 && t.is_finite()) {
            return Err(QlsError::InvalidParameter(format!("{name} must be positive and finite, got {t}")));
        }
    }
    Ok(())
}

/// `C̄ = [ (√(τ3²+τ4²)/γ) Ẽ ; τ1 Ñ ]`, a 2×2n matrix.
pub fn build_bar_c(
    d: &DoubledMatrices,
    tau1: f64,
    tau3: f64,
    tau4: f64,
    pert: &PerturbationSpec,
) -> Result<CMat> {
    check_scalings(tau1, tau3, tau4)?;
    let w = d.e_tilde.ncols();
    let mut out = linalg::zeros(2, w);
    let k = (tau3 * tau3 + tau4 * tau4).sqrt() / pert.gamma;
    out.row_mut(0).copy_from(&d.e_tilde.scale(k));
    out.row_mut(1).copy_from(&d.n_tilde.scale(tau1));
    Ok(out)
}

/// `B̄ = [ √(δ2(1/τ1² + 1/τ4²)) JẼ†   (1/τ3) JÑ† ]`, a 2n×2 matrix.
pub fn build_bar_b(
    d: &DoubledMatrices,
    tau1: f64,
    tau3: f64,
    tau4: f64,
    pert: &PerturbationSpec,
) -> Result<CMat> {
    check_scalings(tau1, tau3, tau4)?;
    let w = d.e_tilde.ncols();
    let j = signature(w / 2);
    let k = (pert.delta2 * (1.0 / (tau1 * tau1) + 1.0 / (tau4 * tau4))).sqrt();
    let mut out = linalg::zeros(w, 2);
    out.column_mut(0).copy_from(&(&j * d.e_tilde.adjoint()).scale(k));
    out.column_mut(1).copy_from(&(&j * d.n_tilde.adjoint()).scale(1.0 / tau3));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, r};

    fn row(v: &[C64]) -> CMat {
        CMat::from_row_slice(1, v.len(), v)
    }

    fn single_mode(m1: C64, m2: C64, n1: C64, e1: C64, e2: C64) -> QuantumLinearModel {
        QuantumLinearModel {
            n: 1,
            m1: row(&[m1]),
            m2: row(&[m2]),
            n1: row(&[n1]),
            n2: row(&[r(0.0)]),
            e1: row(&[e1]),
            e2: row(&[e2]),
        }
    }

    fn pert(gamma: f64, delta2: f64) -> PerturbationSpec {
        PerturbationSpec { gamma, delta1: 0.0, delta2, delta3: 0.0, poly: None }
    }

    #[test]
    fn trivial_model_is_valid() {
        let m = single_mode(r(1.0), r(0.0), r(1.0), r(1.0), r(0.0));
        assert!(m.validate(DEFAULT_TOL_SYM).is_valid());
    }

    #[test]
    fn anti_hermitian_m1_is_rejected() {
        let m = single_mode(c(0.0, 1.0), r(0.0), r(1.0), r(1.0), r(0.0));
        let report = m.validate(DEFAULT_TOL_SYM);
        assert_eq!(report.violations, vec!["M1 not Hermitian".to_string()]);
        assert!(m.assemble_doubled().is_err());
    }

    #[test]
    fn asymmetric_m2_is_rejected() {
        let m = QuantumLinearModel {
            n: 2,
            m1: linalg::zeros(2, 2),
            m2: linalg::from_real(2, 2, &[0.0, 1.0, 2.0, 0.0]),
            n1: linalg::from_real(1, 2, &[1.0, 0.0]),
            n2: linalg::zeros(1, 2),
            e1: linalg::zeros(1, 2),
            e2: linalg::zeros(1, 2),
        };
        assert_eq!(m.validate(DEFAULT_TOL_SYM).violations, vec!["M2 not symmetric".to_string()]);
    }

    #[test]
    fn shape_and_channel_violations() {
        let mut m = single_mode(r(1.0), r(0.0), r(1.0), r(1.0), r(0.0));
        m.e1 = linalg::from_real(2, 1, &[1.0, 0.0]);
        m.m2 = linalg::zeros(2, 2);
        let v = m.validate(DEFAULT_TOL_SYM).violations;
        assert_eq!(v.len(), 2);
        assert!(v.iter().any(|s| s.contains("multi-channel perturbation")));
        assert!(v.iter().any(|s| s.starts_with("M2 has shape 2x2")));
    }

    #[test]
    fn doubled_blocks() {
        let w = 0.7;
        let m = single_mode(r(w), r(0.0), r(2f64.sqrt()), r(1.0), c(0.0, 1.0));
        let d = m.assemble_doubled().unwrap();
        assert_eq!(d.m, linalg::diag(&[w, w]));
        assert_eq!(d.n, linalg::diag(&[2f64.sqrt(), 2f64.sqrt()]));
        assert_eq!(d.e_tilde, row(&[r(1.0), c(0.0, 1.0)]));
    }

    #[test]
    fn f_pure_damping() {
        let kappa: f64 = 10.0;
        let m = single_mode(r(0.0), r(0.0), r(kappa.sqrt()), r(1.0), r(0.0));
        let f = m.build_f().unwrap();
        assert!(linalg::max_abs_diff(&f, &linalg::diag(&[-5.0, -5.0])) < 1e-14);
    }

    #[test]
    fn f_detuned_damping() {
        let m = single_mode(r(1.0), r(0.0), r(2f64.sqrt()), r(1.0), r(0.0));
        let f = m.build_f().unwrap();
        let expected = CMat::from_row_slice(2, 2, &[c(-1.0, -1.0), r(0.0), r(0.0), c(-1.0, 1.0)]);
        assert!(linalg::max_abs_diff(&f, &expected) < 1e-14);
    }

    #[test]
    fn f_without_coupling_has_no_damping() {
        let m = single_mode(r(1.3), c(0.2, 0.1), r(0.0), r(1.0), r(0.0));
        let f = m.build_f().unwrap();
        let eig = linalg::eigenvalues(&f).unwrap();
        assert!(eig.iter().all(|z| z.re.abs() < 1e-12));
    }

    #[test]
    fn bar_c_plug_in() {
        let m = single_mode(r(0.0), r(0.0), r(10f64.sqrt()), r(1.0), r(0.0));
        let d = m.assemble_doubled().unwrap();
        let cb = build_bar_c(&d, 1.0, 1.0, 1.0, &pert(10.0, 0.01)).unwrap();
        let expected = linalg::from_real(2, 2, &[2f64.sqrt() / 10.0, 0.0, 10f64.sqrt(), 0.0]);
        assert!(linalg::max_abs_diff(&cb, &expected) < 1e-15);
        assert!(build_bar_c(&d, 0.0, 1.0, 1.0, &pert(10.0, 0.01)).is_err());
        assert!(build_bar_b(&d, 1.0, -1.0, 1.0, &pert(10.0, 0.01)).is_err());

        let zero_e = single_mode(r(0.0), r(0.0), r(1.0), r(0.0), r(0.0));
        let cb = build_bar_c(&zero_e.assemble_doubled().unwrap(), 1.0, 2.0, 3.0, &pert(1.0, 0.0)).unwrap();
        assert!(cb.row(0).iter().all(|z| *z == r(0.0)));
    }

    #[test]
    fn bar_b_plug_in() {
        let m = single_mode(r(0.0), r(0.0), r(10f64.sqrt()), r(1.0), r(0.0));
        let d = m.assemble_doubled().unwrap();
        let tau4 = 2f64.sqrt().sqrt();
        let tau3 = 31.6228f64.sqrt();
        let bb = build_bar_b(&d, 0.1, tau3, tau4, &pert(10.0, 0.01)).unwrap();
        // √(0.01 (100 + 1/√2)) and √10/√31.6228
        assert!((bb[(0, 0)].re - 1.003530).abs() < 1e-5);
        assert_eq!(bb[(1, 0)], r(0.0));
        assert!((bb[(0, 1)].re - 0.562341).abs() < 1e-5);
        let bb0 = build_bar_b(&d, 0.1, tau3, tau4, &pert(10.0, 0.0)).unwrap();
        assert!(bb0.column(0).iter().all(|z| *z == r(0.0)));
    }

    #[test]
    fn constants() {
        let j = signature(3);
        let s = block_swap(3);
        assert_eq!(&j * &j, linalg::identity(6));
        assert_eq!(&s * &s, linalg::identity(6));
    }

    #[test]
    fn perturbation_validation() {
        assert!(pert(1.0, 0.0).validate().is_ok());
        assert!(pert(0.0, 0.0).validate().is_err());
        assert!(pert(1.0, -0.1).validate().is_err());
        let mut p = pert(1.0, 0.0);
        p.poly = Some(vec![]);
        assert!(p.validate().is_err());
        p.poly = Some(vec![r(0.0), r(0.05), r(0.01)]);
        assert_eq!(p.degree(), Some(2));
    }
}
