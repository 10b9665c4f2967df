mod common;

use common::*;
use qls_core::bounded_real;
use qls_core::certifier::{self, CertifyOptions, InfeasibleReason, RiccatiVariant, Tau25Policy, TOL_NEG};
use qls_core::io::{self, CertificateFile, CertificateInputs, ModelFile};
use qls_core::linalg::{self, r, CMat};
use qls_core::{systems, CertifyOutcome, StabilityCertificate, UncertainSystem};

fn certify(sys: &UncertainSystem, opts: &CertifyOptions) -> StabilityCertificate {
    match certifier::certify(&sys.model, &sys.perturbation, opts).unwrap() {
        CertifyOutcome::Certified(c) => *c,
        CertifyOutcome::Infeasible(r) => panic!("infeasible: {r}"),
    }
}

fn sys1() -> StabilityCertificate {
    certify(&systems::damped_mode(), &CertifyOptions::default())
}

fn verify(sys: &UncertainSystem, cert: &StabilityCertificate) -> bool {
    certifier::verify_certificate(&sys.model, &sys.perturbation, cert).unwrap().passed()
}

#[test]
fn scalar_riccati_closed_form() {
    let one = |v: f64| CMat::from_element(1, 1, r(v));
    let sol = bounded_real::solve_sbr_riccati(&one(-1.0), &one(1.0), &one(0.5), 1e-14, 1e-12).unwrap();
    let want = (2.0 - 3f64.sqrt()) / 4.0;
    assert!((sol.p[(0, 0)].re - want).abs() <= 1e-10, "{} vs {want}", sol.p[(0, 0)].re);
    assert!(sol.closed_loop_abscissa < 0.0);
}

#[test]
fn reference_certificate_invariants() {
    let sys = systems::damped_mode();
    let cert = sys1();
    assert!(cert.feasible);
    assert!(cert.hinf < 1.0);
    assert!(cert.c1 >= 1.0);
    assert!(cert.c > 0.0 && cert.c2 == cert.c);
    assert!(cert.c3 > 0.0 && cert.lambda >= cert.lambda_tilde);
    assert!(linalg::lambda_min(&cert.p) > 0.0);
    assert!(cert.qmi_lambda_max < 0.0);
    assert!(cert.diagnostics.decay_check <= TOL_NEG);
    assert!(cert.diagnostics.closed_loop_abscissa < 0.0);
    let d = sys.model.assemble_doubled().unwrap();
    let w = bounded_real::check_qmi(&cert.p, &d, &cert.scalings(), &sys.perturbation).w;
    let cc = linalg::frobenius(&(w.adjoint() * &w)).sqrt();
    assert!(cert.diagnostics.riccati_residual <= certifier::RICCATI_REL_TOL * cc.max(1.0) * 1e3);
    assert!(verify(&sys, &cert));

    // W + cP ⪯ 0 recomputed here from scratch
    let lmax = linalg::lambda_max(&(&w + cert.p.scale(cert.c2)));
    assert!(lmax <= TOL_NEG, "{lmax}");
}

#[test]
fn two_mode_certificate_is_structured_and_verifies() {
    let sys = systems::two_mode();
    let cert = certify(&sys, &CertifyOptions::default());
    assert!(verify(&sys, &cert));
    let sym = bounded_real::quantum_symmetrize(&cert.p);
    assert!(linalg::max_abs_diff(&sym, &cert.p) <= 1e-12 * linalg::frobenius(&cert.p));
    assert!(matches!(cert.diagnostics.riccati_variant, RiccatiVariant::Plain | RiccatiVariant::Invariant));
}

#[test]
fn infeasible_cases_have_structured_reasons() {
    let weak = systems::damped_mode_with(10.0, 0.05);
    match certifier::certify(&weak.model, &weak.perturbation, &CertifyOptions::default()).unwrap() {
        CertifyOutcome::Infeasible(InfeasibleReason::NoFeasibleScalings { best_norm }) => assert!(best_norm >= 1.0 - 1e-3),
        other => panic!("{other:?}"),
    }
    let closed = systems::closed_oscillator();
    let out = certifier::certify(&closed.model, &closed.perturbation, &CertifyOptions::default()).unwrap();
    match out {
        CertifyOutcome::Infeasible(reason @ InfeasibleReason::NonHurwitz { .. }) => {
            assert!(reason.to_string().starts_with("non-Hurwitz"))
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn tampered_certificates_are_rejected() {
    let sys = systems::damped_mode();
    let cert = sys1();

    let mut t = cert.clone();
    t.c2 *= 2.0;
    assert!(!verify(&sys, &t));

    let mut t = cert.clone();
    t.p[(0, 0)] = r(-1.0);
    assert!(!verify(&sys, &t));

    // positive definite, Hermitian, but not doubled-up
    let mut t = cert.clone();
    t.p[(0, 0)] += r(0.1 * cert.p[(0, 0)].re);
    assert!(!verify(&sys, &t));

    let mut t = cert.clone();
    t.c3 *= 0.5;
    assert!(!verify(&sys, &t));

    let mut t = cert.clone();
    t.tau[1] = 0.0;
    assert!(!verify(&sys, &t));

    let mut t = cert.clone();
    t.p = linalg::identity(4);
    assert!(certifier::verify_certificate(&sys.model, &sys.perturbation, &t).is_err());
}

#[test]
fn optimize_c3_never_worse_than_default() {
    let sys = systems::damped_mode();
    let base = sys1();
    let opts = CertifyOptions { policy: Tau25Policy::OptimizeC3, pinned: Some(base.triple()), ..Default::default() };
    let opt = certify(&sys, &opts);
    let pinned = certify(&sys, &CertifyOptions { pinned: Some(base.triple()), ..Default::default() });
    assert!(opt.c3 <= pinned.c3 * (1.0 + 1e-9), "{} vs {}", opt.c3, pinned.c3);
    assert!(verify(&sys, &opt));
}

#[test]
fn certify_is_deterministic() {
    let a = serde_json::to_string(&sys1()).unwrap();
    let b = serde_json::to_string(&sys1()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn certificate_file_round_trip() {
    let sys = systems::damped_mode();
    let cert = sys1();
    let model_json = io::model_to_json(&sys);
    let file = CertificateFile {
        certificate: cert.clone(),
        inputs: CertificateInputs { model: ModelFile::from_system(&sys), options: CertifyOptions::default() },
        model_sha256: io::sha256_hex(model_json.as_bytes()),
    };
    let text = io::certificate_to_json(&file);
    let back = io::parse_certificate(&text).unwrap();
    assert_eq!(back.inputs, file.inputs);
    assert_eq!(back.model_sha256, file.model_sha256);
    // floats survive the round trip bit-for-bit
    assert_eq!(io::certificate_to_json(&back), text);
    assert!(verify(&sys, &back.certificate));
    for key in ["\"feasible\"", "\"tau\"", "\"P\"", "\"mu\"", "\"lambda_tilde\"", "\"c1\"", "\"c2\"", "\"c3\"", "\"hinf\"", "\"qmi_lambda_max\"", "\"diagnostics\""] {
        assert!(text.contains(key), "{key} missing");
    }
}

#[test]
fn larger_delta1_only_moves_c3() {
    let sys = systems::damped_mode();
    let base = sys1();
    let opts = CertifyOptions { pinned: Some(base.triple()), ..Default::default() };
    let a = certify(&sys, &opts);
    let mut bumped = sys.clone();
    let dd = 0.25;
    bumped.perturbation.delta1 += dd;
    let b = certify(&bumped, &opts);
    assert_eq!(a.p, b.p);
    assert_eq!((a.c, a.c1, a.c2), (b.c, b.c1, b.c2));
    let t = a.scalings();
    let want = dd * (t.tau_sq(3) + t.tau_sq(4) + t.tau_sq(5)) / (2.0 * a.c * linalg::lambda_min(&a.p));
    assert!(rel(b.c3 - a.c3, want) <= 1e-9, "{} vs {want}", b.c3 - a.c3);
}

#[test]
fn constants_scale_with_p() {
    let sys = systems::damped_mode();
    let d = sys.model.assemble_doubled().unwrap();
    let mut rg = rng(4);
    for _ in 0..5 {
        let p = random_structured_p(&mut rg, 1);
        let alpha = 3.7;
        let pa = p.scale(alpha);
        let mu = certifier::compute_mu(&d.e_tilde, &p).unwrap();
        let mua = certifier::compute_mu(&d.e_tilde, &pa).unwrap();
        assert!((mua - mu * alpha).norm() <= 1e-12 * mua.norm().max(1.0));
        let lt = certifier::compute_lambda_tilde_general(&d, &p);
        assert!(rel(certifier::compute_lambda_tilde_general(&d, &pa), alpha * lt) <= 1e-12);
        let cond = |m: &CMat| linalg::lambda_max(m) / linalg::lambda_min(m);
        assert!(rel(cond(&pa), cond(&p)) <= 1e-12);
    }
}
