//! Command implementations behind the `qls` binary.
//!
//! Every command returns a [`CmdOutput`]: the process exit code plus a JSON
//! report for standard output. Exit codes are a stable contract:
//! 0 success, 1 infeasible / check or bound failure, 2 input error,
//! 3 perturbation outside the sector class.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde_json::{json, Value};

use qls_core::certifier::{self, CertifyOptions, CertifyOutcome};
use qls_core::fock_oracle::{self, InitialState, DEFAULT_DIM_CAP};
use qls_core::io::{self, CertificateFile, CertificateInputs, ModelFile, SimConfig};
use qls_core::model::DEFAULT_TOL_SYM;
use qls_core::scaling_search::{self, ScalingTriple, SearchOptions};
use qls_core::{QlsError, UncertainSystem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SECTOR: i32 = 3;

/// Tolerance for the sector checks on the guard.
pub const SECTOR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CmdOutput {
    pub code: i32,
    pub report: Value,
}

impl CmdOutput {
    fn new(code: i32, report: Value) -> Self {
        CmdOutput { code, report }
    }

    fn input_error(msg: impl std::fmt::Display) -> Self {
        CmdOutput::new(EXIT_INPUT, json!({ "status": "input-error", "error": msg.to_string() }))
    }
}

/// Input error from argument handling outside the command functions.
pub fn cmd_error(msg: impl std::fmt::Display) -> CmdOutput {
    CmdOutput::input_error(msg)
}

/// Maps library errors to exit codes: malformed or inconsistent inputs are
/// input errors, everything else is a failure of the computation.
fn error_output(e: QlsError) -> CmdOutput {
    match e {
        QlsError::Parse(_)
        | QlsError::Io(_)
        | QlsError::Shape(_)
        | QlsError::InvalidModel(_)
        | QlsError::InvalidPerturbation(_)
        | QlsError::InvalidParameter(_)
        | QlsError::FockTooLarge { .. } => CmdOutput::input_error(e),
        other => CmdOutput::new(EXIT_FAIL, json!({ "status": "error", "error": other.to_string() })),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CmdOutput> {
    fs::read(path).map_err(|e| CmdOutput::input_error(format!("{}: {e}", path.display())))
}

fn text(bytes: &[u8], path: &Path) -> Result<String, CmdOutput> {
    String::from_utf8(bytes.to_vec()).map_err(|_| CmdOutput::input_error(format!("{}: not UTF-8", path.display())))
}

/// Reads and parses a model file, returning its bytes for hashing.
fn load_model(path: &Path) -> Result<(UncertainSystem, Vec<u8>), CmdOutput> {
    let bytes = read(path)?;
    let sys = io::parse_model(&text(&bytes, path)?).map_err(error_output)?;
    Ok((sys, bytes))
}

/// Parses and fully validates a model; structural violations are input errors.
fn load_valid_model(path: &Path) -> Result<(UncertainSystem, Vec<u8>), CmdOutput> {
    let (mut sys, bytes) = load_model(path)?;
    sys.model = sys.model.validated(DEFAULT_TOL_SYM).map_err(error_output)?;
    sys.perturbation.validate().map_err(error_output)?;
    Ok((sys, bytes))
}

pub fn cmd_validate(model_path: &Path) -> CmdOutput {
    let (sys, _) = match load_model(model_path) {
        Ok(v) => v,
        Err(out) => return out,
    };
    let mut violations = sys.model.validate(DEFAULT_TOL_SYM).violations;
    if let Err(e) = sys.perturbation.validate() {
        violations.push(e.to_string());
    }
    let valid = violations.is_empty();
    CmdOutput::new(
        if valid { EXIT_OK } else { EXIT_FAIL },
        json!({ "status": if valid { "valid" } else { "invalid" }, "n": sys.model.n, "violations": violations }),
    )
}

/// H∞ norm at a given triple, or the result of the scaling search.
pub fn cmd_hinf(model_path: &Path, triple: Option<ScalingTriple>, search: &SearchOptions) -> CmdOutput {
    let (sys, _) = match load_valid_model(model_path) {
        Ok(v) => v,
        Err(out) => return out,
    };
    match triple {
        Some(t) => match scaling_search::evaluate(&sys.model, &sys.perturbation, &t) {
            Ok(norm) => CmdOutput::new(EXIT_OK, json!({ "status": "ok", "triple": t, "hinf": norm })),
            Err(QlsError::NotHurwitz { abscissa }) => CmdOutput::new(
                EXIT_FAIL,
                json!({ "status": "non-hurwitz", "reason": scaling_search::HURWITZ_FAILED, "abscissa": abscissa }),
            ),
            Err(e) => error_output(e),
        },
        None => match scaling_search::search(&sys.model, &sys.perturbation, search) {
            Ok(out) => CmdOutput::new(
                if out.feasible { EXIT_OK } else { EXIT_FAIL },
                json!({
                    "status": if out.feasible { "feasible" } else { "infeasible" },
                    "best": out.best,
                    "hinf": out.best_norm,
                    "evaluations": out.evaluations,
                    "reason": out.reason,
                }),
            ),
            Err(e) => error_output(e),
        },
    }
}

/// Runs the certifier. On success the certificate (with embedded inputs and
/// model hash) is written to `out`, or included in the report if `out` is
/// `None`.
pub fn cmd_certify(model_path: &Path, out: Option<&Path>, opts: &CertifyOptions) -> CmdOutput {
    let (sys, bytes) = match load_valid_model(model_path) {
        Ok(v) => v,
        Err(out) => return out,
    };
    let outcome = match certifier::certify(&sys.model, &sys.perturbation, opts) {
        Ok(o) => o,
        Err(e) => return error_output(e),
    };
    let cert = match outcome {
        CertifyOutcome::Certified(c) => *c,
        CertifyOutcome::Infeasible(reason) => {
            return CmdOutput::new(
                EXIT_FAIL,
                json!({ "status": "infeasible", "message": reason.to_string(), "reason": reason }),
            )
        }
    };
    let file = CertificateFile {
        certificate: cert,
        inputs: CertificateInputs { model: ModelFile::from_system(&sys), options: opts.clone() },
        model_sha256: io::sha256_hex(&bytes),
    };
    let body = io::certificate_to_json(&file);
    let summary = json!({
        "status": "certified",
        "hinf": file.certificate.hinf,
        "c": file.certificate.c,
        "c1": file.certificate.c1,
        "c3": file.certificate.c3,
        "lambda": file.certificate.lambda,
        "warnings": file.certificate.diagnostics.warnings,
    });
    match out {
        Some(path) => {
            if let Err(e) = fs::write(path, &body) {
                return CmdOutput::input_error(format!("{}: {e}", path.display()));
            }
            info!("certificate written to {}", path.display());
            let mut summary = summary;
            summary["certificate"] = json!(path.display().to_string());
            CmdOutput::new(EXIT_OK, summary)
        }
        None => {
            let mut summary = summary;
            summary["certificate"] = serde_json::from_str(&body).expect("certificate is valid JSON");
            CmdOutput::new(EXIT_OK, summary)
        }
    }
}

fn load_certificate(path: &Path) -> Result<CertificateFile, CmdOutput> {
    let bytes = read(path)?;
    io::parse_certificate(&text(&bytes, path)?).map_err(error_output)
}

/// Loads model and certificate and refuses a certificate issued for
/// different model bytes.
fn load_pair(model_path: &Path, cert_path: &Path) -> Result<(UncertainSystem, CertificateFile), CmdOutput> {
    let (sys, bytes) = load_valid_model(model_path)?;
    let cert = load_certificate(cert_path)?;
    let hash = io::sha256_hex(&bytes);
    if hash != cert.model_sha256 {
        return Err(CmdOutput::input_error(format!(
            "model hash {hash} does not match the certificate's {}",
            cert.model_sha256
        )));
    }
    Ok((sys, cert))
}

/// Independent re-verification of a certificate against its model.
pub fn cmd_check(model_path: &Path, cert_path: &Path) -> CmdOutput {
    let (sys, file) = match load_pair(model_path, cert_path) {
        Ok(v) => v,
        Err(out) => return out,
    };
    match certifier::verify_certificate(&sys.model, &sys.perturbation, &file.certificate) {
        Ok(rep) => {
            let passed = rep.passed();
            CmdOutput::new(
                if passed { EXIT_OK } else { EXIT_FAIL },
                json!({ "status": if passed { "valid" } else { "invalid" }, "checks": rep.items }),
            )
        }
        Err(e) => error_output(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    /// JSON file with `cutoff`, `guard`, `T`, `steps`, `rho0`; flags override it.
    pub config: Option<PathBuf>,
    pub cutoff: Option<usize>,
    pub guard: Option<usize>,
    pub t_final: Option<f64>,
    pub steps: Option<usize>,
    pub state: Option<InitialState>,
    /// Seed for `InitialState::Random` when no state is given.
    pub seed: Option<u64>,
    pub slack: f64,
    pub force: bool,
    /// Trajectory CSV destination.
    pub out: Option<PathBuf>,
}

impl Default for SimulateArgs {
    fn default() -> Self {
        SimulateArgs {
            config: None,
            cutoff: None,
            guard: None,
            t_final: None,
            steps: None,
            state: None,
            seed: None,
            slack: 1e-6,
            force: false,
            out: None,
        }
    }
}

pub const DEFAULT_CUTOFF: usize = 12;
pub const DEFAULT_STEPS: usize = 200;

/// Simulates the master equation with the concrete `f(ζ)` from the model and
/// checks the certified bounds pointwise.
pub fn cmd_simulate(model_path: &Path, cert_path: &Path, args: &SimulateArgs) -> CmdOutput {
    let (sys, file) = match load_pair(model_path, cert_path) {
        Ok(v) => v,
        Err(out) => return out,
    };
    let cert = &file.certificate;
    let Some(degree) = sys.perturbation.degree() else {
        return CmdOutput::input_error("simulation needs concrete polynomial coefficients (perturbation.poly)");
    };
    match certifier::verify_certificate(&sys.model, &sys.perturbation, cert) {
        Ok(rep) if rep.passed() => {}
        Ok(rep) => {
            return CmdOutput::new(
                EXIT_FAIL,
                json!({ "status": "invalid-certificate", "checks": rep.items }),
            )
        }
        Err(e) => return error_output(e),
    }

    let config: Option<SimConfig> = match &args.config {
        Some(path) => {
            let parsed = read(path).and_then(|b| text(&b, path)).and_then(|t| io::parse_sim_config(&t).map_err(error_output));
            match parsed {
                Ok(c) => Some(c),
                Err(out) => return out,
            }
        }
        None => None,
    };
    let cutoff = args.cutoff.or(config.as_ref().map(|c| c.cutoff)).unwrap_or(DEFAULT_CUTOFF);
    let guard = args.guard.or(config.as_ref().map(|c| c.guard)).unwrap_or(degree + 1);
    let t_final = args.t_final.or(config.as_ref().and_then(|c| c.t_final)).unwrap_or(10.0 / cert.c2);
    let steps = args.steps.or(config.as_ref().and_then(|c| c.steps)).unwrap_or(DEFAULT_STEPS);
    let state = args
        .state
        .clone()
        .or(config.as_ref().map(|c| c.rho0.clone()))
        .unwrap_or(InitialState::Random { seed: args.seed.unwrap_or(0) });
    if !(t_final > 0.0 && t_final.is_finite()) || steps == 0 || !(args.slack >= 0.0) {
        return CmdOutput::input_error(format!("invalid simulation options: T={t_final}, steps={steps}, slack={}", args.slack));
    }

    let rep = match fock_oracle::build_fock_rep(&sys.model, &sys.perturbation, cutoff, guard, DEFAULT_DIM_CAP) {
        Ok(r) => r,
        Err(e) => return error_output(e),
    };
    let sectors = fock_oracle::check_sector_bounds(&rep, &sys.perturbation, SECTOR_TOL);
    if !sectors.passed() && !args.force {
        return CmdOutput::new(
            EXIT_SECTOR,
            json!({ "status": "perturbation outside W2", "sectors": sectors }),
        );
    }
    if !sectors.passed() {
        warn!("sector checks failed; simulating anyway (--force), bound verdict is informational");
    }

    let rho0 = match fock_oracle::initial_state(&rep, &state) {
        Ok(r) => r,
        Err(e) => return error_output(e),
    };
    let traj = match fock_oracle::simulate_lindblad(&rep, &cert.p, &rho0, t_final, steps) {
        Ok(t) => t,
        Err(e) => return error_output(e),
    };
    if let Some(path) = &args.out {
        let written = fs::File::create(path)
            .map_err(QlsError::from)
            .and_then(|f| io::write_trajectory_csv(&traj, std::io::BufWriter::new(f)));
        if let Err(e) = written {
            return CmdOutput::input_error(format!("{}: {e}", path.display()));
        }
    }
    let bound = fock_oracle::verify_bound(&traj, cert, args.slack);
    let code = if !sectors.passed() {
        EXIT_SECTOR
    } else if bound.passed() {
        EXIT_OK
    } else {
        EXIT_FAIL
    };
    CmdOutput::new(
        code,
        json!({
            "status": if bound.passed() { "bound-holds" } else { "bound-violated" },
            "informational": !sectors.passed(),
            "cutoff": cutoff,
            "guard": guard,
            "T": t_final,
            "steps": steps,
            "rho0": state,
            "sectors": sectors,
            "v_bound_holds": bound.v_bound_holds,
            "number_bound_holds": bound.number_bound_holds,
            "worst_v_margin": bound.worst_v_margin,
            "worst_v_time": bound.worst_v_time,
            "worst_number_margin": bound.worst_number_margin,
            "worst_number_time": bound.worst_number_time,
            "max_trace_err": traj.trace_err.iter().copied().fold(0.0, f64::max),
            "hermiticity_err": traj.hermiticity_err,
            "expm_deviation": traj.expm_deviation,
            "trajectory": args.out.as_ref().map(|p| p.display().to_string()),
        }),
    )
}
