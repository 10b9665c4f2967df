//! JSON/CSV formats: model files, certificates, simulation configs and
//! trajectories. Complex scalars are always `[re, im]` pairs and matrices
//! are row-major nested arrays.

use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certifier::{CertifyOptions, StabilityCertificate};
use crate::error::{QlsError, Result};
use crate::fock_oracle::{InitialState, Trajectory};
use crate::linalg::CMat;
use crate::model::{PerturbationSpec, QuantumLinearModel, UncertainSystem};

/// Serde adapter: `C64` as `[re, im]`.
pub mod complex_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

/// Serde adapter: `CMat` as rows of `[re, im]` pairs.
pub mod cmat_serde {
    use super::*;
    use serde::{de::Error, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(&rows, "matrix").map_err(D::Error::custom)
    }
}

pub type Rows = Vec<Vec<[f64; 2]>>;

pub fn to_rows(m: &CMat) -> Rows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn from_rows(rows: &Rows, name: &str) -> Result<CMat> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(QlsError::Parse(format!("{name}: ragged rows")));
    }
    if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(QlsError::Parse(format!("{name}: non-finite entry")));
    }
    Ok(CMat::from_fn(r, c, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

/// On-disk model schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    #[serde(rename = "M1")]
    pub m1: Rows,
    #[serde(rename = "M2")]
    pub m2: Rows,
    #[serde(rename = "N1")]
    pub n1: Rows,
    #[serde(rename = "N2")]
    pub n2: Rows,
    #[serde(rename = "E1")]
    pub e1: Rows,
    #[serde(rename = "E2")]
    pub e2: Rows,
    pub perturbation: PerturbationSpec,
}

impl ModelFile {
    pub fn from_system(sys: &UncertainSystem) -> Self {
        let m = &sys.model;
        ModelFile {
            n: m.n,
            m1: to_rows(&m.m1),
            m2: to_rows(&m.m2),
            n1: to_rows(&m.n1),
            n2: to_rows(&m.n2),
            e1: to_rows(&m.e1),
            e2: to_rows(&m.e2),
            perturbation: sys.perturbation.clone(),
        }
    }

    pub fn to_system(&self) -> Result<UncertainSystem> {
        Ok(UncertainSystem {
            model: QuantumLinearModel {
                n: self.n,
                m1: from_rows(&self.m1, "M1")?,
                m2: from_rows(&self.m2, "M2")?,
                n1: from_rows(&self.n1, "N1")?,
                n2: from_rows(&self.n2, "N2")?,
                e1: from_rows(&self.e1, "E1")?,
                e2: from_rows(&self.e2, "E2")?,
            },
            perturbation: self.perturbation.clone(),
        })
    }
}

/// Parse a model file. Structural validity is checked separately.
pub fn parse_model(text: &str) -> Result<UncertainSystem> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| QlsError::Parse(format!("model: {e}")))?;
    file.to_system()
}

pub fn model_to_json(sys: &UncertainSystem) -> String {
    serde_json::to_string_pretty(&ModelFile::from_system(sys)).expect("model serializes")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    pub model: ModelFile,
    pub options: CertifyOptions,
}

/// Certificate as written to disk: the certificate fields at top level plus
/// the inputs it was derived from and a hash of the model file bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    #[serde(flatten)]
    pub certificate: StabilityCertificate,
    pub inputs: CertificateInputs,
    pub model_sha256: String,
}

pub fn certificate_to_json(file: &CertificateFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("certificate serializes");
    s.push('\n');
    s
}

pub fn parse_certificate(text: &str) -> Result<CertificateFile> {
    serde_json::from_str(text).map_err(|e| QlsError::Parse(format!("certificate: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub cutoff: usize,
    pub guard: usize,
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub steps: Option<usize>,
    pub rho0: InitialState,
}

pub fn parse_sim_config(text: &str) -> Result<SimConfig> {
    serde_json::from_str(text).map_err(|e| QlsError::Parse(format!("simulation config: {e}")))
}

pub const TRAJECTORY_HEADER: &str = "t,expV,expNumber,trace_err";

pub fn write_trajectory_csv(traj: &Trajectory, mut out: impl Write) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for i in 0..traj.times.len() {
        writeln!(
            out,
            "{:.12e},{:.12e},{:.12e},{:.3e}",
            traj.times[i], traj.exp_v[i], traj.exp_number[i], traj.trace_err[i]
        )?;
    }
    Ok(())
}
