use thiserror::Error;

#[derive(Debug, Error)]
pub enum QlsError {
    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix F is not Hurwitz (spectral abscissa {abscissa:.3e}); H-infinity norm infinite / undefined")]
    NotHurwitz { abscissa: f64 },

    #[error("no stabilizing Riccati solution (achieved H-infinity norm {norm:.6})")]
    RiccatiInfeasible { norm: f64 },

    #[error("H-infinity bisection failed: {0}")]
    Bisection(String),

    #[error("base QMI infeasible (largest eigenvalue {0:.3e})")]
    QmiInfeasible(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("Fock space too large: dimension {dim} exceeds cap {cap}; reduce cutoff or mode count")]
    FockTooLarge { dim: usize, cap: usize },

    #[error("integration error: {0}")]
    Integration(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QlsError>;
