//! Robust mean-square stability certificates for linear quantum systems
//! with sector-bounded perturbations of the coupling operator, plus a
//! truncated Fock-space oracle that checks them independently.

pub mod bounded_real;
pub mod certifier;
pub mod error;
pub mod fock_oracle;
pub mod io;
pub mod linalg;
pub mod model;
pub mod scaling_search;
pub mod systems;

pub use bounded_real::{HinfResult, QmiCheck, RiccatiSolution, Scalings};
pub use certifier::{CertifyOptions, CertifyOutcome, InfeasibleReason, RiccatiVariant, StabilityCertificate, Tau25Policy};
pub use error::{QlsError, Result};
pub use fock_oracle::{BoundReport, FockRep, InitialState, Trajectory};
pub use linalg::CMat;
pub use model::{PerturbationSpec, QuantumLinearModel, UncertainSystem, ValidationReport};
pub use num_complex::Complex64;
pub use scaling_search::{ScalingTriple, SearchOptions, SearchOutcome};
