//! Reference systems used by tests, benches, and the bundled example files.

use crate::linalg::{c, r, CMat};
use crate::model::{PerturbationSpec, QuantumLinearModel, UncertainSystem};

fn one(z: num_complex::Complex64) -> CMat {
    CMat::from_element(1, 1, z)
}

/// Single damped mode: `M = 0`, `L1 = √κ a`, `ζ = a`, with sector data
/// `γ = 10`, `δ1 = δ3 = 0.1`, `δ2 = 0.01` and `f(ζ) = 0.05ζ + 0.01ζ²`.
pub fn damped_mode() -> UncertainSystem {
    damped_mode_with(10.0, 10.0)
}

pub fn damped_mode_with(kappa: f64, gamma: f64) -> UncertainSystem {
    UncertainSystem {
        model: QuantumLinearModel {
            n: 1,
            m1: one(r(0.0)),
            m2: one(r(0.0)),
            n1: one(r(kappa.sqrt())),
            n2: one(r(0.0)),
            e1: one(r(1.0)),
            e2: one(r(0.0)),
        },
        perturbation: PerturbationSpec {
            gamma,
            delta1: 0.1,
            delta2: 0.01,
            delta3: 0.1,
            poly: Some(vec![r(0.0), r(0.05), r(0.01)]),
        },
    }
}

/// Closed (uncoupled) oscillator: `N = 0`, so `F = −iJM` is never Hurwitz.
pub fn closed_oscillator() -> UncertainSystem {
    let mut sys = damped_mode();
    sys.model.m1 = one(r(1.0));
    sys.model.n1 = one(r(0.0));
    sys
}

/// Two coupled modes with squeezing; used where `2n > 2` matters.
pub fn two_mode() -> UncertainSystem {
    UncertainSystem {
        model: QuantumLinearModel {
            n: 2,
            m1: CMat::from_row_slice(2, 2, &[r(1.0), c(0.2, 0.1), c(0.2, -0.1), r(0.5)]),
            m2: CMat::from_row_slice(2, 2, &[r(0.1), r(0.05), r(0.05), r(0.0)]),
            n1: CMat::from_row_slice(1, 2, &[r(2.0), r(1.5)]),
            n2: CMat::from_row_slice(1, 2, &[r(0.0), r(0.1)]),
            e1: CMat::from_row_slice(1, 2, &[r(1.0), r(0.0)]),
            e2: CMat::from_row_slice(1, 2, &[r(0.0), r(0.0)]),
        },
        perturbation: PerturbationSpec { gamma: 50.0, delta1: 0.05, delta2: 0.001, delta3: 0.05, poly: None },
    }
}
