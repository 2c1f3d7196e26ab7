//! Bundled reference data: a rectangular-actuation plant (n = 2, m = p = 1)
//! with a published design and certificate, and its fully actuated
//! counterpart (m = n = 2) that collapses the projection.

use crate::linalg::RMatrix;
use crate::smc::{DelayedSystem, DesignInputs};

fn rm(rows: &[&[f64]]) -> RMatrix {
    RMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).expect("static data")
}

fn plant_a() -> RMatrix {
    rm(&[&[0.8, 0.1], &[-0.2, 0.9]])
}

/// Scaling weight used with both plants.
pub const LAMBDA: f64 = 0.5;

pub fn underactuated_system() -> DelayedSystem {
    DelayedSystem::new(
        plant_a(),
        RMatrix::identity(2).scale(0.05),
        rm(&[&[0.5], &[1.0]]),
        rm(&[&[1.0, 0.5]]),
        rm(&[&[0.1], &[0.1]]),
        1,
        0.1,
    )
    .expect("static data")
}

pub fn full_actuation_system() -> DelayedSystem {
    DelayedSystem::new(
        plant_a(),
        RMatrix::identity(2).scale(0.05),
        RMatrix::identity(2),
        RMatrix::identity(2),
        RMatrix::identity(2).scale(0.1),
        1,
        0.1,
    )
    .expect("static data")
}

pub fn underactuated_gain() -> RMatrix {
    rm(&[&[1.0, 0.5]])
}

pub fn underactuated_design() -> DesignInputs {
    DesignInputs {
        r0: 2.0,
        r_d0: 2.0,
        rho_max: 0.2,
        k: underactuated_gain(),
        phi: 0.5,
        rho: 0.2,
        s0_norm: Some(1.5),
    }
}

/// Initial history `[x(0), x(−1)]`.
pub fn underactuated_history() -> Vec<Vec<f64>> {
    vec![vec![0.5, 0.5], vec![0.0, 0.0]]
}

/// Published certificate `(Q, Ỹ, γ)` for the rectangular plant.
pub fn published_certificate() -> (RMatrix, RMatrix, f64) {
    (
        rm(&[&[2.95, 0.42], &[0.42, 3.18]]),
        RMatrix::diag(&[0.32, 0.37]),
        0.24,
    )
}
