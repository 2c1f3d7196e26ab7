//! Rota-Baxter deformations of delayed discrete-time sliding-mode control
//! systems: operator algebra checks, sequential reaching design,
//! Lyapunov-Krasovskii LMI certificates, delayed spectra and simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod examples;
pub mod linalg;
pub mod lmi;
pub mod rota_baxter;
pub mod smc;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
