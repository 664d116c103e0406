//! Steady-state quantum correlations of a linearized optomechanical system
//! whose mirror spring is softened by a perturbatively coupled qubit.
//!
//! The pipeline is
//! [`params`] → [`steadystate`] (optional, physical mode) → [`dynamics`] →
//! [`lyapunov`] → [`measures`], with [`sweep`] driving parameter scans and
//! CSV output. All numerics work in units of the mechanical frequency
//! (`omega_m = 1`).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod lyapunov;
pub mod measures;
pub mod params;
pub mod steadystate;
pub mod sweep;

pub use dynamics::{DiffusionMatrix, DriftMatrix, Stability, StabilityVerdict};
pub use error::{Error, Result};
pub use lyapunov::CovarianceMatrix;
pub use measures::{CorrelationReport, SymplecticInvariants};
pub use params::{QubitSpec, ReducedParams, SystemSpec};
pub use steadystate::ClassicalFixedPoint;
pub use sweep::{SweepConfig, SweepMode, SweepRow};
