//! Projective Landweber-Kaczmarz methods for systems of nonlinear ill-posed
//! operator equations `F_i(x) = y_i`, `i = 0, ..., N-1`.
//!
//! Each step acts on a single equation and projects the iterate onto a
//! halfspace that separates it from the solution set of that equation. A
//! bang-bang parameter skips equations whose residual is already below
//! `tau * delta_i`; the iteration stops after a full cycle of skips.
//!
//! - [`stepkernel`] holds the per-step formulas.
//! - [`solver`] runs cycles (cyclic or randomized order) plus the classical
//!   Landweber-Kaczmarz baselines and post-run diagnostics.
//! - [`problems`] provides a linear block system and a finite-difference
//!   Dirichlet-to-Neumann coefficient identification problem.

pub mod config;
pub mod error;
pub mod problems;
pub mod record;
pub mod solver;
pub mod space;
pub mod stepkernel;
pub mod system;

pub use config::{validate_config, IndexPolicy, SolverConfig, ThetaSchedule};
pub use error::{Error, Result};
pub use record::{CycleRow, IterationState, RunRecord, StepRecord, StopReason};
pub use solver::{run, Method, Reference};
pub use space::{inner, norm, DataVector, ParameterVector};
pub use system::{NoisyObservations, OperatorSystem};
