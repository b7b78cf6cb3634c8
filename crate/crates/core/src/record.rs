use serde::{Deserialize, Serialize};

use crate::space::ParameterVector;

/// The iterate together with its position in the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub x: ParameterVector,
    /// Global step counter.
    pub k: usize,
    /// `[k]`, the equation used by step `k`.
    pub active_index: usize,
    /// Order of the equations in the current cycle.
    pub cycle_permutation: Vec<usize>,
}

impl IterationState {
    pub fn new(x: ParameterVector, n_equations: usize) -> Self {
        Self {
            x,
            k: 0,
            active_index: 0,
            cycle_permutation: (0..n_equations).collect(),
        }
    }
}

/// What happened in one Kaczmarz step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub index: usize,
    /// `||F_i(x_k) - y_i^delta||`.
    pub residual_norm: f64,
    /// Bang-bang parameter: `false` means the step was skipped.
    pub omega: bool,
    pub theta: f64,
    /// Step size actually used (`lambda_k` for the projective methods, the
    /// fixed or line-searched length for the baselines). Zero when skipped.
    pub lambda: f64,
    /// `||F_i'(x_k)^* (F_i(x_k) - y_i^delta)||`, zero when skipped.
    pub grad_norm: f64,
    /// `p_i(||F_i(x_k) - y_i^delta||)`.
    pub p_value: f64,
    /// `||x_{k+1} - x_k||`.
    pub step_norm: f64,
    /// Operator evaluations (forward, derivative, adjoint) spent on the step.
    pub pde_solves: u32,
    /// `||reference - x_k||` when a reference solution is known.
    pub error_before: Option<f64>,
    /// `||reference - x_{k+1}||` when a reference solution is known.
    pub error_after: Option<f64>,
}

/// Diagnostics at a cycle boundary `x_{cN}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRow {
    pub cycle: usize,
    pub error_ref: Option<f64>,
    /// `sum_i ||F_i(x_{cN}) - y_i||`.
    pub residual_sum: f64,
    pub residual_max: f64,
    /// Skipped steps in the cycle that ended at this row (0 for cycle 0).
    pub skipped_steps: usize,
    /// Operator evaluations spent by all steps up to this row.
    pub cum_pde_solves: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// A full cycle passed with every step skipped.
    Converged,
    MaxCycles,
    /// Summed residual fell below the configured floor.
    ResidualFloor,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxCycles => "max_cycles",
            Self::ResidualFloor => "residual_floor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub n_equations: usize,
    pub steps: Vec<StepRecord>,
    /// One row per cycle boundary, starting with cycle 0.
    pub cycles: Vec<CycleRow>,
    /// `k_*`: the global index at which the iteration stopped.
    pub stop_index: usize,
    pub stop_reason: StopReason,
    pub final_iterate: ParameterVector,
}

impl RunRecord {
    pub fn cycles_executed(&self) -> usize {
        self.cycles.len().saturating_sub(1)
    }

    pub fn total_pde_solves(&self) -> u64 {
        self.cycles.last().map_or(0, |row| row.cum_pde_solves)
    }

    /// Error to the reference at the stopping index, if tracked.
    pub fn final_error(&self) -> Option<f64> {
        self.cycles.last().and_then(|row| row.error_ref)
    }

    pub fn skipped_steps(&self) -> usize {
        self.steps.iter().filter(|s| !s.omega).count()
    }
}
