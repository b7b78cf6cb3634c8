//! The Kaczmarz sweep: index selection, the discrepancy stop and per-cycle
//! bookkeeping for the projective methods and their classical baselines.

pub mod baselines;
pub mod diagnostics;
pub mod index;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use self::baselines::{default_lwk_step, default_lwkls_cap, lwk_step, lwkls_step};
pub use self::diagnostics::{
    check_monotonicity, check_stopping, check_summability, skip_trend, MonotonicityReport,
    StoppingReport, SummabilityReport, SkipTrend,
};
pub use self::index::{cycle_permutation, select_index};
use crate::config::{IndexPolicy, SolverConfig};
use crate::error::{Error, Result};
use crate::record::{CycleRow, IterationState, RunRecord, StepRecord, StopReason};
use crate::space::{DataVector, ParameterVector};
use crate::stepkernel::plwk_step;
use crate::system::{NoisyObservations, OperatorSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    /// Projective Landweber-Kaczmarz.
    Plwk,
    /// Projective Landweber-Kaczmarz with a random order in every cycle.
    Plwkr,
    /// Landweber-Kaczmarz with a fixed step (default `0.9 / C^2`).
    Lwk { step: Option<f64> },
    /// Landweber-Kaczmarz with an exact linearized line search, capped
    /// (default cap `1000 / C^2`).
    Lwkls { cap: Option<f64> },
}

impl Method {
    pub const ALL: [&'static str; 4] = ["PLWK", "PLWKr", "LWK", "LWKls"];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Plwk => "PLWK",
            Self::Plwkr => "PLWKr",
            Self::Lwk { .. } => "LWK",
            Self::Lwkls { .. } => "LWKls",
        }
    }

    pub fn is_projective(&self) -> bool {
        matches!(self, Self::Plwk | Self::Plwkr)
    }

    /// Index policy actually used: the randomized method always shuffles.
    pub fn index_policy(&self, cfg: &SolverConfig) -> IndexPolicy {
        match self {
            Self::Plwkr => IndexPolicy::Randomized,
            _ => cfg.index_policy,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plwk" => Ok(Self::Plwk),
            "plwkr" => Ok(Self::Plwkr),
            "lwk" => Ok(Self::Lwk { step: None }),
            "lwkls" => Ok(Self::Lwkls { cap: None }),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

/// Known quantities used only for diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Reference {
    /// Solution to measure iteration errors against.
    pub solution: Option<ParameterVector>,
    /// Noise-free data for the per-cycle residual; falls back to the
    /// observations when absent.
    pub exact_data: Option<Vec<DataVector>>,
}

impl Reference {
    pub fn solution(solution: ParameterVector) -> Self {
        Self {
            solution: Some(solution),
            exact_data: None,
        }
    }
}

fn cycle_row(
    sys: &(impl OperatorSystem + ?Sized),
    x: &ParameterVector,
    obs: &NoisyObservations,
    reference: &Reference,
    cycle: usize,
    skipped_steps: usize,
    cum_pde_solves: u64,
) -> Result<(CycleRow, f64)> {
    let targets = reference.exact_data.as_deref().unwrap_or(obs.all_data());
    let mut residual_sum = 0.0;
    let mut residual_max: f64 = 0.0;
    let mut observed_sum = 0.0;
    for i in 0..sys.n_equations() {
        let fx = sys.forward(i, x)?;
        let r = sys.data_norm(i, &fx.sub(&targets[i])?);
        residual_sum += r;
        residual_max = residual_max.max(r);
        observed_sum += sys.data_norm(i, &fx.sub(obs.data(i))?);
    }
    let error_ref = match &reference.solution {
        Some(sol) => Some(sys.param_norm(&sol.sub(x)?)),
        None => None,
    };
    let row = CycleRow {
        cycle,
        error_ref,
        residual_sum,
        residual_max,
        skipped_steps,
        cum_pde_solves,
    };
    Ok((row, observed_sum))
}

/// Runs `method` from `x_0 = sys.domain_center()` until a full cycle is
/// skipped, the residual floor is reached, or `cfg.max_cycles` cycles have
/// been executed.
pub fn run(
    method: &Method,
    sys: &(impl OperatorSystem + ?Sized),
    obs: &NoisyObservations,
    cfg: &SolverConfig,
    reference: &Reference,
) -> Result<RunRecord> {
    obs.check_against(sys)?;
    if let Some(exact) = &reference.exact_data {
        if exact.len() != sys.n_equations() {
            return Err(Error::DimensionMismatch {
                expected: sys.n_equations(),
                found: exact.len(),
            });
        }
    }
    let n = sys.n_equations();
    let policy = method.index_policy(cfg);
    let lwk_mu = match method {
        Method::Lwk { step } => step.unwrap_or_else(|| default_lwk_step(sys)),
        _ => 0.0,
    };
    let lwkls_cap = match method {
        Method::Lwkls { cap } => cap.unwrap_or_else(|| default_lwkls_cap(sys)),
        _ => 0.0,
    };

    let mut state = IterationState::new(sys.domain_center().clone(), n);
    let mut error = match &reference.solution {
        Some(sol) => Some(sys.param_norm(&sol.sub(&state.x)?)),
        None => None,
    };
    let mut steps: Vec<StepRecord> = Vec::new();
    let (row0, _) = cycle_row(sys, &state.x, obs, reference, 0, 0, 0)?;
    let mut cycles = vec![row0];
    let mut cum_pde_solves: u64 = 0;
    let mut outcome = None;

    for cycle in 0..cfg.max_cycles {
        state.cycle_permutation = cycle_permutation(policy, cycle, n, cfg.rng_seed);
        let mut skipped = 0;
        for j in 0..n {
            state.k = cycle * n + j;
            state.active_index = state.cycle_permutation[j];
            let i = state.active_index;
            let (x_new, mut record) = match method {
                Method::Plwk | Method::Plwkr => plwk_step(sys, &state, obs, cfg, i)?,
                Method::Lwk { .. } => lwk_step(sys, &state, obs, cfg, i, lwk_mu)?,
                Method::Lwkls { .. } => lwkls_step(sys, &state, obs, cfg, i, lwkls_cap)?,
            };
            if let Some(sol) = &reference.solution {
                record.error_before = error;
                let after = if record.omega {
                    sys.param_norm(&sol.sub(&x_new)?)
                } else {
                    error.unwrap_or_default()
                };
                record.error_after = Some(after);
                error = Some(after);
            }
            if !record.omega {
                skipped += 1;
            }
            cum_pde_solves += u64::from(record.pde_solves);
            steps.push(record);
            state.x = x_new;
        }
        let (row, observed_sum) =
            cycle_row(sys, &state.x, obs, reference, cycle + 1, skipped, cum_pde_solves)?;
        cycles.push(row);
        if skipped == n {
            outcome = Some((cycle * n, StopReason::Converged));
            break;
        }
        if let Some(floor) = cfg.residual_floor {
            if observed_sum < floor {
                outcome = Some(((cycle + 1) * n, StopReason::ResidualFloor));
                break;
            }
        }
    }
    let (stop_index, stop_reason) =
        outcome.unwrap_or((cfg.max_cycles * n, StopReason::MaxCycles));

    Ok(RunRecord {
        method: method.name().to_string(),
        n_equations: n,
        steps,
        cycles,
        stop_index,
        stop_reason,
        final_iterate: state.x,
    })
}
