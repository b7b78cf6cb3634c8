use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::OperatorSystem;

/// Relaxation parameters `theta_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSchedule {
    Constant(f64),
    /// `theta_k = values[k mod values.len()]`.
    Periodic(Vec<f64>),
}

impl ThetaSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Self::Constant(theta) => *theta,
            Self::Periodic(values) if values.is_empty() => f64::NAN,
            Self::Periodic(values) => values[k % values.len()],
        }
    }

    /// `(a, b)` with `theta_k` in `[a, b]` for every `k`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Constant(theta) => (*theta, *theta),
            Self::Periodic(values) if values.is_empty() => (f64::NAN, f64::NAN),
            Self::Periodic(values) => values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, v| {
                (acc.0.min(*v), acc.1.max(*v))
            }),
        }
    }
}

impl Default for ThetaSchedule {
    fn default() -> Self {
        Self::Constant(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexPolicy {
    #[default]
    Cyclic,
    /// A fresh random permutation of the equations in every cycle.
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Tangential cone constant.
    pub eta: f64,
    /// Discrepancy threshold factor.
    pub tau: f64,
    pub theta: ThetaSchedule,
    /// Truncation constant for the step size; `None` keeps the exact projection.
    pub lambda_max: Option<f64>,
    pub index_policy: IndexPolicy,
    pub rng_seed: u64,
    pub max_cycles: usize,
    /// Engineering stop for exact data: halt once the summed residual of a
    /// cycle-start iterate drops below this value.
    pub residual_floor: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta: 0.45,
            tau: 3.0,
            theta: ThetaSchedule::default(),
            lambda_max: None,
            index_policy: IndexPolicy::Cyclic,
            rng_seed: 0,
            max_cycles: 500,
            residual_floor: Some(1e-12),
        }
    }
}

/// `(1 + eta) / (1 - eta)`, the strict lower bound for `tau`.
pub fn tau_lower_bound(eta: f64) -> f64 {
    (1.0 + eta) / (1.0 - eta)
}

/// Returns `cfg` unchanged if it is admissible for `sys`.
pub fn validate_config(
    cfg: SolverConfig,
    sys: &(impl OperatorSystem + ?Sized),
) -> Result<SolverConfig> {
    if !(cfg.eta.is_finite() && (0.0..1.0).contains(&cfg.eta)) {
        return Err(Error::EtaOutOfRange(cfg.eta));
    }
    let bound = tau_lower_bound(cfg.eta);
    // NaN tau fails the comparison and is rejected here too.
    if !(cfg.tau > bound) || !cfg.tau.is_finite() {
        return Err(Error::TauTooSmall { tau: cfg.tau, bound });
    }
    let (lower, upper) = cfg.theta.bounds();
    if !(lower > 0.0 && lower <= upper && upper < 2.0) {
        return Err(Error::ThetaOutOfRange { lower, upper });
    }
    if let Some(lambda_max) = cfg.lambda_max {
        let c = sys.derivative_bound();
        let bound = (1.0 - cfg.eta) / (c * c);
        if !(lambda_max > bound) || !lambda_max.is_finite() {
            return Err(Error::LambdaMaxTooSmall { lambda_max, bound });
        }
    }
    if cfg.max_cycles == 0 {
        return Err(Error::InvalidConfig("max_cycles must be positive".into()));
    }
    if let Some(floor) = cfg.residual_floor {
        if !(floor >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "residual_floor {floor} must be non-negative"
            )));
        }
    }
    Ok(cfg)
}
