//! Post-run checks of the convergence estimates on recorded runs.

use serde::Serialize;

use crate::config::SolverConfig;
use crate::error::Result;
use crate::record::{RunRecord, StopReason};
use crate::system::{NoisyObservations, OperatorSystem};

/// Relative slack allowed in every inequality checked here.
pub const RELATIVE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub k: usize,
    /// `||x* - x_{k+1}||^2 + gain`.
    pub lhs: f64,
    /// `||x* - x_k||^2`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    /// Active steps on which the error-gain inequality was evaluated.
    pub checked_steps: usize,
    pub violations: usize,
    pub first_violation: Option<MonotonicityViolation>,
    /// Steps where `||x* - x_{k+1}|| > ||x* - x_k||` beyond the slack.
    pub error_increases: usize,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.error_increases == 0
    }
}

/// Checks `||x* - x_{k+1}||^2 + t(2-t) (p/||g||)^2 <= ||x* - x_k||^2` on
/// every active step, where `t = theta * lambda ||g||^2 / p` is the
/// effective relaxation (equal to `theta` without truncation).
///
/// Uses the per-step errors recorded against the run's reference solution;
/// steps without them are not counted.
pub fn check_monotonicity(record: &RunRecord) -> MonotonicityReport {
    let mut report = MonotonicityReport {
        checked_steps: 0,
        violations: 0,
        first_violation: None,
        error_increases: 0,
    };
    for step in &record.steps {
        let (Some(before), Some(after)) = (step.error_before, step.error_after) else {
            continue;
        };
        if after > before * (1.0 + RELATIVE_SLACK) {
            report.error_increases += 1;
        }
        if !step.omega || step.grad_norm == 0.0 || step.p_value <= 0.0 {
            continue;
        }
        report.checked_steps += 1;
        let ratio = step.p_value / step.grad_norm;
        let relax = step.theta * step.lambda * step.grad_norm * step.grad_norm / step.p_value;
        let lhs = after * after + relax * (2.0 - relax) * ratio * ratio;
        let rhs = before * before;
        if lhs > rhs * (1.0 + RELATIVE_SLACK) {
            report.violations += 1;
            if report.first_violation.is_none() {
                report.first_violation = Some(MonotonicityViolation {
                    k: step.k,
                    lhs,
                    rhs,
                });
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummabilityReport {
    /// `||x* - x_0||^2 / (a (2 - b) (1 - eta))`.
    pub bound: f64,
    /// Full sum `sum_k lambda_k ||F_[k](x_k) - y_[k]||^2`.
    pub weighted_residual_sum: f64,
    /// Full sum `sum_k ||x_{k+1} - x_k||^2`.
    pub step_sum: f64,
    /// First prefix (step index) violating the residual bound.
    pub first_bound_violation: Option<usize>,
    /// First prefix violating `step_sum <= 4 * weighted_residual_sum`.
    pub first_step_violation: Option<usize>,
}

impl SummabilityReport {
    pub fn holds(&self) -> bool {
        self.first_bound_violation.is_none() && self.first_step_violation.is_none()
    }
}

/// Prefix-sum checks for an exact-data run. `initial_error` is
/// `||x* - x_0||`.
pub fn check_summability(record: &RunRecord, cfg: &SolverConfig, initial_error: f64) -> SummabilityReport {
    let (a, b) = cfg.theta.bounds();
    let bound = initial_error * initial_error / (a * (2.0 - b) * (1.0 - cfg.eta));
    let mut weighted = 0.0;
    let mut steps = 0.0;
    let mut first_bound_violation = None;
    let mut first_step_violation = None;
    for step in &record.steps {
        weighted += step.lambda * step.residual_norm * step.residual_norm;
        steps += step.step_norm * step.step_norm;
        if first_bound_violation.is_none() && weighted > bound * (1.0 + RELATIVE_SLACK) {
            first_bound_violation = Some(step.k);
        }
        if first_step_violation.is_none() && steps > 4.0 * weighted * (1.0 + RELATIVE_SLACK) {
            first_step_violation = Some(step.k);
        }
    }
    SummabilityReport {
        bound,
        weighted_residual_sum: weighted,
        step_sum: steps,
        first_bound_violation,
        first_step_violation,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingReport {
    pub stopped_by_discrepancy: bool,
    pub stop_index_multiple_of_n: bool,
    /// Every `||F_i(x_{k*}) - y_i^delta|| <= tau delta_i`, re-evaluated.
    pub residuals_below_threshold: bool,
    /// Every cycle before `k*` has at least one active step.
    pub earlier_cycles_active: bool,
    /// The stopping cycle skipped all `N` steps.
    pub final_cycle_all_skipped: bool,
}

impl StoppingReport {
    pub fn holds(&self) -> bool {
        !self.stopped_by_discrepancy
            || (self.stop_index_multiple_of_n
                && self.residuals_below_threshold
                && self.earlier_cycles_active
                && self.final_cycle_all_skipped)
    }
}

/// Verifies the discrepancy stop of a finished run.
pub fn check_stopping(
    record: &RunRecord,
    sys: &(impl OperatorSystem + ?Sized),
    obs: &NoisyObservations,
    cfg: &SolverConfig,
) -> Result<StoppingReport> {
    let n = record.n_equations;
    let stopped = record.stop_reason == StopReason::Converged;
    let k_star = record.stop_index;
    let mut residuals_ok = true;
    if stopped {
        for i in 0..n {
            let r = sys.forward(i, &record.final_iterate)?.sub(obs.data(i))?;
            if sys.data_norm(i, &r) > cfg.tau * obs.delta(i) {
                residuals_ok = false;
            }
        }
    }
    let earlier_active = record
        .steps
        .chunks(n)
        .take(k_star / n.max(1))
        .all(|cycle| cycle.iter().any(|s| s.omega));
    let final_skipped = stopped
        && record
            .steps
            .get(k_star..k_star + n)
            .is_some_and(|cycle| cycle.iter().all(|s| !s.omega));
    Ok(StoppingReport {
        stopped_by_discrepancy: stopped,
        stop_index_multiple_of_n: k_star % n.max(1) == 0,
        residuals_below_threshold: residuals_ok,
        earlier_cycles_active: earlier_active,
        final_cycle_all_skipped: final_skipped,
    })
}

/// Skipped-step statistics of a run, per cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkipTrend {
    pub skipped_per_cycle: Vec<usize>,
    /// Skipped fraction over the first third of the cycles up to `k*`.
    pub first_third: f64,
    /// Skipped fraction over the last third of the cycles up to `k*`.
    pub last_third: f64,
}

impl SkipTrend {
    pub fn increasing(&self) -> bool {
        self.last_third > self.first_third
    }
}

/// Skipped-step counts of every executed cycle. The thirds are taken over
/// the cycles before the stopping cycle.
pub fn skip_trend(record: &RunRecord) -> SkipTrend {
    let n = record.n_equations.max(1);
    let skipped_per_cycle: Vec<usize> = record
        .steps
        .chunks(n)
        .map(|cycle| cycle.iter().filter(|s| !s.omega).count())
        .collect();
    let considered = match record.stop_reason {
        StopReason::Converged => &skipped_per_cycle[..skipped_per_cycle.len() - 1],
        _ => &skipped_per_cycle[..],
    };
    let third = considered.len() / 3;
    let fraction = |cycles: &[usize]| {
        if cycles.is_empty() {
            0.0
        } else {
            cycles.iter().sum::<usize>() as f64 / (cycles.len() * n) as f64
        }
    };
    SkipTrend {
        first_third: fraction(&considered[..third]),
        last_third: fraction(&considered[considered.len() - third..]),
        skipped_per_cycle,
    }
}
