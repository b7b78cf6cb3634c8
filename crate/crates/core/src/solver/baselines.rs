//! Classical Landweber-Kaczmarz steps used as comparison methods. Both share
//! the bang-bang skipping of the projective method.

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::record::{IterationState, StepRecord};
use crate::space::ParameterVector;
use crate::stepkernel::{check_new_iterate, compute_omega, compute_p, residual, skipped_record};
use crate::system::{NoisyObservations, OperatorSystem};

/// Default fixed Landweber step `0.9 / C^2`.
pub fn default_lwk_step(sys: &(impl OperatorSystem + ?Sized)) -> f64 {
    let c = sys.derivative_bound();
    0.9 / (c * c)
}

/// Default line-search cap `1000 / C^2`.
pub fn default_lwkls_cap(sys: &(impl OperatorSystem + ?Sized)) -> f64 {
    let c = sys.derivative_bound();
    1e3 / (c * c)
}

/// Fixed-step update `x - mu * F_i'(x)^*(F_i(x) - y_i^delta)`.
pub fn lwk_step(
    sys: &(impl OperatorSystem + ?Sized),
    state: &IterationState,
    obs: &NoisyObservations,
    cfg: &SolverConfig,
    i: usize,
    mu: f64,
) -> Result<(ParameterVector, StepRecord)> {
    let c = sys.derivative_bound();
    if !(mu > 0.0 && mu * c * c <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "Landweber step {mu} must satisfy 0 < mu * C^2 <= 1 (C = {c})"
        )));
    }
    let (x, k) = (&state.x, state.k);
    let delta = obs.delta(i);
    let theta = cfg.theta.at(k);
    let (r, r_norm) = residual(sys, i, x, obs.data(i))?;
    let p_value = compute_p(r_norm, cfg.eta, delta);
    if !compute_omega(r_norm, delta, cfg.tau) {
        return Ok((x.clone(), skipped_record(k, i, r_norm, theta, p_value)));
    }
    let g = sys.deriv_adjoint_apply(i, x, &r)?;
    let x_new = x.add_scaled(-mu, &g)?;
    check_new_iterate(sys, k, &x_new)?;
    let record = StepRecord {
        k,
        index: i,
        residual_norm: r_norm,
        omega: true,
        theta,
        lambda: mu,
        grad_norm: sys.param_norm(&g),
        p_value,
        step_norm: sys.param_norm(&x_new.sub(x)?),
        pde_solves: 2,
        error_before: None,
        error_after: None,
    };
    Ok((x_new, record))
}

/// Steepest-descent step with the exact minimizer of the linearized
/// residual `||r + s F_i'(x) d||^2` along `d = -F_i'(x)^* r`, capped at
/// `cap`.
pub fn lwkls_step(
    sys: &(impl OperatorSystem + ?Sized),
    state: &IterationState,
    obs: &NoisyObservations,
    cfg: &SolverConfig,
    i: usize,
    cap: f64,
) -> Result<(ParameterVector, StepRecord)> {
    if !(cap > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "line-search cap {cap} must be positive"
        )));
    }
    let (x, k) = (&state.x, state.k);
    let delta = obs.delta(i);
    let theta = cfg.theta.at(k);
    let (r, r_norm) = residual(sys, i, x, obs.data(i))?;
    let p_value = compute_p(r_norm, cfg.eta, delta);
    if !compute_omega(r_norm, delta, cfg.tau) {
        return Ok((x.clone(), skipped_record(k, i, r_norm, theta, p_value)));
    }
    let g = sys.deriv_adjoint_apply(i, x, &r)?;
    let d = g.scaled(-1.0);
    let jd = sys.deriv_apply(i, x, &d)?;
    let jd_norm2 = sys.data_inner(i, &jd, &jd)?;
    if jd_norm2 <= 0.0 {
        return Err(Error::DegenerateDirection { k });
    }
    let s_opt = -sys.data_inner(i, &r, &jd)? / jd_norm2;
    let s = s_opt.min(cap);
    let x_new = x.add_scaled(s, &d)?;
    check_new_iterate(sys, k, &x_new)?;
    let record = StepRecord {
        k,
        index: i,
        residual_norm: r_norm,
        omega: true,
        theta,
        lambda: s,
        grad_norm: sys.param_norm(&g),
        p_value,
        step_norm: sys.param_norm(&x_new.sub(x)?),
        pde_solves: 3,
        error_before: None,
        error_after: None,
    };
    Ok((x_new, record))
}
