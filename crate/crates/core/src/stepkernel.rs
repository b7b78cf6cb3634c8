//! Single-step mathematics of the projective Landweber-Kaczmarz iteration.
//!
//! A step on equation `i` at the iterate `x` builds the halfspace
//!
//! ```text
//! H_{i,x} = { z : <z - x, g> <= -||r|| ((1-eta)||r|| - (1+eta) delta_i) },
//! r = F_i(x) - y_i^delta,   g = F_i'(x)^* r,
//! ```
//!
//! which contains every solution of `F_i(z) = y_i` inside the domain ball,
//! and moves `x` towards its (relaxed) orthogonal projection onto `H_{i,x}`.
//! Steps whose residual is already below `tau * delta_i` are skipped.

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::record::{IterationState, StepRecord};
use crate::space::{DataVector, ParameterVector, ZERO_TOL};
use crate::system::{NoisyObservations, OperatorSystem};

/// Bang-bang parameter: `true` iff `residual_norm > tau * delta_i`.
pub fn compute_omega(residual_norm: f64, delta_i: f64, tau: f64) -> bool {
    residual_norm > tau * delta_i
}

/// `p_i(t) = t ((1 - eta) t - (1 + eta) delta_i)`.
pub fn compute_p(t: f64, eta: f64, delta_i: f64) -> f64 {
    t * ((1.0 - eta) * t - (1.0 + eta) * delta_i)
}

/// Step size `p / ||g||^2`, optionally truncated at `lambda_max`.
///
/// A zero gradient norm yields 0. Negative `p` (possible only when the
/// step would be skipped anyway) is clamped to 0.
pub fn compute_lambda(p_value: f64, grad_norm: f64, lambda_max: Option<f64>) -> f64 {
    if grad_norm == 0.0 {
        return 0.0;
    }
    let lambda = p_value.max(0.0) / (grad_norm * grad_norm);
    match lambda_max {
        Some(cap) => lambda.min(cap),
        None => lambda,
    }
}

/// Whether `||g||` is indistinguishable from zero in floating point.
pub fn is_zero_gradient(grad_norm: f64, residual_norm: f64, derivative_bound: f64) -> bool {
    grad_norm <= ZERO_TOL * (1.0 + residual_norm * derivative_bound)
}

/// `{ z : <z - anchor, gradient> <= offset }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub anchor: ParameterVector,
    pub gradient: ParameterVector,
    pub offset: f64,
}

impl Halfspace {
    /// Membership test; boundary points within a relative `ZERO_TOL` count as
    /// members.
    pub fn contains(&self, sys: &(impl OperatorSystem + ?Sized), z: &ParameterVector) -> Result<bool> {
        let diff = z.sub(&self.anchor)?;
        let lhs = sys.param_inner(&diff, &self.gradient)?;
        let scale = self.offset.abs() + sys.param_norm(&diff) * sys.param_norm(&self.gradient);
        Ok(lhs <= self.offset + ZERO_TOL * scale)
    }
}

/// `F_i(x) - y_i^delta` and its norm.
pub(crate) fn residual(
    sys: &(impl OperatorSystem + ?Sized),
    i: usize,
    x: &ParameterVector,
    y: &DataVector,
) -> Result<(DataVector, f64)> {
    let r = sys.forward(i, x)?.sub(y)?;
    let norm = sys.data_norm(i, &r);
    Ok((r, norm))
}

pub fn build_halfspace(
    sys: &(impl OperatorSystem + ?Sized),
    i: usize,
    x: &ParameterVector,
    y_i_delta: &DataVector,
    delta_i: f64,
    eta: f64,
) -> Result<Halfspace> {
    let (r, r_norm) = residual(sys, i, x, y_i_delta)?;
    let gradient = sys.deriv_adjoint_apply(i, x, &r)?;
    Ok(Halfspace {
        anchor: x.clone(),
        gradient,
        offset: -compute_p(r_norm, eta, delta_i),
    })
}

/// Rejects iterates that left `B_rho(x_0)`.
pub(crate) fn check_new_iterate(
    sys: &(impl OperatorSystem + ?Sized),
    k: usize,
    x_new: &ParameterVector,
) -> Result<()> {
    let distance = sys.distance_from_center(x_new)?;
    let radius = sys.domain_radius();
    if distance <= radius {
        Ok(())
    } else {
        Err(Error::NewIterateLeftBall {
            k,
            distance,
            radius,
        })
    }
}

pub(crate) fn skipped_record(k: usize, i: usize, residual_norm: f64, theta: f64, p_value: f64) -> StepRecord {
    StepRecord {
        k,
        index: i,
        residual_norm,
        omega: false,
        theta,
        lambda: 0.0,
        grad_norm: 0.0,
        p_value,
        step_norm: 0.0,
        pde_solves: 1,
        error_before: None,
        error_after: None,
    }
}

/// One projective Landweber-Kaczmarz step on equation `i`.
///
/// With `theta = 1` and no truncation the new iterate is the orthogonal
/// projection of `state.x` onto [`Halfspace`] `H_{i,x}`.
pub fn plwk_step(
    sys: &(impl OperatorSystem + ?Sized),
    state: &IterationState,
    obs: &NoisyObservations,
    cfg: &SolverConfig,
    i: usize,
) -> Result<(ParameterVector, StepRecord)> {
    let x = &state.x;
    let k = state.k;
    let delta = obs.delta(i);
    let theta = cfg.theta.at(k);
    let (r, r_norm) = residual(sys, i, x, obs.data(i))?;
    let p_value = compute_p(r_norm, cfg.eta, delta);

    if !compute_omega(r_norm, delta, cfg.tau) {
        return Ok((x.clone(), skipped_record(k, i, r_norm, theta, p_value)));
    }

    let g = sys.deriv_adjoint_apply(i, x, &r)?;
    let mut g_norm = sys.param_norm(&g);
    if is_zero_gradient(g_norm, r_norm, sys.derivative_bound()) {
        g_norm = 0.0;
    }
    let lambda = compute_lambda(p_value, g_norm, cfg.lambda_max);
    let (x_new, step_norm) = if lambda == 0.0 {
        (x.clone(), 0.0)
    } else {
        let x_new = x.add_scaled(-theta * lambda, &g)?;
        check_new_iterate(sys, k, &x_new)?;
        let step_norm = sys.param_norm(&x_new.sub(x)?);
        (x_new, step_norm)
    };

    let record = StepRecord {
        k,
        index: i,
        residual_norm: r_norm,
        omega: true,
        theta,
        lambda,
        grad_norm: g_norm,
        p_value,
        step_norm,
        pde_solves: 2,
        error_before: None,
        error_after: None,
    };
    Ok((x_new, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{LinearBlockConfig, LinearBlockProblem};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn omega_examples() {
        assert!(compute_omega(5.0, 1.0, 3.0));
        assert!(!compute_omega(2.0, 1.0, 3.0));
        // The boundary case falls to the skip branch.
        assert!(!compute_omega(3.0, 1.0, 3.0));
    }

    #[test]
    fn p_examples() {
        assert_relative_eq!(compute_p(1.0, 0.45, 0.1), 0.405, max_relative = 1e-15);
        assert_relative_eq!(compute_p(2.0, 0.45, 0.0), 2.2, max_relative = 1e-15);
        assert_eq!(compute_p(0.0, 0.3, 0.7), 0.0);
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(compute_lambda(1.0, 1.0, None), 1.0);
        assert_eq!(compute_lambda(3.0, 0.0, None), 0.0);
        assert_eq!(compute_lambda(10.0, 1.0, Some(2.0)), 2.0);
        assert_eq!(compute_lambda(10.0, 1.0, Some(20.0)), 10.0);
    }

    #[test]
    fn halfspace_is_not_all_of_x_when_residual_large() {
        let sys = LinearBlockProblem::generate(&LinearBlockConfig::default()).unwrap();
        let x = sys.domain_center().clone();
        let y = sys.exact_data();
        let h = build_halfspace(&sys, 0, &x, &y[0], 0.0, 0.0).unwrap();
        assert!(!h.contains(&sys, &x).unwrap());
        assert!(h.contains(&sys, sys.true_solution()).unwrap());
    }

    /// `F(x) = x` on the real line.
    struct Line {
        center: ParameterVector,
    }

    impl OperatorSystem for Line {
        fn n_equations(&self) -> usize {
            1
        }
        fn param_dim(&self) -> usize {
            1
        }
        fn data_dim(&self, _i: usize) -> usize {
            1
        }
        fn domain_center(&self) -> &ParameterVector {
            &self.center
        }
        fn domain_radius(&self) -> f64 {
            10.0
        }
        fn derivative_bound(&self) -> f64 {
            1.0
        }
        fn eval_forward(&self, _i: usize, x: &ParameterVector) -> Result<DataVector> {
            DataVector::new(x.as_slice().to_vec())
        }
        fn eval_deriv(&self, _i: usize, _x: &ParameterVector, h: &ParameterVector) -> Result<DataVector> {
            DataVector::new(h.as_slice().to_vec())
        }
        fn eval_adjoint(&self, _i: usize, _x: &ParameterVector, r: &DataVector) -> Result<ParameterVector> {
            ParameterVector::new(r.as_slice().to_vec())
        }
    }

    fn point(v: f64) -> ParameterVector {
        ParameterVector::new(vec![v]).unwrap()
    }

    #[test]
    fn one_dimensional_halfspace() {
        let sys = Line { center: point(2.0) };
        let h = build_halfspace(&sys, 0, &point(2.0), &DataVector::zeros(1), 0.0, 0.0).unwrap();
        assert_eq!(h.gradient.as_slice(), &[2.0]);
        assert_eq!(h.offset, -4.0);
        assert!(h.contains(&sys, &point(0.0)).unwrap());
        assert!(h.contains(&sys, &point(-1.0)).unwrap());
        assert!(!h.contains(&sys, &point(2.0)).unwrap());
    }

    #[test]
    fn solved_equation_gives_whole_space() {
        let sys = Line { center: point(1.5) };
        let y = DataVector::new(vec![1.5]).unwrap();
        let h = build_halfspace(&sys, 0, &point(1.5), &y, 0.0, 0.3).unwrap();
        assert_eq!(h.gradient.as_slice(), &[0.0]);
        assert_eq!(h.offset, 0.0);
        assert!(h.contains(&sys, &point(-9.0)).unwrap());
    }

    proptest! {
        #[test]
        fn p_is_positive_above_threshold(
            eta in 0.0..0.95f64,
            tau_margin in 1.0001..5.0f64,
            delta in 1e-6..10.0f64,
            excess in 1.0..100.0f64,
        ) {
            let tau = tau_margin * crate::config::tau_lower_bound(eta);
            let t = tau * delta * excess * (1.0 + 1e-12);
            prop_assert!(compute_p(t, eta, delta) > 0.0);
        }

        #[test]
        fn lambda_never_exceeds_truncation(p in 0.0..1e3f64, g in 1e-3..1e3f64, cap in 1e-3..10.0f64) {
            let lambda = compute_lambda(p, g, Some(cap));
            prop_assert!(lambda >= 0.0 && lambda <= cap);
        }

        #[test]
        fn skipped_step_is_a_bitwise_noop(x in -5.0..5.0f64, tau_delta in 0.0..20.0f64) {
            let sys = Line { center: point(0.0) };
            let delta = tau_delta / 3.0;
            let obs = NoisyObservations::new(vec![DataVector::zeros(1)], vec![delta]).unwrap();
            let cfg = SolverConfig { eta: 0.45, tau: 3.0, ..SolverConfig::default() };
            let state = IterationState::new(point(x), 1);
            let (x_new, rec) = plwk_step(&sys, &state, &obs, &cfg, 0).unwrap();
            if x.abs() <= tau_delta {
                prop_assert!(!rec.omega);
                prop_assert_eq!(x_new.as_slice()[0].to_bits(), x.to_bits());
            } else {
                prop_assert!(rec.omega);
            }
        }

        #[test]
        fn halfspace_separates_solution_from_iterate(seed in 0u64..1000, i in 0usize..6) {
            use rand::SeedableRng;
            use rand_distr::{Distribution, StandardNormal};
            let sys = LinearBlockProblem::generate(&LinearBlockConfig::default()).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..sys.param_dim()).map(|_| 0.2 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            let x = ParameterVector::new(x).unwrap();
            let y = &sys.exact_data()[i];
            let r = sys.forward(i, &x).unwrap().sub(y).unwrap();
            prop_assume!(sys.data_norm(i, &r) > 0.0);
            let h = build_halfspace(&sys, i, &x, y, 0.0, 0.0).unwrap();
            prop_assert!(h.contains(&sys, sys.true_solution()).unwrap());
            prop_assert!(!h.contains(&sys, &x).unwrap());
        }
    }
}
