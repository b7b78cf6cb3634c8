use nalgebra::{DMatrix, DVector};
use plwk_core::problems::{EllipticConfig, EllipticProblem, LinearBlockConfig, LinearBlockProblem};
use plwk_core::solver::{
    check_monotonicity, check_stopping, check_summability, lwk_step, lwkls_step,
};
use plwk_core::stepkernel::plwk_step;
use plwk_core::{
    run, DataVector, IterationState, Method, NoisyObservations, OperatorSystem, ParameterVector,
    Reference, Result, SolverConfig, StopReason, ThetaSchedule,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `F_i(x) = x_i` on `R^N`, one scalar equation per coordinate, or the full
/// identity `F(x) = x` when `scalar` is false.
struct Identity {
    dim: usize,
    scalar: bool,
    center: ParameterVector,
}

impl Identity {
    fn new(center: Vec<f64>, scalar: bool) -> Self {
        Self {
            dim: center.len(),
            scalar,
            center: ParameterVector::new(center).unwrap(),
        }
    }
}

impl OperatorSystem for Identity {
    fn n_equations(&self) -> usize {
        if self.scalar {
            self.dim
        } else {
            1
        }
    }
    fn param_dim(&self) -> usize {
        self.dim
    }
    fn data_dim(&self, _i: usize) -> usize {
        if self.scalar {
            1
        } else {
            self.dim
        }
    }
    fn domain_center(&self) -> &ParameterVector {
        &self.center
    }
    fn domain_radius(&self) -> f64 {
        100.0
    }
    fn derivative_bound(&self) -> f64 {
        1.0
    }
    fn eval_forward(&self, i: usize, x: &ParameterVector) -> Result<DataVector> {
        if self.scalar {
            DataVector::new(vec![x.as_slice()[i]])
        } else {
            DataVector::new(x.as_slice().to_vec())
        }
    }
    fn eval_deriv(&self, i: usize, _x: &ParameterVector, h: &ParameterVector) -> Result<DataVector> {
        self.eval_forward(i, h)
    }
    fn eval_adjoint(&self, i: usize, _x: &ParameterVector, r: &DataVector) -> Result<ParameterVector> {
        if self.scalar {
            let mut out = vec![0.0; self.dim];
            out[i] = r.as_slice()[0];
            ParameterVector::new(out)
        } else {
            ParameterVector::new(r.as_slice().to_vec())
        }
    }
}

fn exact_cfg(eta: f64) -> SolverConfig {
    SolverConfig {
        eta,
        tau: 3.0,
        ..SolverConfig::default()
    }
}

fn linear(cfg: LinearBlockConfig) -> LinearBlockProblem {
    LinearBlockProblem::generate(&cfg).unwrap()
}

/// Noise of relative size `pct` percent per block, rescaled exactly.
fn noisy(sys: &impl OperatorSystem, data: &[DataVector], pct: f64, seed: u64) -> NoisyObservations {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut deltas = Vec::new();
    for (i, y) in data.iter().enumerate() {
        let e: Vec<f64> = (0..y.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e = DataVector::new(e).unwrap();
        let e = e.scaled(pct / 100.0 * sys.data_norm(i, y) / sys.data_norm(i, &e));
        deltas.push(sys.data_norm(i, &e));
        out.push(y.add_scaled(1.0, &e).unwrap());
    }
    NoisyObservations::new(out, deltas).unwrap()
}

#[test]
fn already_converged_start_stops_at_zero() {
    let sys = Identity::new(vec![0.2, 0.25], true);
    let obs = NoisyObservations::new(vec![DataVector::zeros(1), DataVector::zeros(1)], vec![0.1, 0.1])
        .unwrap();
    let rec = run(&Method::Plwk, &sys, &obs, &exact_cfg(0.45), &Reference::default()).unwrap();
    assert_eq!(rec.stop_reason, StopReason::Converged);
    assert_eq!(rec.stop_index, 0);
    assert_eq!(rec.steps.len(), 2);
    assert!(rec.steps.iter().all(|s| !s.omega && s.step_norm == 0.0));
    assert_eq!(rec.final_iterate.as_slice(), &[0.2, 0.25]);
}

#[test]
fn identity_operator_is_solved_in_one_step_by_every_method() {
    let sys = Identity::new(vec![3.0, 4.0], false);
    let obs = NoisyObservations::exact(vec![DataVector::zeros(2)]);
    let cfg = exact_cfg(0.0);
    let state = IterationState::new(sys.domain_center().clone(), 1);
    let (x, rec) = plwk_step(&sys, &state, &obs, &cfg, 0).unwrap();
    assert_eq!(rec.lambda, 1.0);
    assert_eq!(x.as_slice(), &[0.0, 0.0]);
    let (x, _) = lwk_step(&sys, &state, &obs, &cfg, 0, 1.0).unwrap();
    assert_eq!(x.as_slice(), &[0.0, 0.0]);
    let (x, rec) = lwkls_step(&sys, &state, &obs, &cfg, 0, 1e3).unwrap();
    assert_eq!(rec.lambda, 1.0);
    assert_eq!(x.as_slice(), &[0.0, 0.0]);
}

#[test]
fn skipped_steps_leave_the_iterate_untouched() {
    let sys = Identity::new(vec![0.2], false);
    let obs = NoisyObservations::new(vec![DataVector::zeros(1)], vec![0.1]).unwrap();
    let cfg = exact_cfg(0.45);
    let state = IterationState::new(sys.domain_center().clone(), 1);
    for (x, rec) in [
        plwk_step(&sys, &state, &obs, &cfg, 0).unwrap(),
        lwk_step(&sys, &state, &obs, &cfg, 0, 0.5).unwrap(),
        lwkls_step(&sys, &state, &obs, &cfg, 0, 1.0).unwrap(),
    ] {
        assert!(!rec.omega);
        assert_eq!(rec.step_norm, 0.0);
        assert_eq!(rec.pde_solves, 1);
        assert_eq!(x.as_slice(), state.x.as_slice());
    }
}

#[test]
fn landweber_step_rejects_too_large_steps() {
    let sys = Identity::new(vec![3.0, 4.0], false);
    let obs = NoisyObservations::exact(vec![DataVector::zeros(2)]);
    let state = IterationState::new(sys.domain_center().clone(), 1);
    assert!(lwk_step(&sys, &state, &obs, &exact_cfg(0.0), 0, 1.5).is_err());
}

/// Minimizes `s -> ||A(x + s d) - y||^2` by bisection on its slope, with
/// the residual evaluated directly from the dense block.
fn line_search_oracle(a: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let d = -(a.transpose() * (a * x - y));
    let ad = a * &d;
    let slope = |s: f64| (a * (x + s * &d) - y).dot(&ad);
    let (mut lo, mut hi) = (0.0, 1.0);
    while slope(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn line_search_step_matches_one_dimensional_minimizer() {
    let lin = linear(LinearBlockConfig::default());
    let y = lin.exact_data();
    let obs = NoisyObservations::exact(y.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..lin.n_equations() {
        let x: Vec<f64> = (0..lin.param_dim())
            .map(|_| 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let state = IterationState::new(ParameterVector::new(x.clone()).unwrap(), lin.n_equations());
        let (_, rec) = lwkls_step(&lin, &state, &obs, &exact_cfg(0.0), i, 1e6).unwrap();
        let a = lin.block(i);
        let xv = DVector::from_vec(x);
        let yv = DVector::from_vec(y[i].as_slice().to_vec());
        let oracle = line_search_oracle(a, &xv, &yv);
        let g = a.transpose() * (a * &xv - &yv);
        let closed = g.norm_squared() / (a * &g).norm_squared();
        assert!((rec.lambda - oracle).abs() <= 1e-10 * oracle, "{} vs {oracle}", rec.lambda);
        assert!((rec.lambda - closed).abs() <= 1e-12 * closed);
    }
}

#[test]
fn exact_linear_steps_are_hyperplane_projections() {
    let lin = linear(LinearBlockConfig::default());
    let n = lin.n_equations();
    let y = lin.exact_data();
    let obs = NoisyObservations::exact(y.clone());
    let cfg = SolverConfig {
        max_cycles: 20,
        residual_floor: None,
        ..exact_cfg(0.0)
    };
    let mut state = IterationState::new(lin.domain_center().clone(), n);
    let mut oracle = DVector::from_vec(lin.domain_center().as_slice().to_vec());
    for k in 0..cfg.max_cycles * n {
        let i = k % n;
        state.k = k;
        let (x_new, _) = plwk_step(&lin, &state, &obs, &cfg, i).unwrap();
        let a = lin.block(i);
        let yi = DVector::from_vec(y[i].as_slice().to_vec());
        let gram = a * a.transpose();
        oracle -= a.transpose() * gram.lu().solve(&(a * &oracle - yi)).unwrap();
        let diff = (DVector::from_vec(x_new.as_slice().to_vec()) - &oracle).norm();
        assert!(diff <= 1e-12 * oracle.norm(), "step {k}: {diff}");
        state.x = x_new;
    }

    let rec = run(&Method::Plwk, &lin, &obs, &cfg, &Reference::solution(lin.true_solution().clone()))
        .unwrap();
    assert_eq!(rec.final_iterate, state.x);
    let mono = check_monotonicity(&rec);
    assert!(mono.holds(), "{mono:?}");
    let initial_error = lin.param_norm(&lin.true_solution().sub(lin.domain_center()).unwrap());
    let summ = check_summability(&rec, &cfg, initial_error);
    assert!(summ.holds(), "{summ:?}");
}

#[test]
fn truncated_steps_stay_above_the_minimal_step() {
    let lin = linear(LinearBlockConfig::default());
    let ell = EllipticProblem::new(EllipticConfig {
        grid_size: 15,
        ..EllipticConfig::default()
    })
    .unwrap();
    for (c, data, name) in [
        (lin.derivative_bound(), lin.exact_data(), "linear"),
        (ell.derivative_bound(), ell.coarse_data().unwrap(), "elliptic"),
    ] {
        let eta = 0.45;
        let floor = (1.0 - eta) / (c * c);
        let cfg = SolverConfig {
            eta,
            lambda_max: Some(2.0 * floor),
            max_cycles: 10,
            ..exact_cfg(eta)
        };
        let obs = NoisyObservations::exact(data);
        let rec = if name == "linear" {
            run(&Method::Plwk, &lin, &obs, &cfg, &Reference::default()).unwrap()
        } else {
            run(&Method::Plwk, &ell, &obs, &cfg, &Reference::default()).unwrap()
        };
        for s in rec.steps.iter().filter(|s| s.omega) {
            assert!(s.lambda >= floor * (1.0 - 1e-12), "{name}: {} < {floor}", s.lambda);
            assert!(s.lambda <= 2.0 * floor);
        }
    }
}

#[test]
fn projection_identity_on_the_elliptic_problem() {
    let p = EllipticProblem::new(EllipticConfig {
        grid_size: 15,
        ..EllipticConfig::default()
    })
    .unwrap();
    let obs = noisy(&p, p.exact_data(), 2.0, 1);
    let cfg = SolverConfig::default();
    let state = IterationState::new(p.initial_guess().clone(), p.n_equations());
    for i in 0..p.n_equations() {
        let (x_new, rec) = plwk_step(&p, &state, &obs, &cfg, i).unwrap();
        assert!(rec.omega);
        let r = p.forward(i, &state.x).unwrap().sub(obs.data(i)).unwrap();
        let g = p.deriv_adjoint_apply(i, &state.x, &r).unwrap();
        let step = x_new.sub(&state.x).unwrap();
        let along = p.param_inner(&step, &g).unwrap();
        assert!((along + rec.p_value).abs() <= 1e-12 * rec.p_value, "{along} vs {}", rec.p_value);
        let residual = step.add_scaled(rec.lambda, &g).unwrap();
        assert!(p.param_norm(&residual) <= 1e-12 * p.param_norm(&step));
    }
}

#[test]
fn runs_are_deterministic() {
    let lin = linear(LinearBlockConfig::default());
    let obs = noisy(&lin, &lin.exact_data(), 1.0, 2);
    let cfg = SolverConfig {
        rng_seed: 17,
        ..SolverConfig::default()
    };
    for method in [Method::Plwk, Method::Plwkr, Method::Lwk { step: None }, Method::Lwkls { cap: None }] {
        let reference = Reference::solution(lin.true_solution().clone());
        let a = run(&method, &lin, &obs, &cfg, &reference).unwrap();
        let b = run(&method, &lin, &obs, &cfg, &reference).unwrap();
        assert_eq!(a, b, "{method}");
    }
}

#[test]
fn single_equation_randomized_run_equals_cyclic_run() {
    let lin = linear(LinearBlockConfig {
        n_blocks: 1,
        rows_per_block: 20,
        ..LinearBlockConfig::default()
    });
    let obs = noisy(&lin, &lin.exact_data(), 1.0, 3);
    let cfg = SolverConfig::default();
    let a = run(&Method::Plwk, &lin, &obs, &cfg, &Reference::default()).unwrap();
    let b = run(&Method::Plwkr, &lin, &obs, &cfg, &Reference::default()).unwrap();
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.cycles, b.cycles);
    assert_eq!(a.final_iterate, b.final_iterate);
}

#[test]
fn noisy_linear_runs_stop_soundly() {
    let lin = linear(LinearBlockConfig::default());
    for seed in 0..4 {
        for pct in [4.0, 1.0] {
            let obs = noisy(&lin, &lin.exact_data(), pct, seed);
            let cfg = SolverConfig {
                rng_seed: seed,
                ..SolverConfig::default()
            };
            for method in [Method::Plwk, Method::Plwkr] {
                let reference = Reference::solution(lin.true_solution().clone());
                let rec = run(&method, &lin, &obs, &cfg, &reference).unwrap();
                assert_eq!(rec.stop_reason, StopReason::Converged);
                let report = check_stopping(&rec, &lin, &obs, &cfg).unwrap();
                assert!(report.holds(), "{report:?}");
                let mono = check_monotonicity(&rec);
                assert!(mono.holds(), "{mono:?}");
            }
        }
    }
}

#[test]
fn relaxation_changes_the_step_length_only() {
    let lin = linear(LinearBlockConfig::default());
    let obs = NoisyObservations::exact(lin.exact_data());
    let state = IterationState::new(lin.domain_center().clone(), lin.n_equations());
    let full = exact_cfg(0.0);
    let half = SolverConfig {
        theta: ThetaSchedule::Constant(0.5),
        ..exact_cfg(0.0)
    };
    let (x1, _) = plwk_step(&lin, &state, &obs, &full, 0).unwrap();
    let (xh, _) = plwk_step(&lin, &state, &obs, &half, 0).unwrap();
    let d1 = x1.sub(&state.x).unwrap();
    let dh = xh.sub(&state.x).unwrap();
    let diff = d1.scaled(0.5).sub(&dh).unwrap();
    assert!(lin.param_norm(&diff) <= 1e-14 * lin.param_norm(&d1));
}

#[test]
fn exact_data_never_stop_by_discrepancy() {
    let lin = linear(LinearBlockConfig::default());
    let obs = NoisyObservations::exact(lin.exact_data());
    let cfg = SolverConfig {
        max_cycles: 30,
        residual_floor: None,
        ..SolverConfig::default()
    };
    let rec = run(&Method::Plwk, &lin, &obs, &cfg, &Reference::default()).unwrap();
    assert_eq!(rec.stop_reason, StopReason::MaxCycles);
    assert_eq!(rec.cycles.len(), 31);
}
