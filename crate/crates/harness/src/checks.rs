//! Self-checks behind `plwk check`.

use plwk_core::problems::{estimate_tcc_eta, Problem};
use plwk_core::solver::{check_stopping, run};
use plwk_core::{DataVector, Method, OperatorSystem, ParameterVector, Reference, SolverConfig, StopReason};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::noise::{add_noise, noise_rng};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn gaussian(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Largest relative mismatch of `<F'(x)h, r> = <h, F'(x)^* r>` over
/// `samples` random triples near the domain center.
pub fn adjoint_mismatch(sys: &Problem, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for t in 0..samples {
        let i = t % sys.n_equations();
        let dir = sys.random_direction(&mut rng);
        let scale = 0.05 * sys.domain_radius() / sys.param_norm(&dir).max(f64::MIN_POSITIVE);
        let x = sys.domain_center().add_scaled(scale, &dir)?;
        let h = ParameterVector::new(gaussian(sys.param_dim(), &mut rng))?;
        let r = DataVector::new(gaussian(sys.data_dim(i), &mut rng))?;
        let lhs = sys.data_inner(i, &sys.eval_deriv(i, &x, &h)?, &r)?;
        let rhs = sys.param_inner(&h, &sys.eval_adjoint(i, &x, &r)?)?;
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(worst)
}

/// Difference-quotient errors `||(F(x+eh)-F(x))/e - F'(x)h||` on the ladder
/// `e = 1e-2, 5e-3, ...` down to `1e-5`, at the domain center, equation `i`,
/// together with `||F'(x)h||`.
pub fn difference_quotient_errors(sys: &Problem, i: usize, seed: u64) -> Result<(Vec<(f64, f64)>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = sys.domain_center();
    let h = sys.random_direction(&mut rng);
    let peak = h.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let h = h.scaled(1.0 / peak.max(f64::MIN_POSITIVE));
    let fx = sys.forward(i, x)?;
    let jh = sys.deriv_apply(i, x, &h)?;
    let mut out = Vec::new();
    let mut eps = 1e-2;
    while eps >= 1e-5 {
        let fe = sys.forward(i, &x.add_scaled(eps, &h)?)?;
        let quotient = fe.sub(&fx)?.scaled(1.0 / eps);
        out.push((eps, sys.data_norm(i, &quotient.sub(&jh)?)));
        eps /= 2.0;
    }
    Ok((out, sys.data_norm(i, &jh)))
}

/// Least-squares slope of `log error` against `log eps`.
pub fn observed_order(errors: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = errors.iter().map(|(e, r)| (e.ln(), r.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Runs all self-checks on `sys` with solver settings `cfg`.
pub fn self_check(sys: &Problem, cfg: &SolverConfig, seed: u64) -> Result<Vec<CheckResult>> {
    let mut results = Vec::new();

    let mismatch = adjoint_mismatch(sys, 20, seed)?;
    results.push(CheckResult {
        name: "adjoint identity",
        passed: mismatch <= 1e-10,
        detail: format!("max relative mismatch {mismatch:.3e} over 20 triples"),
    });

    let (errors, derivative_norm) = difference_quotient_errors(sys, 0, seed)?;
    // Linear operators have no Taylor remainder; only rounding is left.
    let exact = errors.iter().all(|(_, e)| *e <= 1e-8 * derivative_norm.max(1.0));
    let order = observed_order(&errors);
    results.push(CheckResult {
        name: "derivative order",
        passed: exact || order >= 0.9,
        detail: if exact {
            "difference quotients match the derivative to rounding".to_string()
        } else {
            format!("observed order {order:.3}")
        },
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta_hat = estimate_tcc_eta(sys, 10, 0.5, &mut rng)?;
    results.push(CheckResult {
        name: "cone condition",
        passed: eta_hat <= cfg.eta,
        detail: format!("estimated eta {eta_hat:.4} vs configured {}", cfg.eta),
    });

    let exact_data = sys.exact_data();
    let obs = add_noise(sys, &exact_data, 2.0, &mut noise_rng(seed))?;
    let rec = run(&Method::Plwk, sys, &obs, cfg, &Reference::default())?;
    let report = check_stopping(&rec, sys, &obs, cfg)?;
    results.push(CheckResult {
        name: "discrepancy stop",
        passed: rec.stop_reason == StopReason::Converged && report.holds(),
        detail: format!(
            "PLWK at 2% noise: {} at step {}",
            rec.stop_reason.as_str(),
            rec.stop_index
        ),
    });
    Ok(results)
}
