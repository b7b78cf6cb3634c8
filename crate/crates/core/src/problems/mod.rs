//! Built-in test problems and sampling diagnostics on operator systems.

pub mod elliptic;
pub mod linear;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use self::elliptic::{
    arc_length, boundary_profile, Bump, EllipticConfig, EllipticProblem, GammaProfile, ParamNorm,
};
pub use self::linear::{LinearBlockConfig, LinearBlockProblem};
use crate::error::{Error, Result};
use crate::space::{DataVector, ParameterVector, ZERO_TOL};
use crate::system::OperatorSystem;

/// Power iteration on `F_i'(x)^* F_i'(x)` for every equation; returns the
/// largest estimated operator norm.
pub fn estimate_derivative_bound(
    sys: &(impl OperatorSystem + ?Sized),
    x: &ParameterVector,
    iterations: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bound: f64 = 0.0;
    for i in 0..sys.n_equations() {
        let mut v = sys.random_direction(&mut rng);
        let mut sigma2 = 0.0;
        for _ in 0..iterations {
            let v_norm = sys.param_norm(&v);
            if v_norm == 0.0 {
                break;
            }
            v = v.scaled(1.0 / v_norm);
            let w = sys.eval_adjoint(i, x, &sys.eval_deriv(i, x, &v)?)?;
            let next = sys.param_inner(&v, &w)?;
            let converged = (next - sigma2).abs() <= 1e-12 * next.abs();
            sigma2 = next;
            v = w;
            if converged {
                break;
            }
        }
        bound = bound.max(sigma2.max(0.0).sqrt());
    }
    Ok(bound)
}

/// Empirical tangential cone constant
///
/// ```text
/// max ||F_i(xb) - F_i(x) - F_i'(x)(xb - x)|| / ||F_i(xb) - F_i(x)||
/// ```
///
/// over `n_samples` random pairs in `B_{rho * radius_fraction}(x_0)` and all
/// equations. Points outside the problem's admissible set are skipped, as
/// are pairs whose forward difference vanishes. Pairs are drawn in order
/// from `rng`, so a longer run with the same seed extends a shorter one.
pub fn estimate_tcc_eta(
    sys: &(impl OperatorSystem + ?Sized),
    n_samples: usize,
    radius_fraction: f64,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let radius = sys.domain_radius() * radius_fraction;
    let center = sys.domain_center();
    let draw = |rng: &mut dyn RngCore| -> Result<ParameterVector> {
        let dir = sys.random_direction(rng);
        let len = sys.param_norm(&dir);
        let r = radius * rng.random::<f64>();
        center.add_scaled(if len > 0.0 { r / len } else { 0.0 }, &dir)
    };

    let mut best: Option<f64> = None;
    for _ in 0..n_samples {
        let x = draw(rng)?;
        let xb = draw(rng)?;
        let step = xb.sub(&x)?;
        for i in 0..sys.n_equations() {
            let (fx, fxb) = match (sys.forward(i, &x), sys.forward(i, &xb)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(Error::GammaOutOfBounds { .. }), _) | (_, Err(Error::GammaOutOfBounds { .. })) => {
                    break
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let diff = fxb.sub(&fx)?;
            let denom = sys.data_norm(i, &diff);
            let scale = sys.data_norm(i, &fx) + sys.data_norm(i, &fxb);
            if denom <= ZERO_TOL * scale || denom == 0.0 {
                continue;
            }
            let remainder = diff.sub(&sys.deriv_apply(i, &x, &step)?)?;
            let ratio = sys.data_norm(i, &remainder) / denom;
            best = Some(best.map_or(ratio, |b| b.max(ratio)));
        }
    }
    best.ok_or(Error::NoValidPairs)
}

/// Serializable description of a built-in problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    LinearBlocks(LinearBlockConfig),
    Elliptic(EllipticConfig),
}

impl ProblemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LinearBlocks(_) => "linear_blocks",
            Self::Elliptic(_) => "elliptic",
        }
    }

    /// Default configurations of every built-in problem.
    pub fn builtin() -> Vec<ProblemConfig> {
        vec![
            Self::LinearBlocks(LinearBlockConfig::default()),
            Self::Elliptic(EllipticConfig::default()),
        ]
    }

    pub fn by_name(name: &str) -> Option<ProblemConfig> {
        Self::builtin().into_iter().find(|p| p.name() == name)
    }

    pub fn build(&self) -> Result<Problem> {
        Ok(match self {
            Self::LinearBlocks(cfg) => Problem::LinearBlocks(LinearBlockProblem::generate(cfg)?),
            Self::Elliptic(cfg) => Problem::Elliptic(EllipticProblem::new(cfg.clone())?),
        })
    }
}

/// A built-in problem with known solution.
#[derive(Debug, Clone)]
pub enum Problem {
    LinearBlocks(LinearBlockProblem),
    Elliptic(EllipticProblem),
}

macro_rules! delegate {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Problem::LinearBlocks($p) => $e,
            Problem::Elliptic($p) => $e,
        }
    };
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LinearBlocks(_) => "linear_blocks",
            Self::Elliptic(_) => "elliptic",
        }
    }

    /// The solution the data were generated from.
    pub fn reference_solution(&self) -> &ParameterVector {
        match self {
            Self::LinearBlocks(p) => p.true_solution(),
            Self::Elliptic(p) => p.true_gamma(),
        }
    }

    /// Noise-free data used for inversion.
    pub fn exact_data(&self) -> Vec<DataVector> {
        match self {
            Self::LinearBlocks(p) => p.exact_data(),
            Self::Elliptic(p) => p.exact_data().to_vec(),
        }
    }
}

impl OperatorSystem for Problem {
    fn n_equations(&self) -> usize {
        delegate!(self, p => p.n_equations())
    }
    fn param_dim(&self) -> usize {
        delegate!(self, p => p.param_dim())
    }
    fn data_dim(&self, i: usize) -> usize {
        delegate!(self, p => p.data_dim(i))
    }
    fn domain_center(&self) -> &ParameterVector {
        delegate!(self, p => p.domain_center())
    }
    fn domain_radius(&self) -> f64 {
        delegate!(self, p => p.domain_radius())
    }
    fn derivative_bound(&self) -> f64 {
        delegate!(self, p => p.derivative_bound())
    }
    fn param_inner(&self, a: &ParameterVector, b: &ParameterVector) -> Result<f64> {
        delegate!(self, p => p.param_inner(a, b))
    }
    fn data_inner(&self, i: usize, a: &DataVector, b: &DataVector) -> Result<f64> {
        delegate!(self, p => p.data_inner(i, a, b))
    }
    fn eval_forward(&self, i: usize, x: &ParameterVector) -> Result<DataVector> {
        delegate!(self, p => p.eval_forward(i, x))
    }
    fn eval_deriv(&self, i: usize, x: &ParameterVector, h: &ParameterVector) -> Result<DataVector> {
        delegate!(self, p => p.eval_deriv(i, x, h))
    }
    fn eval_adjoint(&self, i: usize, x: &ParameterVector, r: &DataVector) -> Result<ParameterVector> {
        delegate!(self, p => p.eval_adjoint(i, x, r))
    }
    fn random_direction(&self, rng: &mut dyn RngCore) -> ParameterVector {
        delegate!(self, p => p.random_direction(rng))
    }
}
