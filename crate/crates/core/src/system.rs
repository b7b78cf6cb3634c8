//! The operator family `F_0, ..., F_{N-1}` and the observed data.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::space::{inner, DataVector, ParameterVector};

/// A system of `N` operator equations `F_i(x) = y_i` posed on the ball
/// `B_rho(x_0)`.
///
/// Implementors provide the unchecked `eval_*` actions; callers go through
/// [`forward`](Self::forward), [`deriv_apply`](Self::deriv_apply) and
/// [`deriv_adjoint_apply`](Self::deriv_adjoint_apply), which reject points
/// outside the ball. The adjoint must be taken with respect to
/// [`param_inner`](Self::param_inner) and [`data_inner`](Self::data_inner):
/// `<F_i'(x) h, r>_Y = <h, F_i'(x)^* r>_X`.
pub trait OperatorSystem {
    fn n_equations(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn data_dim(&self, i: usize) -> usize;
    /// `x_0`, the center of the domain ball and the default initial iterate.
    fn domain_center(&self) -> &ParameterVector;
    /// `rho`.
    fn domain_radius(&self) -> f64;
    /// Upper bound `C` on `||F_i'(x)||` over the ball (possibly an estimate).
    fn derivative_bound(&self) -> f64;

    fn param_inner(&self, a: &ParameterVector, b: &ParameterVector) -> Result<f64> {
        inner(a, b)
    }

    fn data_inner(&self, _i: usize, a: &DataVector, b: &DataVector) -> Result<f64> {
        inner(a, b)
    }

    fn eval_forward(&self, i: usize, x: &ParameterVector) -> Result<DataVector>;
    fn eval_deriv(&self, i: usize, x: &ParameterVector, h: &ParameterVector) -> Result<DataVector>;
    fn eval_adjoint(&self, i: usize, x: &ParameterVector, r: &DataVector)
        -> Result<ParameterVector>;

    /// A random perturbation direction, used by sampling diagnostics.
    fn random_direction(&self, rng: &mut dyn RngCore) -> ParameterVector {
        let values = (0..self.param_dim())
            .map(|_| StandardNormal.sample(&mut *rng))
            .collect();
        ParameterVector::new(values).expect("gaussian samples are finite")
    }

    fn param_norm(&self, a: &ParameterVector) -> f64 {
        self.param_inner(a, a).map_or(f64::NAN, |v| v.max(0.0).sqrt())
    }

    fn data_norm(&self, i: usize, a: &DataVector) -> f64 {
        self.data_inner(i, a, a).map_or(f64::NAN, |v| v.max(0.0).sqrt())
    }

    fn distance_from_center(&self, x: &ParameterVector) -> Result<f64> {
        let diff = x.sub(self.domain_center())?;
        Ok(self.param_norm(&diff))
    }

    fn check_in_ball(&self, x: &ParameterVector) -> Result<()> {
        let distance = self.distance_from_center(x)?;
        let radius = self.domain_radius();
        if distance <= radius {
            Ok(())
        } else {
            Err(Error::OutsideDomainBall { distance, radius })
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        let len = self.n_equations();
        if i < len {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, len })
        }
    }

    fn forward(&self, i: usize, x: &ParameterVector) -> Result<DataVector> {
        self.check_index(i)?;
        self.check_in_ball(x)?;
        self.eval_forward(i, x)
    }

    fn deriv_apply(&self, i: usize, x: &ParameterVector, h: &ParameterVector) -> Result<DataVector> {
        self.check_index(i)?;
        self.check_in_ball(x)?;
        if h.len() != self.param_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.param_dim(),
                found: h.len(),
            });
        }
        self.eval_deriv(i, x, h)
    }

    fn deriv_adjoint_apply(
        &self,
        i: usize,
        x: &ParameterVector,
        r: &DataVector,
    ) -> Result<ParameterVector> {
        self.check_index(i)?;
        self.check_in_ball(x)?;
        if r.len() != self.data_dim(i) {
            return Err(Error::DimensionMismatch {
                expected: self.data_dim(i),
                found: r.len(),
            });
        }
        self.eval_adjoint(i, x, r)
    }
}

/// Measured data `y_i^delta` with per-equation noise levels `delta_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyObservations {
    data: Vec<DataVector>,
    noise_levels: Vec<f64>,
}

impl NoisyObservations {
    pub fn new(data: Vec<DataVector>, noise_levels: Vec<f64>) -> Result<Self> {
        if data.len() != noise_levels.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                found: noise_levels.len(),
            });
        }
        if let Some(bad) = noise_levels.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "noise level {bad} must be finite and non-negative"
            )));
        }
        Ok(Self { data, noise_levels })
    }

    /// Exact data: every `delta_i = 0`.
    pub fn exact(data: Vec<DataVector>) -> Self {
        let n = data.len();
        Self {
            data,
            noise_levels: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self, i: usize) -> &DataVector {
        &self.data[i]
    }

    pub fn all_data(&self) -> &[DataVector] {
        &self.data
    }

    pub fn delta(&self, i: usize) -> f64 {
        self.noise_levels[i]
    }

    pub fn noise_levels(&self) -> &[f64] {
        &self.noise_levels
    }

    pub fn is_exact(&self) -> bool {
        self.noise_levels.iter().all(|d| *d == 0.0)
    }

    pub fn delta_min(&self) -> f64 {
        self.noise_levels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks that the observations match the system's shape.
    pub fn check_against(&self, sys: &(impl OperatorSystem + ?Sized)) -> Result<()> {
        if self.len() != sys.n_equations() {
            return Err(Error::DimensionMismatch {
                expected: sys.n_equations(),
                found: self.len(),
            });
        }
        for (i, y) in self.data.iter().enumerate() {
            if y.len() != sys.data_dim(i) {
                return Err(Error::DimensionMismatch {
                    expected: sys.data_dim(i),
                    found: y.len(),
                });
            }
        }
        Ok(())
    }
}
