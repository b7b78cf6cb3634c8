//! Coefficient identification from Dirichlet-to-Neumann data.
//!
//! Equation `i` maps a nodal coefficient `gamma` to the boundary co-normal
//! flux of the solution of `-div(gamma grad u) = 0`, `u = U_i` on the
//! boundary of the unit square. Data are measured in a discrete boundary
//! L2 norm; the parameter space carries either a discrete L2 or H1 inner
//! product, and the adjoint is exact with respect to the chosen pair.

pub mod banded;
pub mod fd;

use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, Mutex};

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use self::banded::{BandedCholesky, BandedMatrix};
use self::fd::{Grid, Stiffness};
use crate::error::{Error, Result};
use crate::problems::estimate_derivative_bound;
use crate::space::{weighted_inner, DataVector, ParameterVector};
use crate::system::OperatorSystem;

/// Arc length from `(0,0)` to `t`, counterclockwise along the boundary of
/// the unit square. `None` if `t` is not on the boundary.
pub fn arc_length(t: [f64; 2]) -> Option<f64> {
    const TOL: f64 = 1e-12;
    let [x, y] = t;
    let inside = |v: f64| (-TOL..=1.0 + TOL).contains(&v);
    if !(inside(x) && inside(y)) {
        return None;
    }
    if y.abs() <= TOL && x < 1.0 {
        Some(x)
    } else if (x - 1.0).abs() <= TOL && y < 1.0 {
        Some(1.0 + y)
    } else if (y - 1.0).abs() <= TOL && x > 0.0 {
        Some(3.0 - x)
    } else if x.abs() <= TOL && y > 0.0 {
        Some(4.0 - y)
    } else {
        None
    }
}

/// Voltage profile `U_i` at one boundary point: `sin(s (j+1) pi/2)` for
/// `i = 2j` and `cos(s (j+1) pi/2)` for `i = 2j + 1`.
fn profile_value(i: usize, s: f64) -> f64 {
    let freq = (i / 2 + 1) as f64 * FRAC_PI_2;
    if i % 2 == 0 {
        (s * freq).sin()
    } else {
        (s * freq).cos()
    }
}

/// Evaluates `U_i` at the given boundary positions.
pub fn boundary_profile(i: usize, n_experiments: usize, positions: &[[f64; 2]]) -> Result<DataVector> {
    if i >= n_experiments {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: n_experiments,
        });
    }
    let values = positions
        .iter()
        .map(|&t| {
            arc_length(t).map(|s| profile_value(i, s)).ok_or_else(|| {
                Error::InvalidConfig(format!("point {t:?} is not on the boundary"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DataVector::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamNorm {
    L2,
    #[default]
    H1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub amplitude: f64,
    pub radius: f64,
}

/// `background + sum amplitude * exp(-|p - center|^2 / radius^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaProfile {
    pub background: f64,
    pub bumps: Vec<Bump>,
}

impl GammaProfile {
    pub fn constant(value: f64) -> Self {
        Self {
            background: value,
            bumps: Vec::new(),
        }
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        self.background
            + self
                .bumps
                .iter()
                .map(|b| {
                    let dx = p[0] - b.center[0];
                    let dy = p[1] - b.center[1];
                    b.amplitude * (-(dx * dx + dy * dy) / (b.radius * b.radius)).exp()
                })
                .sum::<f64>()
    }
}

impl Default for GammaProfile {
    /// Smooth background with two localized inclusions.
    fn default() -> Self {
        Self {
            background: 1.0,
            bumps: vec![
                Bump {
                    center: [0.35, 0.62],
                    amplitude: 2.0,
                    radius: 0.15,
                },
                Bump {
                    center: [0.68, 0.33],
                    amplitude: 2.0,
                    radius: 0.15,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EllipticConfig {
    /// Interior nodes per side of the inversion grid.
    pub grid_size: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub n_experiments: usize,
    pub param_norm: ParamNorm,
    pub true_gamma: GammaProfile,
    /// `rho = ball_factor * ||gamma* - gamma_0||`.
    pub ball_factor: f64,
    /// Generate data on a twice finer grid.
    pub refined_data: bool,
    /// Multiplier on the power-iteration estimate of the derivative bound.
    pub bound_safety: f64,
}

impl Default for EllipticConfig {
    fn default() -> Self {
        Self {
            grid_size: 31,
            gamma_min: 0.1,
            gamma_max: 10.0,
            n_experiments: 12,
            param_norm: ParamNorm::H1,
            true_gamma: GammaProfile::default(),
            ball_factor: 3.0,
            refined_data: true,
            bound_safety: 1.2,
        }
    }
}

/// Gram operator of the parameter inner product.
#[derive(Debug, Clone)]
enum Gram {
    L2 { weight: f64 },
    H1 { weight: f64, factor: BandedCholesky },
}

impl Gram {
    fn new(grid: &Grid, norm: ParamNorm) -> Result<Self> {
        let weight = grid.spacing() * grid.spacing();
        Ok(match norm {
            ParamNorm::L2 => Self::L2 { weight },
            ParamNorm::H1 => {
                let mut m = BandedMatrix::zeros(grid.n_nodes(), grid.side());
                for p in 0..grid.n_nodes() {
                    m.add(p, p, weight);
                }
                for &(a, b) in grid.all_edges() {
                    m.add(a, a, 1.0);
                    m.add(b, b, 1.0);
                    m.add(a, b, -1.0);
                }
                Self::H1 {
                    weight,
                    factor: m.cholesky()?,
                }
            }
        })
    }

    fn inner(&self, grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
        let mass: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        match self {
            Self::L2 { weight } => weight * mass,
            Self::H1 { weight, .. } => {
                let stiff: f64 = grid
                    .all_edges()
                    .iter()
                    .map(|&(p, q)| (a[p] - a[q]) * (b[p] - b[q]))
                    .sum();
                weight * mass + stiff
            }
        }
    }

    /// Converts a Euclidean gradient into the Riesz representer.
    fn riesz(&self, v: Vec<f64>) -> Vec<f64> {
        match self {
            Self::L2 { weight } => v.into_iter().map(|x| x / weight).collect(),
            Self::H1 { factor, .. } => factor.solve(&v),
        }
    }
}

#[derive(Debug)]
struct StateCache {
    gamma: Vec<f64>,
    stiffness: Arc<Stiffness>,
    states: Vec<Option<Arc<Vec<f64>>>>,
}

/// The Dirichlet-to-Neumann system on the unit square.
#[derive(Debug)]
pub struct EllipticProblem {
    config: EllipticConfig,
    grid: Grid,
    gram: Gram,
    data_weights: Vec<f64>,
    dirichlet: Vec<Vec<f64>>,
    true_gamma: ParameterVector,
    initial: ParameterVector,
    radius: f64,
    derivative_bound: f64,
    exact_data: Vec<DataVector>,
    cache: Mutex<Option<StateCache>>,
}

impl Clone for EllipticProblem {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            grid: self.grid.clone(),
            gram: self.gram.clone(),
            data_weights: self.data_weights.clone(),
            dirichlet: self.dirichlet.clone(),
            true_gamma: self.true_gamma.clone(),
            initial: self.initial.clone(),
            radius: self.radius,
            derivative_bound: self.derivative_bound,
            exact_data: self.exact_data.clone(),
            cache: Mutex::new(None),
        }
    }
}

fn nodal_dirichlet(grid: &Grid, i: usize) -> Vec<f64> {
    (0..grid.n_nodes())
        .map(|p| {
            if grid.is_boundary(p) {
                let s = arc_length(grid.coords(p)).expect("boundary node lies on the boundary");
                profile_value(i, s)
            } else {
                0.0
            }
        })
        .collect()
}

/// Flux data for every experiment at `gamma`, computed on `grid`.
fn flux_data(grid: &Grid, gamma: &[f64], n_experiments: usize) -> Result<Vec<Vec<f64>>> {
    let stiffness = Stiffness::assemble(grid, gamma)?;
    Ok((0..n_experiments)
        .map(|i| {
            let u = fd::solve_dirichlet(grid, gamma, &stiffness, &nodal_dirichlet(grid, i));
            fd::conormal_flux(grid, gamma, &u)
        })
        .collect())
}

impl EllipticProblem {
    pub fn new(config: EllipticConfig) -> Result<Self> {
        if config.grid_size < 3 {
            return Err(Error::InvalidConfig("grid_size must be at least 3".into()));
        }
        if config.n_experiments == 0 {
            return Err(Error::InvalidConfig("n_experiments must be positive".into()));
        }
        if !(config.gamma_min > 0.0 && config.gamma_min <= config.gamma_max) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < gamma_min <= gamma_max, got [{}, {}]",
                config.gamma_min, config.gamma_max
            )));
        }
        if !(config.ball_factor > 0.0 && config.bound_safety >= 1.0) {
            return Err(Error::InvalidConfig(
                "ball_factor must be positive and bound_safety at least 1".into(),
            ));
        }
        let grid = Grid::new(config.grid_size);
        let gram = Gram::new(&grid, config.param_norm)?;
        let data_weights = vec![grid.spacing(); grid.boundary().len()];
        let dirichlet = (0..config.n_experiments)
            .map(|i| nodal_dirichlet(&grid, i))
            .collect();
        let true_gamma = ParameterVector::new(grid.sample(|p| config.true_gamma.eval(p)))?;

        let mut problem = Self {
            grid,
            gram,
            data_weights,
            dirichlet,
            initial: true_gamma.clone(),
            true_gamma,
            radius: f64::INFINITY,
            derivative_bound: 1.0,
            exact_data: Vec::new(),
            cache: Mutex::new(None),
            config,
        };
        problem.check_bounds(problem.true_gamma.as_slice())?;
        problem.initial = problem.harmonic_extension(&problem.true_gamma)?;
        let distance = problem.param_norm(&problem.true_gamma.sub(&problem.initial)?);
        problem.radius = if distance > 0.0 {
            problem.config.ball_factor * distance
        } else {
            1.0
        };
        problem.exact_data = problem.generate_exact_data()?;
        let estimate = estimate_derivative_bound(&problem, &problem.initial, 40, 0x5eed)?;
        problem.derivative_bound = problem.config.bound_safety * estimate;
        Ok(problem)
    }

    pub fn config(&self) -> &EllipticConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn true_gamma(&self) -> &ParameterVector {
        &self.true_gamma
    }

    /// `gamma_0`: discrete harmonic extension of the boundary trace of `gamma*`.
    pub fn initial_guess(&self) -> &ParameterVector {
        &self.initial
    }

    /// Data `y_i` used for inversion (refined-grid data when enabled).
    pub fn exact_data(&self) -> &[DataVector] {
        &self.exact_data
    }

    /// Inversion-grid fluxes at `gamma*`; `gamma*` solves these exactly.
    pub fn coarse_data(&self) -> Result<Vec<DataVector>> {
        flux_data(&self.grid, self.true_gamma.as_slice(), self.config.n_experiments)?
            .into_iter()
            .map(DataVector::new)
            .collect()
    }

    /// Boundary-node positions at which data are recorded.
    pub fn boundary_positions(&self) -> Vec<[f64; 2]> {
        self.grid.boundary_positions()
    }

    /// Interior solution and boundary flux for `gamma` and the nodal
    /// Dirichlet data `dirichlet`.
    pub fn elliptic_forward(&self, gamma: &[f64], dirichlet: &[f64]) -> Result<(Vec<f64>, DataVector)> {
        self.check_bounds(gamma)?;
        let stiffness = Stiffness::assemble(&self.grid, gamma)?;
        let u = fd::solve_dirichlet(&self.grid, gamma, &stiffness, dirichlet);
        let residual = fd::interior_residual(&self.grid, gamma, &u);
        if !(residual <= 1e-10) {
            return Err(Error::SolveFailed(format!(
                "forward residual {residual:e} exceeds 1e-10"
            )));
        }
        let flux = DataVector::new(fd::conormal_flux(&self.grid, gamma, &u))?;
        Ok((u, flux))
    }

    /// Nodal Dirichlet data of experiment `i`.
    pub fn dirichlet(&self, i: usize) -> &[f64] {
        &self.dirichlet[i]
    }

    fn harmonic_extension(&self, gamma: &ParameterVector) -> Result<ParameterVector> {
        let ones = vec![1.0; self.grid.n_nodes()];
        let stiffness = Stiffness::assemble(&self.grid, &ones)?;
        ParameterVector::new(fd::solve_dirichlet(
            &self.grid,
            &ones,
            &stiffness,
            gamma.as_slice(),
        ))
    }

    fn generate_exact_data(&self) -> Result<Vec<DataVector>> {
        if !self.config.refined_data {
            return self.coarse_data();
        }
        let fine = Grid::new(2 * self.config.grid_size + 1);
        let gamma = fine.sample(|p| self.config.true_gamma.eval(p));
        let fine_flux = flux_data(&fine, &gamma, self.config.n_experiments)?;
        // Coarse boundary node (ix, iy) coincides with fine node (2ix, 2iy).
        let side = self.grid.side();
        let lookup: Vec<usize> = self
            .grid
            .boundary()
            .iter()
            .map(|b| {
                let (ix, iy) = (b.node % side, b.node / side);
                let target = fine.node(2 * ix, 2 * iy);
                fine.boundary()
                    .iter()
                    .position(|fb| fb.node == target)
                    .expect("coarse boundary node has a fine counterpart")
            })
            .collect();
        fine_flux
            .into_iter()
            .map(|flux| DataVector::new(lookup.iter().map(|&j| flux[j]).collect()))
            .collect()
    }

    fn check_bounds(&self, gamma: &[f64]) -> Result<()> {
        if gamma.len() != self.grid.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.n_nodes(),
                found: gamma.len(),
            });
        }
        let (lower, upper) = (self.config.gamma_min, self.config.gamma_max);
        match gamma.iter().position(|g| !(*g >= lower && *g <= upper)) {
            Some(node) => Err(Error::GammaOutOfBounds {
                node,
                value: gamma[node],
                lower,
                upper,
            }),
            None => Ok(()),
        }
    }

    /// Factored stiffness and the state of experiment `i` at `gamma`,
    /// reusing the last factorization when `gamma` is unchanged.
    fn state(&self, gamma: &[f64], i: usize) -> Result<(Arc<Stiffness>, Arc<Vec<f64>>)> {
        self.check_bounds(gamma)?;
        let mut guard = self.cache.lock().expect("cache lock poisoned");
        let fresh = !matches!(&*guard, Some(entry) if entry.gamma == gamma);
        if fresh {
            let stiffness = Stiffness::assemble(&self.grid, gamma)?;
            *guard = Some(StateCache {
                gamma: gamma.to_vec(),
                stiffness: Arc::new(stiffness),
                states: vec![None; self.config.n_experiments],
            });
        }
        let entry = guard.as_mut().expect("cache populated above");
        let stiffness = Arc::clone(&entry.stiffness);
        let state = match &entry.states[i] {
            Some(u) => Arc::clone(u),
            None => {
                let u = Arc::new(fd::solve_dirichlet(
                    &self.grid,
                    gamma,
                    &stiffness,
                    &self.dirichlet[i],
                ));
                entry.states[i] = Some(Arc::clone(&u));
                u
            }
        };
        Ok((stiffness, state))
    }
}

impl OperatorSystem for EllipticProblem {
    fn n_equations(&self) -> usize {
        self.config.n_experiments
    }

    fn param_dim(&self) -> usize {
        self.grid.n_nodes()
    }

    fn data_dim(&self, _i: usize) -> usize {
        self.grid.boundary().len()
    }

    fn domain_center(&self) -> &ParameterVector {
        &self.initial
    }

    fn domain_radius(&self) -> f64 {
        self.radius
    }

    fn derivative_bound(&self) -> f64 {
        self.derivative_bound
    }

    fn param_inner(&self, a: &ParameterVector, b: &ParameterVector) -> Result<f64> {
        for v in [a, b] {
            if v.len() != self.param_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.param_dim(),
                    found: v.len(),
                });
            }
        }
        Ok(self.gram.inner(&self.grid, a.as_slice(), b.as_slice()))
    }

    fn data_inner(&self, _i: usize, a: &DataVector, b: &DataVector) -> Result<f64> {
        weighted_inner(&self.data_weights, a.as_slice(), b.as_slice())
    }

    fn eval_forward(&self, i: usize, x: &ParameterVector) -> Result<DataVector> {
        let (_, u) = self.state(x.as_slice(), i)?;
        DataVector::new(fd::conormal_flux(&self.grid, x.as_slice(), &u))
    }

    fn eval_deriv(&self, i: usize, x: &ParameterVector, h: &ParameterVector) -> Result<DataVector> {
        let (stiffness, u) = self.state(x.as_slice(), i)?;
        DataVector::new(fd::flux_derivative(
            &self.grid,
            x.as_slice(),
            &stiffness,
            &u,
            h.as_slice(),
        ))
    }

    fn eval_adjoint(&self, i: usize, x: &ParameterVector, r: &DataVector) -> Result<ParameterVector> {
        let (stiffness, u) = self.state(x.as_slice(), i)?;
        let weighted: Vec<f64> = r
            .as_slice()
            .iter()
            .zip(&self.data_weights)
            .map(|(v, w)| v * w)
            .collect();
        let euclidean =
            fd::flux_derivative_transpose(&self.grid, x.as_slice(), &stiffness, &u, &weighted);
        ParameterVector::new(self.gram.riesz(euclidean))
    }

    /// Smooth random field: a few low-frequency cosine modes with decaying
    /// Gaussian amplitudes.
    fn random_direction(&self, rng: &mut dyn RngCore) -> ParameterVector {
        const MODES: usize = 5;
        let mut coeffs = [[0.0; MODES]; MODES];
        for (kx, row) in coeffs.iter_mut().enumerate() {
            for (ky, c) in row.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut *rng);
                *c = z / (1.0 + (kx * kx + ky * ky) as f64);
            }
        }
        let field = self.grid.sample(|[x, y]| {
            let mut v = 0.0;
            for (kx, row) in coeffs.iter().enumerate() {
                for (ky, c) in row.iter().enumerate() {
                    v += c
                        * (kx as f64 * std::f64::consts::PI * x).cos()
                        * (ky as f64 * std::f64::consts::PI * y).cos();
                }
            }
            v
        });
        ParameterVector::new(field).expect("finite field")
    }
}
