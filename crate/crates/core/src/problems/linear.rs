use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::estimate_derivative_bound;
use crate::space::{DataVector, ParameterVector};
use crate::system::OperatorSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearBlockConfig {
    pub n_blocks: usize,
    pub rows_per_block: usize,
    pub n_unknowns: usize,
    /// Ratio between the strongest and weakest direction that the block row
    /// spaces are drawn from. Larger values make the stacked system more
    /// ill-conditioned.
    pub condition: f64,
    /// Row-norm scales `c_i` are drawn uniformly from this range.
    pub scale_range: [f64; 2],
    /// `rho = ball_factor * ||x* - x_0||`.
    pub ball_factor: f64,
    pub seed: u64,
}

impl Default for LinearBlockConfig {
    fn default() -> Self {
        Self {
            n_blocks: 6,
            rows_per_block: 8,
            n_unknowns: 40,
            condition: 1e2,
            scale_range: [0.5, 2.0],
            ball_factor: 3.0,
            seed: 7,
        }
    }
}

/// `F_i(x) = A_i x` where every block has mutually orthogonal rows of equal
/// norm `c_i`, so each Kaczmarz step is an exact affine projection.
#[derive(Debug, Clone)]
pub struct LinearBlockProblem {
    config: LinearBlockConfig,
    blocks: Vec<DMatrix<f64>>,
    true_solution: ParameterVector,
    center: ParameterVector,
    radius: f64,
    derivative_bound: f64,
}

impl LinearBlockProblem {
    pub fn generate(config: &LinearBlockConfig) -> Result<Self> {
        let (n_blocks, m, d) = (config.n_blocks, config.rows_per_block, config.n_unknowns);
        if n_blocks == 0 || m == 0 || d == 0 || m > d {
            return Err(Error::InvalidConfig(format!(
                "need positive sizes with rows_per_block <= n_unknowns, got {n_blocks}x{m} blocks on {d} unknowns"
            )));
        }
        let [lo, hi] = config.scale_range;
        if !(lo > 0.0 && lo <= hi && config.condition >= 1.0 && config.ball_factor > 1.0) {
            return Err(Error::InvalidConfig(
                "need 0 < scale_min <= scale_max, condition >= 1 and ball_factor > 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut gaussian = |rows: usize, cols: usize| {
            DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
        };

        let basis = gaussian(d, d).qr().q();
        let spectrum = DVector::from_fn(d, |j, _| {
            if d == 1 {
                1.0
            } else {
                config.condition.powf(-(j as f64) / (d - 1) as f64)
            }
        });
        let shaping = DMatrix::from_diagonal(&spectrum) * basis.transpose();

        let mut blocks = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let raw = gaussian(m, d) * &shaping;
            // Orthonormal basis of the row space, as rows.
            let rows = raw.transpose().qr().q().transpose();
            blocks.push(rows);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
        for block in &mut blocks {
            let scale = lo + (hi - lo) * rng.random::<f64>();
            *block *= scale;
        }
        let x_star: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal) / (d as f64).sqrt())
            .collect();
        let true_solution = ParameterVector::new(x_star)?;
        let center = ParameterVector::zeros(d);
        let distance = crate::space::norm(true_solution.sub(&center)?);

        let mut problem = Self {
            config: config.clone(),
            blocks,
            true_solution,
            center,
            radius: config.ball_factor * distance.max(f64::MIN_POSITIVE),
            derivative_bound: 1.0,
        };
        problem.derivative_bound =
            estimate_derivative_bound(&problem, &problem.center, 100, config.seed)?;
        Ok(problem)
    }

    pub fn config(&self) -> &LinearBlockConfig {
        &self.config
    }

    pub fn block(&self, i: usize) -> &DMatrix<f64> {
        &self.blocks[i]
    }

    pub fn true_solution(&self) -> &ParameterVector {
        &self.true_solution
    }

    pub fn exact_data(&self) -> Vec<DataVector> {
        (0..self.blocks.len())
            .map(|i| self.apply(i, &self.true_solution))
            .collect()
    }

    fn apply(&self, i: usize, x: &ParameterVector) -> DataVector {
        let v = &self.blocks[i] * DVector::from_column_slice(x.as_slice());
        DataVector::new(v.as_slice().to_vec()).expect("finite product")
    }
}

impl OperatorSystem for LinearBlockProblem {
    fn n_equations(&self) -> usize {
        self.blocks.len()
    }

    fn param_dim(&self) -> usize {
        self.config.n_unknowns
    }

    fn data_dim(&self, _i: usize) -> usize {
        self.config.rows_per_block
    }

    fn domain_center(&self) -> &ParameterVector {
        &self.center
    }

    fn domain_radius(&self) -> f64 {
        self.radius
    }

    fn derivative_bound(&self) -> f64 {
        self.derivative_bound
    }

    fn eval_forward(&self, i: usize, x: &ParameterVector) -> Result<DataVector> {
        Ok(self.apply(i, x))
    }

    fn eval_deriv(&self, i: usize, _x: &ParameterVector, h: &ParameterVector) -> Result<DataVector> {
        Ok(self.apply(i, h))
    }

    fn eval_adjoint(&self, i: usize, _x: &ParameterVector, r: &DataVector) -> Result<ParameterVector> {
        let v = self.blocks[i].tr_mul(&DVector::from_column_slice(r.as_slice()));
        ParameterVector::new(v.as_slice().to_vec())
    }
}
