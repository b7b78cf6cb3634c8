//! Five-point finite differences for `-div(gamma grad u) = 0` on the unit
//! square with Dirichlet data, and the boundary co-normal flux.
//!
//! The coefficient lives on all `(n+2)^2` grid nodes. Edge conductances are
//! harmonic means of the nodal values. The flux at a boundary node is
//! `gamma_b * (3 u_b - 4 u_{b+1} + u_{b+2}) / (2h)` along the inward grid
//! line, i.e. a one-sided second-order outward normal derivative.
//!
//! All kernels here work with plain Euclidean transposes; the weighted
//! adjoint is assembled one level up.

use super::banded::{BandedCholesky, BandedMatrix};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub node: usize,
    /// First and second interior nodes along the inward normal.
    pub inward: [usize; 2],
    pub position: [f64; 2],
}

/// Grid with `n` interior nodes per side and spacing `h = 1/(n+1)`.
#[derive(Debug, Clone)]
pub struct Grid {
    n: usize,
    h: f64,
    boundary: Vec<BoundaryNode>,
    /// Node pairs with at least one interior endpoint.
    stiffness_edges: Vec<(usize, usize)>,
    /// Every horizontal and vertical neighbor pair.
    all_edges: Vec<(usize, usize)>,
}

impl Grid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "need at least two interior nodes per side");
        let side = n + 2;
        let h = 1.0 / (n + 1) as f64;
        let node = |ix: usize, iy: usize| iy * side + ix;
        let coord = |i: usize| i as f64 / (n + 1) as f64;

        let mut boundary = Vec::with_capacity(4 * n);
        for ix in 1..=n {
            boundary.push(BoundaryNode {
                node: node(ix, 0),
                inward: [node(ix, 1), node(ix, 2)],
                position: [coord(ix), 0.0],
            });
        }
        for iy in 1..=n {
            boundary.push(BoundaryNode {
                node: node(n + 1, iy),
                inward: [node(n, iy), node(n - 1, iy)],
                position: [1.0, coord(iy)],
            });
        }
        for ix in (1..=n).rev() {
            boundary.push(BoundaryNode {
                node: node(ix, n + 1),
                inward: [node(ix, n), node(ix, n - 1)],
                position: [coord(ix), 1.0],
            });
        }
        for iy in (1..=n).rev() {
            boundary.push(BoundaryNode {
                node: node(0, iy),
                inward: [node(1, iy), node(2, iy)],
                position: [0.0, coord(iy)],
            });
        }

        let interior = |ix: usize, iy: usize| (1..=n).contains(&ix) && (1..=n).contains(&iy);
        let mut stiffness_edges = Vec::new();
        let mut all_edges = Vec::new();
        for iy in 0..side {
            for ix in 0..side {
                if ix + 1 < side {
                    all_edges.push((node(ix, iy), node(ix + 1, iy)));
                    if interior(ix, iy) || interior(ix + 1, iy) {
                        stiffness_edges.push((node(ix, iy), node(ix + 1, iy)));
                    }
                }
                if iy + 1 < side {
                    all_edges.push((node(ix, iy), node(ix, iy + 1)));
                    if interior(ix, iy) || interior(ix, iy + 1) {
                        stiffness_edges.push((node(ix, iy), node(ix, iy + 1)));
                    }
                }
            }
        }
        Self {
            n,
            h,
            boundary,
            stiffness_edges,
            all_edges,
        }
    }

    pub fn n_interior_per_side(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn side(&self) -> usize {
        self.n + 2
    }

    pub fn n_nodes(&self) -> usize {
        self.side() * self.side()
    }

    pub fn n_interior(&self) -> usize {
        self.n * self.n
    }

    pub fn node(&self, ix: usize, iy: usize) -> usize {
        iy * self.side() + ix
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        let side = self.side();
        let scale = (self.n + 1) as f64;
        [(node % side) as f64 / scale, (node / side) as f64 / scale]
    }

    /// Position of `node` in the interior unknown vector, if interior.
    pub fn interior_index(&self, node: usize) -> Option<usize> {
        let side = self.side();
        let (ix, iy) = (node % side, node / side);
        if (1..=self.n).contains(&ix) && (1..=self.n).contains(&iy) {
            Some((iy - 1) * self.n + (ix - 1))
        } else {
            None
        }
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.interior_index(node).is_none()
    }

    /// Boundary nodes without the corners, counterclockwise from `(0,0)`.
    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn boundary_positions(&self) -> Vec<[f64; 2]> {
        self.boundary.iter().map(|b| b.position).collect()
    }

    pub fn stiffness_edges(&self) -> &[(usize, usize)] {
        &self.stiffness_edges
    }

    pub fn all_edges(&self) -> &[(usize, usize)] {
        &self.all_edges
    }

    /// Nodal samples of `f` over the whole grid.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.n_nodes()).map(|p| f(self.coords(p))).collect()
    }

    /// Half-bandwidth of the interior stiffness matrix.
    fn interior_bandwidth(&self) -> usize {
        self.n
    }
}

pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Partial derivatives of the harmonic mean with respect to `a` and `b`.
pub fn harmonic_mean_grad(a: f64, b: f64) -> (f64, f64) {
    let s = (a + b) * (a + b);
    (2.0 * b * b / s, 2.0 * a * a / s)
}

/// Factored interior stiffness matrix for one coefficient.
#[derive(Debug, Clone)]
pub struct Stiffness {
    factor: BandedCholesky,
}

impl Stiffness {
    pub fn assemble(grid: &Grid, gamma: &[f64]) -> Result<Self> {
        let mut k = BandedMatrix::zeros(grid.n_interior(), grid.interior_bandwidth());
        for &(a, b) in grid.stiffness_edges() {
            let c = harmonic_mean(gamma[a], gamma[b]);
            match (grid.interior_index(a), grid.interior_index(b)) {
                (Some(ia), Some(ib)) => {
                    k.add(ia, ia, c);
                    k.add(ib, ib, c);
                    k.add(ia, ib, -c);
                }
                (Some(ia), None) => k.add(ia, ia, c),
                (None, Some(ib)) => k.add(ib, ib, c),
                (None, None) => unreachable!("stiffness edges touch the interior"),
            }
        }
        Ok(Self {
            factor: k.cholesky()?,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.factor.solve(rhs)
    }
}

/// Solves the Dirichlet problem. `dirichlet` holds nodal values of which
/// only boundary entries are read; the result is the full nodal solution.
pub fn solve_dirichlet(
    grid: &Grid,
    gamma: &[f64],
    stiffness: &Stiffness,
    dirichlet: &[f64],
) -> Vec<f64> {
    let mut rhs = vec![0.0; grid.n_interior()];
    for &(a, b) in grid.stiffness_edges() {
        match (grid.interior_index(a), grid.interior_index(b)) {
            (Some(ia), None) => rhs[ia] += harmonic_mean(gamma[a], gamma[b]) * dirichlet[b],
            (None, Some(ib)) => rhs[ib] += harmonic_mean(gamma[a], gamma[b]) * dirichlet[a],
            _ => {}
        }
    }
    let interior = stiffness.solve(&rhs);
    let mut u = dirichlet.to_vec();
    for (p, value) in u.iter_mut().enumerate() {
        if let Some(ip) = grid.interior_index(p) {
            *value = interior[ip];
        }
    }
    u
}

/// Residual `max |K u - f|` over interior rows, relative to the largest
/// diagonal-scaled magnitude.
pub fn interior_residual(grid: &Grid, gamma: &[f64], u: &[f64]) -> f64 {
    let mut res = vec![0.0; grid.n_nodes()];
    let mut scale = vec![0.0; grid.n_nodes()];
    for &(a, b) in grid.stiffness_edges() {
        let c = harmonic_mean(gamma[a], gamma[b]);
        let flow = c * (u[a] - u[b]);
        res[a] += flow;
        res[b] -= flow;
        scale[a] += c * (u[a].abs() + u[b].abs());
        scale[b] += c * (u[a].abs() + u[b].abs());
    }
    (0..grid.n_nodes())
        .filter(|p| !grid.is_boundary(*p))
        .map(|p| res[p].abs() / scale[p].max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// One-sided outward normal derivative at each boundary node.
pub fn normal_derivative(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let inv = 1.0 / (2.0 * grid.spacing());
    grid.boundary()
        .iter()
        .map(|b| (3.0 * u[b.node] - 4.0 * u[b.inward[0]] + u[b.inward[1]]) * inv)
        .collect()
}

/// `gamma * du/dnu` at each boundary node.
pub fn conormal_flux(grid: &Grid, gamma: &[f64], u: &[f64]) -> Vec<f64> {
    normal_derivative(grid, u)
        .into_iter()
        .zip(grid.boundary())
        .map(|(d, b)| gamma[b.node] * d)
        .collect()
}

/// `G h`: the interior-row action of the stiffness derivative in direction
/// `dgamma`, applied to the state `u`.
fn stiffness_derivative_action(grid: &Grid, gamma: &[f64], u: &[f64], dgamma: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.n_interior()];
    for &(a, b) in grid.stiffness_edges() {
        let (da, db) = harmonic_mean_grad(gamma[a], gamma[b]);
        let v = (da * dgamma[a] + db * dgamma[b]) * (u[a] - u[b]);
        if let Some(ia) = grid.interior_index(a) {
            out[ia] += v;
        }
        if let Some(ib) = grid.interior_index(b) {
            out[ib] -= v;
        }
    }
    out
}

/// Derivative of the flux map at `gamma` (state `u`) in direction `dgamma`.
pub fn flux_derivative(
    grid: &Grid,
    gamma: &[f64],
    stiffness: &Stiffness,
    u: &[f64],
    dgamma: &[f64],
) -> Vec<f64> {
    let rhs: Vec<f64> = stiffness_derivative_action(grid, gamma, u, dgamma)
        .into_iter()
        .map(|v| -v)
        .collect();
    let du_interior = stiffness.solve(&rhs);
    let mut du = vec![0.0; grid.n_nodes()];
    for (p, value) in du.iter_mut().enumerate() {
        if let Some(ip) = grid.interior_index(p) {
            *value = du_interior[ip];
        }
    }
    let dn_u = normal_derivative(grid, u);
    let dn_du = normal_derivative(grid, &du);
    grid.boundary()
        .iter()
        .enumerate()
        .map(|(j, b)| dgamma[b.node] * dn_u[j] + gamma[b.node] * dn_du[j])
        .collect()
}

/// Euclidean transpose of [`flux_derivative`].
pub fn flux_derivative_transpose(
    grid: &Grid,
    gamma: &[f64],
    stiffness: &Stiffness,
    u: &[f64],
    r: &[f64],
) -> Vec<f64> {
    let inv = 1.0 / (2.0 * grid.spacing());
    let dn_u = normal_derivative(grid, u);
    let mut out = vec![0.0; grid.n_nodes()];
    let mut v = vec![0.0; grid.n_interior()];
    for (j, b) in grid.boundary().iter().enumerate() {
        out[b.node] += r[j] * dn_u[j];
        let w = gamma[b.node] * r[j] * inv;
        for (&node, coeff) in b.inward.iter().zip([-4.0, 1.0]) {
            let ip = grid.interior_index(node).expect("inward nodes are interior");
            v[ip] += coeff * w;
        }
    }
    let z = stiffness.solve(&v);
    let z_at = |p: usize| grid.interior_index(p).map_or(0.0, |ip| z[ip]);
    for &(a, b) in grid.stiffness_edges() {
        let (da, db) = harmonic_mean_grad(gamma[a], gamma[b]);
        let s = (u[a] - u[b]) * (z_at(a) - z_at(b));
        out[a] -= da * s;
        out[b] -= db * s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_is_counterclockwise_without_corners() {
        let grid = Grid::new(3);
        let pos = grid.boundary_positions();
        assert_eq!(pos.len(), 12);
        assert_eq!(pos[0], [0.25, 0.0]);
        assert_eq!(pos[3], [1.0, 0.25]);
        assert_eq!(pos[6], [0.75, 1.0]);
        assert_eq!(pos[11], [0.0, 0.25]);
    }

    #[test]
    fn edge_counts() {
        let n = 4;
        let grid = Grid::new(n);
        let side = n + 2;
        assert_eq!(grid.all_edges().len(), 2 * side * (side - 1));
        // Interior-touching edges: the boundary-to-boundary edges along the
        // four sides are dropped.
        assert_eq!(grid.stiffness_edges().len(), 2 * side * (side - 1) - 4 * (side - 1));
    }

    #[test]
    fn harmonic_mean_gradient_matches_difference_quotient() {
        let (a, b) = (0.7, 2.3);
        let (da, db) = harmonic_mean_grad(a, b);
        let eps = 1e-6;
        let fa = (harmonic_mean(a + eps, b) - harmonic_mean(a - eps, b)) / (2.0 * eps);
        let fb = (harmonic_mean(a, b + eps) - harmonic_mean(a, b - eps)) / (2.0 * eps);
        assert!((fa - da).abs() < 1e-9);
        assert!((fb - db).abs() < 1e-9);
    }
}
