//! Symmetric positive definite band matrices and their Cholesky factors.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix with half-bandwidth `bw`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + self.bw - (i - j)
    }

    /// Adds `value` to entry `(i, j)` (and implicitly `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        let s = self.slot(i, j);
        self.data[s] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[self.slot(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    pub fn cholesky(&self) -> Result<BandedCholesky> {
        BandedCholesky::factor(self)
    }
}

/// `A = L L^T` with `L` lower banded.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &BandedMatrix) -> Result<Self> {
        let (n, bw) = (a.n, a.bw);
        let w = bw + 1;
        let mut l = a.data.clone();
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut sum = l[i * w + bw - (i - j)];
                for k in lo..j {
                    sum -= l[i * w + bw - (i - k)] * l[j * w + bw - (j - k)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::SolveFailed(format!(
                            "matrix not positive definite at pivot {i} (value {sum})"
                        )));
                    }
                    l[i * w + bw] = sum.sqrt();
                } else {
                    l[i * w + bw - (i - j)] = sum / l[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, data: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        assert_eq!(b.len(), n);
        let l = &self.data;
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut sum = y[i];
            for k in lo..i {
                sum -= l[i * w + bw - (i - k)] * y[k];
            }
            y[i] = sum / l[i * w + bw];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut sum = y[i];
            for k in i + 1..=hi {
                sum -= l[k * w + bw - (k - i)] * y[k];
            }
            y[i] = sum / l[i * w + bw];
        }
        y
    }
}
