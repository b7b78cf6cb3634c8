//! Finite-dimensional stand-ins for the parameter space X and the data
//! spaces Y_i.
//!
//! Both vector roles are plain `f64` buffers wrapped in newtypes so the two
//! spaces cannot be mixed up at call sites. The Euclidean [`inner`] and
//! [`norm`] live here; problems with weighted inner products supply their
//! own through [`crate::OperatorSystem`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which a quantity is treated as an exact zero.
pub const ZERO_TOL: f64 = 1e2 * f64::EPSILON;

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(Error::NonFinite(pos)),
        None => Ok(()),
    }
}

macro_rules! real_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Wraps `values`, rejecting NaN and infinite entries.
            pub fn new(values: Vec<f64>) -> Result<Self> {
                check_finite(&values)?;
                Ok(Self(values))
            }

            pub fn zeros(dim: usize) -> Self {
                Self(vec![0.0; dim])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            /// `self + alpha * other`.
            pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
                same_len(self.len(), other.len())?;
                let out: Vec<f64> = self
                    .0
                    .iter()
                    .zip(&other.0)
                    .map(|(a, b)| a + alpha * b)
                    .collect();
                Self::new(out)
            }

            /// `self - other`.
            pub fn sub(&self, other: &Self) -> Result<Self> {
                self.add_scaled(-1.0, other)
            }

            pub fn scaled(&self, alpha: f64) -> Self {
                Self(self.0.iter().map(|v| alpha * v).collect())
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

real_vector!(
    /// An element of the discretized parameter space X.
    ParameterVector
);
real_vector!(
    /// An element of the discretized data space of a single equation.
    DataVector
);

fn same_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Euclidean inner product.
pub fn inner(a: impl AsRef<[f64]>, b: impl AsRef<[f64]>) -> Result<f64> {
    let (a, b) = (a.as_ref(), b.as_ref());
    same_len(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Euclidean norm.
pub fn norm(a: impl AsRef<[f64]>) -> f64 {
    a.as_ref().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Weighted inner product `sum_j w_j a_j b_j`.
pub fn weighted_inner(weights: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    same_len(weights.len(), a.len())?;
    same_len(weights.len(), b.len())?;
    Ok(weights
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * x * y)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inner_and_norm_small_cases() {
        assert_eq!(inner([1.0, 2.0], [3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(norm([3.0, 4.0]), 5.0);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert_eq!(
            inner([1.0, 2.0], [1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
        let a = ParameterVector::zeros(3);
        let b = ParameterVector::zeros(2);
        assert!(a.sub(&b).is_err());
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        assert_eq!(
            ParameterVector::new(vec![0.0, f64::NAN]),
            Err(Error::NonFinite(1))
        );
        assert!(DataVector::new(vec![f64::INFINITY]).is_err());
    }

    proptest! {
        #[test]
        fn inner_is_positive_semidefinite(a in prop::collection::vec(-1e3..1e3f64, 1..32)) {
            prop_assert!(inner(&a, &a).unwrap() >= 0.0);
        }

        #[test]
        fn cauchy_schwarz(
            pair in (1usize..32).prop_flat_map(|n| (
                prop::collection::vec(-1e3..1e3f64, n),
                prop::collection::vec(-1e3..1e3f64, n),
            ))
        ) {
            let (a, b) = pair;
            let lhs = inner(&a, &b).unwrap().abs();
            let rhs = norm(&a) * norm(&b);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
        }
    }
}
