//! Noise injection and the seed layout of an experiment.
//!
//! Every random quantity is drawn from `ChaCha8Rng::seed_from_u64(seed)` on
//! a dedicated stream:
//!
//! * stream `c` (for cycle `c < 2^63`): the randomized equation order of the
//!   solver, see `plwk_core::solver::cycle_permutation`;
//! * stream [`NOISE_STREAM`]: the Gaussian noise draw.
//!
//! The noise draw is shared by all noise levels of an experiment, so the
//! levels differ only in the scale of one fixed perturbation.

use plwk_core::{DataVector, NoisyObservations, OperatorSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{HarnessError, Result};

pub const NOISE_STREAM: u64 = 1 << 63;

/// Generator for the noise draw of root seed `seed`.
pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    rng
}

/// Adds Gaussian noise with `||e_i|| = noise_percent/100 * ||y_i||` exactly
/// (in the data norm of `sys`) and records `delta_i = ||e_i||`.
pub fn add_noise(
    sys: &(impl OperatorSystem + ?Sized),
    exact: &[DataVector],
    noise_percent: f64,
    rng: &mut impl Rng,
) -> Result<NoisyObservations> {
    if !(noise_percent.is_finite() && noise_percent >= 0.0) {
        return Err(HarnessError::Validation(format!(
            "noise percentage {noise_percent} must be finite and non-negative"
        )));
    }
    if noise_percent == 0.0 {
        return Ok(NoisyObservations::exact(exact.to_vec()));
    }
    let mut data = Vec::with_capacity(exact.len());
    let mut levels = Vec::with_capacity(exact.len());
    for (i, y) in exact.iter().enumerate() {
        let draw: Vec<f64> = (0..y.len()).map(|_| rng.sample(StandardNormal)).collect();
        let draw = DataVector::new(draw)?;
        let target = noise_percent / 100.0 * sys.data_norm(i, y);
        let length = sys.data_norm(i, &draw);
        let e = if length > 0.0 {
            draw.scaled(target / length)
        } else {
            DataVector::zeros(y.len())
        };
        levels.push(sys.data_norm(i, &e));
        data.push(y.add_scaled(1.0, &e)?);
    }
    Ok(NoisyObservations::new(data, levels)?)
}
