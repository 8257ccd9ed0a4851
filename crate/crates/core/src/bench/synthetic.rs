//! Data with a known generator: `y = f(u) + eps`, observed `x = u + delta`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Steps in both coordinates.
    PiecewiseConstant,
    /// Increasing and smooth in both coordinates.
    SmoothMonotone,
}

impl Shape {
    pub fn eval(self, u: &[f64]) -> f64 {
        match self {
            Shape::PiecewiseConstant => {
                let step = |c: bool, h: f64| if c { h } else { 0.0 };
                step(u[0] > 0.3, 2.0) + step(u[0] > 0.7, 1.5) + step(u[1] > 0.5, 1.0)
            }
            Shape::SmoothMonotone => 4.0 / (1.0 + (-8.0 * (u[0] - 0.5)).exp()) + 2.0 * u[1] * u[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub shape: Shape,
    pub n: usize,
    /// Standard deviation of the input corruption `delta`, per feature.
    pub sigma_true: f64,
    /// Standard deviation of the target noise `eps`.
    pub noise_sd: f64,
    pub seed: u64,
}

/// `u ~ Uniform[0, 1]^2`. Returns the corrupted dataset.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    let to_err = |e: rand_distr::NormalError| Error::InvalidArgument(e.to_string());
    let delta = Normal::new(0.0, spec.sigma_true).map_err(to_err)?;
    let eps = Normal::new(0.0, spec.noise_sd).map_err(to_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = Vec::with_capacity(2 * spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let u = [rng.random::<f64>(), rng.random::<f64>()];
        y.push(spec.shape.eval(&u) + eps.sample(&mut rng));
        data.extend(u.iter().map(|v| v + delta.sample(&mut rng)));
    }
    let x = DenseMatrix::new(spec.n, 2, data)?;
    Dataset::new("synthetic", x, y, vec!["u1".into(), "u2".into()], "y")
}
