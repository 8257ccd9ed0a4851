//! Choosing the uncertainty scale and corrupting inputs with bounded noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::tree_seed;
use crate::linalg::DenseMatrix;
use crate::prob::SigmaVector;

/// Per-feature sample standard deviation (denominator `n - 1`), two-pass.
pub fn empirical_std(x: &DenseMatrix) -> Result<Vec<f64>> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "standard deviation needs at least two rows, got {n}"
        )));
    }
    Ok((0..x.cols())
        .map(|j| {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "sigma")]
pub enum SigmaPolicy {
    EmpiricalStd,
    HalfEmpiricalStd,
    Fixed(Vec<f64>),
}

pub fn sigma_from_policy(policy: &SigmaPolicy, x: &DenseMatrix) -> Result<SigmaVector> {
    match policy {
        SigmaPolicy::EmpiricalStd => SigmaVector::new(empirical_std(x)?),
        SigmaPolicy::HalfEmpiricalStd => {
            SigmaVector::new(empirical_std(x)?.into_iter().map(|s| 0.5 * s).collect())
        }
        SigmaPolicy::Fixed(s) => {
            if s.len() != x.cols() {
                return Err(Error::DimensionMismatch {
                    expected: x.cols(),
                    got: s.len(),
                });
            }
            SigmaVector::new(s.clone())
        }
    }
}

/// Noise `r * u` with `r` a random sign and `u ~ Uniform[lo_frac * s, hi_frac * s]`,
/// `s` the feature's standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub lo_frac: f64,
    pub hi_frac: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(seed: u64) -> Self {
        NoiseSpec {
            lo_frac: 0.1,
            hi_frac: 0.25,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo_frac >= 0.0 && self.lo_frac < self.hi_frac && self.hi_frac.is_finite()) {
            return Err(Error::Config(format!(
                "noise fractions need 0 <= lo < hi, got [{}, {}]",
                self.lo_frac, self.hi_frac
            )));
        }
        Ok(())
    }
}

/// FNV-1a, used to key a column's noise stream by its name.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Returns a noisy copy of `x`. Each column draws from its own stream, keyed
/// by the spec's seed and the column name, so reordering columns reorders
/// the noise with them. The noise scale uses the standard deviations of `x`
/// itself; constant columns come back unchanged.
pub fn inject_noise(x: &DenseMatrix, names: &[String], spec: &NoiseSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    if names.len() != x.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            got: names.len(),
        });
    }
    let sd = empirical_std(x)?;
    let columns: Vec<Vec<f64>> = (0..x.cols())
        .map(|j| {
            let mut col = x.column(j);
            if sd[j] > 0.0 {
                let (lo, hi) = (spec.lo_frac * sd[j], spec.hi_frac * sd[j]);
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(spec.seed ^ name_hash(&names[j]), 0));
                for v in &mut col {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    *v += sign * rng.random_range(lo..=hi);
                }
            }
            col
        })
        .collect();
    DenseMatrix::from_columns(&columns)
}
