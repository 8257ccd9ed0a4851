//! Gaussian probability kernels.
//!
//! Every observed feature value `x_j` is treated as the mean of a Gaussian
//! with standard deviation `sigma_j` for the latent true value. The mass that
//! Gaussian puts on an axis-aligned region is the product of per-axis interval
//! masses. A zero standard deviation degenerates to a point mass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Region;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Per-feature standard deviations of the input uncertainty.
///
/// Entries are standard deviations in the units of each feature; a zero entry
/// marks a feature as exactly observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SigmaVector(Vec<f64>);

impl SigmaVector {
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::InvalidArgument("sigma vector is empty".into()));
        }
        for (j, &s) in sigma.iter().enumerate() {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "sigma[{j}] = {s} must be finite and non-negative"
                )));
            }
        }
        Ok(SigmaVector(sigma))
    }

    /// All-zero vector: the classical hard-membership model.
    pub fn zeros(p: usize) -> Self {
        SigmaVector(vec![0.0; p.max(1)])
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

    /// Sub-vector over the given feature indices.
    pub fn select(&self, features: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(features.len());
        for &j in features {
            let s = *self.0.get(j).ok_or(Error::DimensionMismatch {
                expected: self.0.len(),
                got: j + 1,
            })?;
            out.push(s);
        }
        SigmaVector::new(out)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        SigmaVector::new(self.0.iter().map(|s| s * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for SigmaVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SigmaVector::new(v)
    }
}

impl From<SigmaVector> for Vec<f64> {
    fn from(s: SigmaVector) -> Self {
        s.0
    }
}

impl std::ops::Index<usize> for SigmaVector {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

/// Unchecked standard normal CDF; NaN propagates.
#[inline]
pub(crate) fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Unchecked upper tail `1 - phi(z)`, accurate for large positive `z`.
#[inline]
pub(crate) fn phi_upper(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::InvalidArgument("NaN passed to std_normal_cdf".into()));
    }
    Ok(phi(z))
}

// Rational approximation of the inverse normal CDF (Acklam, 2003), relative
// error about 1.15e-9 before refinement.
const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383_577_518_672_69e2,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ACKLAM_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

fn acklam(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    let (a, b, c, d) = (&ACKLAM_A, &ACKLAM_B, &ACKLAM_C, &ACKLAM_D);
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    }
}

/// Quantile function of the standard normal distribution.
///
/// Acklam's rational approximation followed by one Halley step on the CDF.
pub fn std_normal_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidQuantileLevel(alpha));
    }
    if alpha == 0.5 {
        return Ok(0.0);
    }
    let x = acklam(alpha);
    // Residual taken on the smaller tail to keep relative precision.
    let e = if alpha < 0.5 {
        phi(x) - alpha
    } else {
        (1.0 - alpha) - phi_upper(x)
    };
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Mass that `N(x, sigma^2)` puts on `[a, b]`.
///
/// With `sigma == 0` this is the indicator of the closed interval.
pub fn interval_prob(x: f64, sigma: f64, a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() || x.is_nan() || sigma.is_nan() {
        return Err(Error::InvalidArgument("NaN passed to interval_prob".into()));
    }
    if a > b {
        return Err(Error::EmptyInterval { lo: a, hi: b });
    }
    if sigma < 0.0 {
        return Err(Error::InvalidArgument(format!("negative sigma {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(if a <= x && x <= b { 1.0 } else { 0.0 });
    }
    Ok(gaussian_mass(x, sigma, a, b))
}

/// `P(a <= N(x, sigma^2) <= b)` for `sigma > 0`, `a <= b`.
#[inline]
pub(crate) fn gaussian_mass(x: f64, sigma: f64, a: f64, b: f64) -> f64 {
    let za = (a - x) / sigma;
    let zb = (b - x) / sigma;
    let m = if za > 0.0 {
        phi_upper(za) - phi_upper(zb)
    } else {
        phi(zb) - phi(za)
    };
    m.clamp(0.0, 1.0)
}

/// Per-axis factor used for region membership.
///
/// Differs from [`interval_prob`] only for `sigma == 0`: the interval is
/// treated as `(a, b]` so that a point sitting on a split threshold belongs to
/// the left child only and memberships over a partition still sum to one.
#[inline]
pub(crate) fn axis_mass(x: f64, sigma: f64, a: f64, b: f64) -> f64 {
    if sigma == 0.0 {
        if a < x && x <= b {
            1.0
        } else {
            0.0
        }
    } else if a == f64::NEG_INFINITY && b == f64::INFINITY {
        1.0
    } else {
        gaussian_mass(x, sigma, a, b)
    }
}

/// Probability that the latent input behind `x` lies in `region`.
pub fn region_membership(x: &[f64], sigma: &SigmaVector, region: &Region) -> Result<f64> {
    let p = region.dim();
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.len(),
        });
    }
    if sigma.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: sigma.len(),
        });
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in feature vector".into()));
    }
    Ok(membership_unchecked(x, sigma.as_slice(), region))
}

#[inline]
pub(crate) fn membership_unchecked(x: &[f64], sigma: &[f64], region: &Region) -> f64 {
    let mut prod = 1.0;
    for (j, (lo, hi)) in region.bounds().enumerate() {
        prod *= axis_mass(x[j], sigma[j], lo, hi);
        if prod == 0.0 {
            break;
        }
    }
    prod
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson integration of the standard normal density.
    fn density_integral(a: f64, b: f64) -> f64 {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(a) + f(b);
        for i in 1..n {
            let t = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 * f(t) } else { 2.0 * f(t) };
        }
        s * h / 3.0
    }

    fn cdf_oracle(z: f64) -> f64 {
        if z >= 0.0 {
            0.5 + density_integral(0.0, z)
        } else {
            0.5 - density_integral(z, 0.0)
        }
    }

    fn bisect_quantile(alpha: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cdf_oracle(mid) < alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cdf_reference_points() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        assert_eq!(std_normal_cdf(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY).unwrap(), 0.0);
        // Simpson oracle: 0.5 + integral of the density over [0, 1].
        let oracle = 0.5 + density_integral(0.0, 1.0);
        assert!((oracle - 0.841_344_746_068_543).abs() < 1e-13);
        assert!((std_normal_cdf(1.0).unwrap() - oracle).abs() < 1e-12);
        assert!(std_normal_cdf(f64::NAN).is_err());
    }

    #[test]
    fn cdf_matches_quadrature_on_grid() {
        for i in -60..=60 {
            let z = i as f64 / 10.0;
            let oracle = cdf_oracle(z);
            let got = std_normal_cdf(z).unwrap();
            assert!((got - oracle).abs() < 1e-12, "z={z}: {got} vs {oracle}");
            let sym = std_normal_cdf(-z).unwrap();
            assert!((sym - (1.0 - got)).abs() < 1e-15);
        }
    }

    #[test]
    fn quantile_reference_points() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        // Frozen from the bisection oracle below.
        let q75 = std_normal_quantile(0.75).unwrap();
        let q975 = std_normal_quantile(0.975).unwrap();
        assert!((q75 - 0.674_489_750_196_081_7).abs() < 1e-9);
        assert!((q975 - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((bisect_quantile(0.75) - q75).abs() < 1e-9);
        assert!((bisect_quantile(0.975) - q975).abs() < 1e-9);
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        for a in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                std_normal_quantile(a),
                Err(Error::InvalidQuantileLevel(_))
            ));
        }
    }

    #[test]
    fn quantile_round_trip_grid() {
        for i in 1..100 {
            let a = i as f64 / 100.0;
            let q = std_normal_quantile(a).unwrap();
            assert!((std_normal_cdf(q).unwrap() - a).abs() < 1e-9, "alpha={a}");
        }
        for a in [1e-10, 1e-5, 0.02, 0.03, 0.97, 0.98, 1.0 - 1e-5] {
            let q = std_normal_quantile(a).unwrap();
            assert!((std_normal_cdf(q).unwrap() - a).abs() < 1e-9 * a.max(1e-3));
        }
    }

    #[test]
    fn interval_prob_examples() {
        let inf = f64::INFINITY;
        assert_eq!(interval_prob(3.7, 1.0, -inf, inf).unwrap(), 1.0);
        assert_eq!(interval_prob(0.5, 0.0, 0.0, 1.0).unwrap(), 1.0);
        // Closed interval under the point mass.
        assert_eq!(interval_prob(1.0, 0.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(interval_prob(1.5, 0.0, 0.0, 1.0).unwrap(), 0.0);
        let oracle = density_integral(-1.0, 1.0);
        assert!((oracle - 0.682_689_492_137_085_9).abs() < 1e-12);
        assert!((interval_prob(0.0, 1.0, -1.0, 1.0).unwrap() - oracle).abs() < 1e-12);
        assert!(matches!(
            interval_prob(0.0, 1.0, 2.0, 1.0),
            Err(Error::EmptyInterval { .. })
        ));
    }

    #[test]
    fn interval_prob_far_tail_keeps_precision() {
        // Both bounds deep in the upper tail: compare against the tail form.
        let got = interval_prob(0.0, 1.0, 8.0, 9.0).unwrap();
        let expect = phi_upper(8.0) - phi_upper(9.0);
        assert!(got > 0.0);
        assert!(((got - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn region_membership_examples() {
        let r = Region::from_bounds(&[(0.0, 2.0), (-1.0, 1.0)]).unwrap();
        let s0 = SigmaVector::zeros(2);
        assert_eq!(region_membership(&[1.0, 0.0], &s0, &r).unwrap(), 1.0);

        let full = Region::unbounded(2);
        let s = SigmaVector::new(vec![0.3, 7.0]).unwrap();
        assert_eq!(region_membership(&[-5.0, 100.0], &s, &full).unwrap(), 1.0);

        let sq = Region::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let s1 = SigmaVector::new(vec![1.0, 1.0]).unwrap();
        let axis = density_integral(-1.0, 1.0);
        let got = region_membership(&[0.0, 0.0], &s1, &sq).unwrap();
        assert!((got - axis * axis).abs() < 1e-12);
        assert!((got - 0.466_065).abs() < 1e-6);

        assert!(region_membership(&[0.0], &s1, &sq).is_err());
    }

    #[test]
    fn sigma_vector_validation() {
        assert!(SigmaVector::new(vec![0.0, 1.0]).is_ok());
        assert!(SigmaVector::new(vec![-1.0]).is_err());
        assert!(SigmaVector::new(vec![f64::NAN]).is_err());
        assert!(SigmaVector::new(vec![]).is_err());
        let s = SigmaVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.select(&[2, 0]).unwrap().as_slice(), &[3.0, 1.0]);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn interval_prob_bounded_and_monotone(
                x in -10.0..10.0f64, sigma in 0.0..5.0f64,
                a in -10.0..10.0f64, w in 0.0..10.0f64, dw in 0.0..3.0f64,
            ) {
                let b = a + w;
                let v = interval_prob(x, sigma, a, b).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
                prop_assert!(interval_prob(x, sigma, a, b + dw).unwrap() >= v);
                prop_assert!(interval_prob(x, sigma, a - dw, b).unwrap() >= v);
            }

            #[test]
            fn interval_prob_additive(
                x in -10.0..10.0f64, sigma in 1e-3..5.0f64,
                a in -10.0..10.0f64, w1 in 0.0..10.0f64, w2 in 0.0..10.0f64,
            ) {
                let (b, c) = (a + w1, a + w1 + w2);
                let whole = interval_prob(x, sigma, a, c).unwrap();
                let parts = interval_prob(x, sigma, a, b).unwrap()
                    + interval_prob(x, sigma, b, c).unwrap();
                prop_assert!((whole - parts).abs() < 1e-12);
            }

            #[test]
            fn interval_prob_dirac_limit(a in -10.0..10.0f64, w in 1e-3..10.0f64, t in 0.01..0.99f64) {
                let b = a + w;
                let x = a + t * w;
                let v = interval_prob(x, 1e-12 * w, a, b).unwrap();
                prop_assert!(v > 1.0 - 1e-9);
            }
        }
    }
}
