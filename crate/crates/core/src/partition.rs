//! Axis-aligned regions, partitions and the membership matrix.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::prob::{self, SigmaVector};

/// Hyper-rectangle `prod_j [lo_j, hi_j]`; infinite bounds allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Region {
    /// The whole space `R^p`.
    pub fn unbounded(p: usize) -> Self {
        Region {
            lo: vec![f64::NEG_INFINITY; p],
            hi: vec![f64::INFINITY; p],
        }
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidArgument("region needs at least one axis".into()));
        }
        for &(a, b) in bounds {
            if a.is_nan() || b.is_nan() || a == f64::INFINITY || b == f64::NEG_INFINITY {
                return Err(Error::InvalidArgument(format!("bad bounds [{a}, {b}]")));
            }
            if a > b {
                return Err(Error::EmptyInterval { lo: a, hi: b });
            }
        }
        Ok(Region {
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self, j: usize) -> f64 {
        self.lo[j]
    }

    pub fn hi(&self, j: usize) -> f64 {
        self.hi[j]
    }

    pub fn width(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    pub fn bounds(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lo.iter().copied().zip(self.hi.iter().copied())
    }

    pub fn is_bounded(&self) -> bool {
        self.bounds().all(|(a, b)| a.is_finite() && b.is_finite())
    }

    /// Point-estimate containment, `lo < x <= hi` on every axis.
    ///
    /// Children of a split share the threshold; a point on it is assigned to
    /// the left child.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.bounds()
            .zip(x)
            .all(|((a, b), &v)| a < v && v <= b)
    }

    /// Embeds a region defined over a feature subset into `p` dimensions;
    /// the other axes are unbounded.
    pub fn lift(&self, features: &[usize], p: usize) -> Result<Region> {
        if features.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: features.len(),
            });
        }
        let mut out = Region::unbounded(p);
        for (local, &global) in features.iter().enumerate() {
            if global >= p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: global + 1,
                });
            }
            out.lo[global] = self.lo[local];
            out.hi[global] = self.hi[local];
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct AxisBounds {
    lo: Option<f64>,
    hi: Option<f64>,
}

impl Serialize for Region {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let axes: Vec<AxisBounds> = self
            .bounds()
            .map(|(a, b)| AxisBounds {
                lo: a.is_finite().then_some(a),
                hi: b.is_finite().then_some(b),
            })
            .collect();
        axes.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Region {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let axes = Vec::<AxisBounds>::deserialize(d)?;
        let bounds: Vec<(f64, f64)> = axes
            .iter()
            .map(|ax| {
                (
                    ax.lo.unwrap_or(f64::NEG_INFINITY),
                    ax.hi.unwrap_or(f64::INFINITY),
                )
            })
            .collect();
        Region::from_bounds(&bounds).map_err(serde::de::Error::custom)
    }
}

/// Splits `region` on feature `j` at `s` into `([.., s], [s, ..])`.
pub fn split_region(region: &Region, j: usize, s: f64) -> Result<(Region, Region)> {
    if j >= region.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: j + 1,
        });
    }
    let (a, b) = (region.lo[j], region.hi[j]);
    if !(a < s && s < b) {
        return Err(Error::SplitOutsideRegion {
            feature: j,
            threshold: s,
            lo: a,
            hi: b,
        });
    }
    let mut left = region.clone();
    let mut right = region.clone();
    left.hi[j] = s;
    right.lo[j] = s;
    Ok((left, right))
}

/// Ordered list of regions; region `k` is column `k` of the membership matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Partition {
    regions: Vec<Region>,
}

impl Partition {
    /// Single-region partition covering `R^p`.
    pub fn root(p: usize) -> Self {
        Partition {
            regions: vec![Region::unbounded(p)],
        }
    }

    /// Partition from explicit regions; disjointness is the caller's concern.
    pub fn from_regions(regions: Vec<Region>) -> Result<Self> {
        let p = regions
            .first()
            .ok_or_else(|| Error::InvalidArgument("partition needs at least one region".into()))?
            .dim();
        if let Some(r) = regions.iter().find(|r| r.dim() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: r.dim(),
            });
        }
        Ok(Partition { regions })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.regions[0].dim()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, k: usize) -> &Region {
        &self.regions[k]
    }

    /// Applies a split: the left child takes slot `k`, the right child is
    /// appended as slot `K`.
    pub fn split(&self, k: usize, j: usize, s: f64) -> Result<Partition> {
        let region = self.regions.get(k).ok_or(Error::DimensionMismatch {
            expected: self.regions.len(),
            got: k + 1,
        })?;
        let (left, right) = split_region(region, j, s)?;
        let mut regions = self.regions.clone();
        regions[k] = left;
        regions.push(right);
        Ok(Partition { regions })
    }

    /// Index of the region holding `x` under point-estimate containment.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.regions.iter().position(|r| r.contains(x))
    }

    pub fn is_bounded(&self) -> bool {
        self.regions.iter().all(Region::is_bounded)
    }

    pub fn lift(&self, features: &[usize], p: usize) -> Result<Partition> {
        Ok(Partition {
            regions: self
                .regions
                .iter()
                .map(|r| r.lift(features, p))
                .collect::<Result<_>>()?,
        })
    }

    /// Per-feature upper bound on the uncertainty standard deviation under
    /// which `P^T P` is guaranteed invertible:
    /// `min_k width_kj / (2 q_{(1 + 0.5^{1/p}) / 2})`.
    ///
    /// A feature that no region bounds (never split on) gets `+inf`.
    pub fn invertibility_bound(&self, p: usize) -> Result<Vec<f64>> {
        if p != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p,
            });
        }
        let q = bound_quantile(p)?;
        Ok((0..p)
            .map(|j| {
                let w = self
                    .regions
                    .iter()
                    .map(|r| r.width(j))
                    .fold(f64::INFINITY, f64::min);
                if w.is_finite() {
                    w / (2.0 * q)
                } else {
                    f64::INFINITY
                }
            })
            .collect())
    }
}

/// `q_{(1 + 0.5^{1/p}) / 2}`, the standard normal quantile used by the bound.
pub fn bound_quantile(p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidArgument("feature count must be positive".into()));
    }
    prob::std_normal_quantile((1.0 + 0.5_f64.powf(1.0 / p as f64)) / 2.0)
}

/// Whether `sigma_j < bound_j` holds strictly for every feature.
pub fn sigma_within_bound(sigma: &SigmaVector, partition: &Partition) -> Result<bool> {
    let bound = partition.invertibility_bound(partition.dim())?;
    if sigma.len() != bound.len() {
        return Err(Error::DimensionMismatch {
            expected: bound.len(),
            got: sigma.len(),
        });
    }
    Ok(sigma.as_slice().iter().zip(&bound).all(|(s, b)| s < b))
}

/// `n x K` matrix of region-membership probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix(DenseMatrix);

impl MembershipMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.0.get(i, k)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.0.column(k)
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.rows())
            .map(|i| (self.0.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `P_ik = P(U_i in R_k | X_i = x_i, sigma)`.
pub fn build_membership(
    x: &DenseMatrix,
    sigma: &SigmaVector,
    partition: &Partition,
) -> Result<MembershipMatrix> {
    let p = partition.dim();
    if x.cols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.cols(),
        });
    }
    if sigma.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: sigma.len(),
        });
    }
    let k = partition.len();
    let mut data = Vec::with_capacity(x.rows() * k);
    for i in 0..x.rows() {
        let row = x.row(i);
        for r in partition.regions() {
            data.push(prob::membership_unchecked(row, sigma.as_slice(), r));
        }
    }
    Ok(MembershipMatrix(DenseMatrix::new(x.rows(), k, data)?))
}

const SPLIT_MASS_TOL: f64 = 1e-12;

/// Replaces column `k` by `q_left` and appends `q_right`.
pub fn update_membership_for_split(
    p: &MembershipMatrix,
    k: usize,
    q_left: &[f64],
    q_right: &[f64],
) -> Result<MembershipMatrix> {
    let (n, cols) = (p.rows(), p.cols());
    if k >= cols {
        return Err(Error::DimensionMismatch {
            expected: cols,
            got: k + 1,
        });
    }
    for q in [q_left, q_right] {
        if q.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: q.len(),
            });
        }
    }
    for i in 0..n {
        let diff = (q_left[i] + q_right[i] - p.get(i, k)).abs();
        if diff.is_nan() || diff > SPLIT_MASS_TOL {
            return Err(Error::SplitMassMismatch { row: i, diff });
        }
    }
    let mut data = Vec::with_capacity(n * (cols + 1));
    for i in 0..n {
        let row = p.0.row(i);
        data.extend_from_slice(&row[..k]);
        data.push(q_left[i]);
        data.extend_from_slice(&row[k + 1..]);
        data.push(q_right[i]);
    }
    Ok(MembershipMatrix(DenseMatrix::new(n, cols + 1, data)?))
}
