//! Regression trees: classical CART, the uncertain tree, and the hybrid that
//! keeps a CART partition but predicts with soft membership.

mod standard;
mod uncertain;

pub use standard::fit_standard_tree;
pub use uncertain::{evaluate_split, fit_uncertain_tree, uncertainize};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, WeightVector};
use crate::partition::{build_membership, MembershipMatrix, Partition, Region};
use crate::prob::{self, SigmaVector};

pub const SCHEMA_VERSION: &str = "1.0";

/// Stopping rules shared by every tree variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Each child of a split must hold at least `ceil(min_leaf_fraction * n)`
    /// training points.
    pub min_leaf_fraction: f64,
    #[serde(default)]
    pub max_leaves: Option<usize>,
    #[serde(default)]
    pub max_depth: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            min_leaf_fraction: 0.1,
            max_leaves: None,
            max_depth: None,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_leaf_fraction > 0.0 && self.min_leaf_fraction <= 0.5) {
            return Err(Error::Config(format!(
                "min_leaf_fraction {} not in (0, 0.5]",
                self.min_leaf_fraction
            )));
        }
        if self.max_leaves == Some(0) {
            return Err(Error::Config("max_leaves must be at least 1".into()));
        }
        Ok(())
    }

    /// Minimum number of point-estimate members per child for `n` samples.
    pub fn min_leaf_count(&self, n: usize) -> Result<usize> {
        let raw = self.min_leaf_fraction * n as f64;
        if raw < 1.0 {
            return Err(Error::StoppingRuleVacuous(raw));
        }
        // Guard against 0.1 * 50 landing a hair above 5.
        Ok((raw - 1e-9).ceil().max(1.0) as usize)
    }
}

/// One applied split: region `region` was cut on `feature` at `threshold`,
/// leaving the tree with training risk `risk` (sum of squared residuals).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub region: usize,
    pub feature: usize,
    pub threshold: f64,
    pub risk: f64,
}

/// How an [`UncertainTree`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeOrigin {
    /// Grown with soft-membership risk.
    Uncertain,
    /// CART partition with least-squares weights under soft membership.
    Hybrid,
}

/// Tree whose prediction is `sum_k gamma_k P(U in R_k | X = x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainTree {
    pub(crate) partition: Partition,
    pub(crate) gamma: WeightVector,
    pub(crate) sigma: SigmaVector,
    pub(crate) split_log: Vec<SplitRecord>,
    pub(crate) n_train: usize,
    pub(crate) config: TreeConfig,
    pub(crate) origin: TreeOrigin,
}

impl UncertainTree {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn gamma(&self) -> &WeightVector {
        &self.gamma
    }

    pub fn sigma(&self) -> &SigmaVector {
        &self.sigma
    }

    pub fn split_log(&self) -> &[SplitRecord] {
        &self.split_log
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn origin(&self) -> TreeOrigin {
        self.origin
    }

    pub fn n_leaves(&self) -> usize {
        self.partition.len()
    }

    pub fn n_features(&self) -> usize {
        self.partition.dim()
    }

    /// Membership matrix of `x` over this tree's regions.
    pub fn membership(&self, x: &DenseMatrix) -> Result<MembershipMatrix> {
        build_membership(x, &self.sigma, &self.partition)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.n_features())?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.partition
            .regions()
            .iter()
            .zip(self.gamma.as_slice())
            .map(|(r, g)| g * prob::membership_unchecked(x, self.sigma.as_slice(), r))
            .sum()
    }

    pub fn predict_many(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        check_dim(x.row(0), self.n_features())?;
        Ok((0..x.rows()).map(|i| self.predict_unchecked(x.row(i))).collect())
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            kind: match self.origin {
                TreeOrigin::Uncertain => TreeKind::Uncertain,
                TreeOrigin::Hybrid => TreeKind::Hybrid,
            },
            p: self.n_features(),
            feature_names: None,
            sigma: self.sigma.as_slice().to_vec(),
            regions: self.partition.clone(),
            gamma: self.gamma.0.clone(),
            split_log: self.split_log.clone(),
            config: self.config.clone(),
            n_train: self.n_train,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        match TreeModel::from_document(serde_json::from_str(s)?)? {
            TreeModel::Uncertain(t) => Ok(t),
            TreeModel::Standard(_) => Err(Error::Data("document holds a standard tree".into())),
        }
    }
}

/// Classical regression tree: hard membership, leaf values are means.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardTree {
    pub(crate) partition: Partition,
    pub(crate) leaf_values: WeightVector,
    pub(crate) split_log: Vec<SplitRecord>,
    pub(crate) n_train: usize,
    pub(crate) config: TreeConfig,
}

impl StandardTree {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn leaf_values(&self) -> &WeightVector {
        &self.leaf_values
    }

    pub fn split_log(&self) -> &[SplitRecord] {
        &self.split_log
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn n_leaves(&self) -> usize {
        self.partition.len()
    }

    pub fn n_features(&self) -> usize {
        self.partition.dim()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.n_features())?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        // Regions cover R^p, so a finite point always lands somewhere.
        self.partition
            .locate(x)
            .map_or(f64::NAN, |k| self.leaf_values.0[k])
    }

    pub fn predict_many(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        check_dim(x.row(0), self.n_features())?;
        Ok((0..x.rows()).map(|i| self.predict_unchecked(x.row(i))).collect())
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            kind: TreeKind::Standard,
            p: self.n_features(),
            feature_names: None,
            sigma: vec![0.0; self.n_features()],
            regions: self.partition.clone(),
            gamma: self.leaf_values.0.clone(),
            split_log: self.split_log.clone(),
            config: self.config.clone(),
            n_train: self.n_train,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        match TreeModel::from_document(serde_json::from_str(s)?)? {
            TreeModel::Standard(t) => Ok(t),
            TreeModel::Uncertain(_) => Err(Error::Data("document holds an uncertain tree".into())),
        }
    }
}

/// Either tree variant, as stored in model files and forests.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeModel {
    Standard(StandardTree),
    Uncertain(UncertainTree),
}

impl TreeModel {
    pub fn n_features(&self) -> usize {
        match self {
            TreeModel::Standard(t) => t.n_features(),
            TreeModel::Uncertain(t) => t.n_features(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.partition().len()
    }

    pub fn partition(&self) -> &Partition {
        match self {
            TreeModel::Standard(t) => &t.partition,
            TreeModel::Uncertain(t) => &t.partition,
        }
    }

    /// Leaf weights (leaf means for a standard tree).
    pub fn weights(&self) -> &WeightVector {
        match self {
            TreeModel::Standard(t) => &t.leaf_values,
            TreeModel::Uncertain(t) => &t.gamma,
        }
    }

    pub fn split_log(&self) -> &[SplitRecord] {
        match self {
            TreeModel::Standard(t) => &t.split_log,
            TreeModel::Uncertain(t) => &t.split_log,
        }
    }

    /// Uncertainty used at prediction time (zeros for a standard tree).
    pub fn sigma(&self) -> SigmaVector {
        match self {
            TreeModel::Standard(t) => SigmaVector::zeros(t.n_features()),
            TreeModel::Uncertain(t) => t.sigma.clone(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            TreeModel::Standard(t) => t.predict(x),
            TreeModel::Uncertain(t) => t.predict(x),
        }
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            TreeModel::Standard(t) => t.predict_unchecked(x),
            TreeModel::Uncertain(t) => t.predict_unchecked(x),
        }
    }

    pub fn to_document(&self) -> TreeDocument {
        match self {
            TreeModel::Standard(t) => t.to_document(),
            TreeModel::Uncertain(t) => t.to_document(),
        }
    }

    /// Re-expresses a tree fitted on the columns `features` of a
    /// `p`-feature dataset over all `p` features. Unused features are
    /// unbounded in every region; `sigma` is the full-length vector.
    pub fn lift(&self, features: &[usize], p: usize, sigma: &SigmaVector) -> Result<TreeModel> {
        if sigma.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: sigma.len(),
            });
        }
        let lift_log = |log: &[SplitRecord]| -> Vec<SplitRecord> {
            log.iter()
                .map(|r| SplitRecord {
                    feature: features[r.feature],
                    ..r.clone()
                })
                .collect()
        };
        Ok(match self {
            TreeModel::Standard(t) => TreeModel::Standard(StandardTree {
                partition: t.partition.lift(features, p)?,
                leaf_values: t.leaf_values.clone(),
                split_log: lift_log(&t.split_log),
                n_train: t.n_train,
                config: t.config.clone(),
            }),
            TreeModel::Uncertain(t) => {
                for (local, &global) in features.iter().enumerate() {
                    if t.sigma[local] != sigma[global] {
                        return Err(Error::InvalidArgument(format!(
                            "sigma of feature {global} differs from the tree's"
                        )));
                    }
                }
                TreeModel::Uncertain(UncertainTree {
                    partition: t.partition.lift(features, p)?,
                    gamma: t.gamma.clone(),
                    sigma: sigma.clone(),
                    split_log: lift_log(&t.split_log),
                    n_train: t.n_train,
                    config: t.config.clone(),
                    origin: t.origin,
                })
            }
        })
    }

    pub fn from_document(doc: TreeDocument) -> Result<Self> {
        check_schema(&doc.schema_version)?;
        let k = doc.regions.len();
        if doc.gamma.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: doc.gamma.len(),
            });
        }
        if doc.regions.dim() != doc.p || doc.sigma.len() != doc.p {
            return Err(Error::Data(format!(
                "tree document declares p = {} but holds {}-dimensional regions and {} sigmas",
                doc.p,
                doc.regions.dim(),
                doc.sigma.len()
            )));
        }
        let gamma = WeightVector(doc.gamma);
        Ok(match doc.kind {
            TreeKind::Standard => TreeModel::Standard(StandardTree {
                partition: doc.regions,
                leaf_values: gamma,
                split_log: doc.split_log,
                n_train: doc.n_train,
                config: doc.config,
            }),
            kind => TreeModel::Uncertain(UncertainTree {
                partition: doc.regions,
                gamma,
                sigma: SigmaVector::new(doc.sigma)?,
                split_log: doc.split_log,
                n_train: doc.n_train,
                config: doc.config,
                origin: if kind == TreeKind::Hybrid {
                    TreeOrigin::Hybrid
                } else {
                    TreeOrigin::Uncertain
                },
            }),
        })
    }
}

impl From<StandardTree> for TreeModel {
    fn from(t: StandardTree) -> Self {
        TreeModel::Standard(t)
    }
}

impl From<UncertainTree> for TreeModel {
    fn from(t: UncertainTree) -> Self {
        TreeModel::Uncertain(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    Standard,
    Hybrid,
    Uncertain,
}

/// JSON form of a fitted tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub schema_version: String,
    pub kind: TreeKind,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_names: Option<Vec<String>>,
    pub sigma: Vec<f64>,
    pub regions: Partition,
    pub gamma: Vec<f64>,
    pub split_log: Vec<SplitRecord>,
    pub config: TreeConfig,
    pub n_train: usize,
}

/// Accepts any `1.x` schema version.
pub fn check_schema(version: &str) -> Result<()> {
    let major = version.split('.').next().unwrap_or("");
    if major == SCHEMA_VERSION.split('.').next().unwrap_or("") {
        Ok(())
    } else {
        Err(Error::SchemaVersion(version.to_string()))
    }
}

fn check_dim(x: &[f64], p: usize) -> Result<()> {
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.len(),
        });
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in feature vector".into()));
    }
    Ok(())
}

/// Midpoints between consecutive distinct values of feature `j` among the
/// training points contained in `region`.
pub fn candidate_splits(x: &DenseMatrix, region: &Region, j: usize) -> Vec<f64> {
    if j >= x.cols() || region.dim() != x.cols() {
        return Vec::new();
    }
    let mut values: Vec<f64> = (0..x.rows())
        .filter(|&i| region.contains(x.row(i)))
        .map(|i| x.get(i, j))
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
        .windows(2)
        .filter_map(|w| midpoint(w[0], w[1]))
        .collect()
}

/// `(a + b) / 2` when it falls strictly between `a` and `b`.
fn midpoint(a: f64, b: f64) -> Option<f64> {
    let m = 0.5 * (a + b);
    (a < m && m < b).then_some(m)
}

/// Admissible cut on one feature of one region.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cut {
    pub threshold: f64,
    /// Number of members (in sorted order) that fall left of the cut.
    pub n_left: usize,
}

/// Members of a region sorted by feature `j` (ties by row index), with the
/// cuts that leave at least `min_count` members on each side.
pub(crate) fn admissible_cuts(
    x: &DenseMatrix,
    members: &[usize],
    j: usize,
    min_count: usize,
) -> (Vec<usize>, Vec<Cut>) {
    let mut order = members.to_vec();
    order.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
    let n = order.len();
    let mut cuts = Vec::new();
    if n < 2 * min_count {
        return (order, cuts);
    }
    for l in 1..n {
        let (lo, hi) = (x.get(order[l - 1], j), x.get(order[l], j));
        if lo == hi || l < min_count || n - l < min_count {
            continue;
        }
        if let Some(threshold) = midpoint(lo, hi) {
            cuts.push(Cut { threshold, n_left: l });
        }
    }
    (order, cuts)
}

/// Shared driver state for growing a tree depth-first.
pub(crate) struct Frontier {
    stack: Vec<(usize, usize)>,
}

impl Frontier {
    pub fn new() -> Self {
        Frontier {
            stack: vec![(0, 0)],
        }
    }

    pub fn pop(&mut self) -> Option<(usize, usize)> {
        self.stack.pop()
    }

    /// Left child keeps index `k`, right child gets index `right`; the right
    /// child is popped first.
    pub fn push_children(&mut self, k: usize, right: usize, depth: usize) {
        self.stack.push((k, depth + 1));
        self.stack.push((right, depth + 1));
    }
}

pub(crate) fn may_split(config: &TreeConfig, n_leaves: usize, depth: usize) -> bool {
    config.max_leaves.is_none_or(|m| n_leaves < m) && config.max_depth.is_none_or(|d| depth < d)
}

pub(crate) fn validate_training(x: &DenseMatrix, y: &[f64], config: &TreeConfig) -> Result<usize> {
    config.validate()?;
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(Error::InvalidArgument("need at least two training rows".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target vector"));
    }
    config.min_leaf_count(y.len())
}

/// `sum (y - mean)^2` by two passes.
pub(crate) fn centered_sse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (s, c) = values.clone().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if c == 0 {
        return 0.0;
    }
    let m = s / c as f64;
    values.map(|v| (v - m) * (v - m)).sum()
}
