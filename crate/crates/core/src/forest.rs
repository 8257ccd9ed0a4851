//! Random forests of standard or uncertain trees.
//!
//! Each tree draws its own feature subset (once per tree, not per split) and,
//! optionally, a bootstrap sample of rows. Trees are grown on that subspace
//! and then lifted back to the full feature space, so every member predicts
//! from a full-length input. The forest predicts the plain average.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::prob::SigmaVector;
use crate::trees::{
    check_schema, fit_standard_tree, fit_uncertain_tree, TreeConfig, TreeDocument, TreeModel,
    SCHEMA_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestVariant {
    Standard,
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub tau: usize,
    /// Features drawn per tree; `None` means [`default_mtry`].
    #[serde(default)]
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
    pub tree_config: TreeConfig,
    pub variant: ForestVariant,
}

impl ForestConfig {
    pub fn new(variant: ForestVariant, tau: usize, seed: u64) -> Self {
        ForestConfig {
            tau,
            mtry: None,
            bootstrap: true,
            seed,
            tree_config: TreeConfig::default(),
            variant,
        }
    }

    /// Number of features per tree for a `p`-feature dataset.
    pub fn resolved_mtry(&self, p: usize) -> Result<usize> {
        let m = self.mtry.unwrap_or_else(|| default_mtry(p));
        if m == 0 || m > p {
            return Err(Error::Config(format!("mtry {m} not in 1..={p}")));
        }
        Ok(m)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        self.tree_config.validate()?;
        self.resolved_mtry(p).map(|_| ())
    }
}

/// Three features per tree, or `ceil(p / 3)` below nine features.
pub fn default_mtry(p: usize) -> usize {
    if p < 9 {
        p.div_ceil(3).max(1)
    } else {
        3
    }
}

/// Seed of tree `t`, derived from the forest seed by SplitMix64 so that
/// every tree owns an independent stream regardless of scheduling.
pub fn tree_seed(seed: u64, t: usize) -> u64 {
    let mut z = seed.wrapping_add((t as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestMember {
    /// Sorted indices of the features this tree was grown on.
    pub features: Vec<usize>,
    pub seed: u64,
    /// The tree, expressed over all features.
    pub tree: TreeModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    p: usize,
    config: ForestConfig,
    members: Vec<ForestMember>,
}

impl Forest {
    /// Assembles a forest from already fitted members.
    pub fn from_members(p: usize, config: ForestConfig, members: Vec<ForestMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("a forest needs at least one tree".into()));
        }
        for m in &members {
            if m.tree.n_features() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: m.tree.n_features(),
                });
            }
        }
        Ok(Forest { p, config, members })
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn members(&self) -> &[ForestMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: x.len(),
            });
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("NaN in feature vector".into()));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.members.iter().map(|m| m.tree.predict_unchecked(x)).sum();
        sum / self.members.len() as f64
    }

    pub fn predict_many(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }

    pub fn to_document(&self) -> ForestDocument {
        ForestDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            kind: ForestKind::Forest,
            p: self.p,
            feature_names: None,
            config: self.config.clone(),
            trees: self
                .members
                .iter()
                .map(|m| MemberDocument {
                    feature_subset: m.features.clone(),
                    tree_seed: m.seed,
                    tree: m.tree.to_document(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: ForestDocument) -> Result<Self> {
        check_schema(&doc.schema_version)?;
        let members = doc
            .trees
            .into_iter()
            .map(|m| {
                Ok(ForestMember {
                    features: m.feature_subset,
                    seed: m.tree_seed,
                    tree: TreeModel::from_document(m.tree)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Forest::from_members(doc.p, doc.config, members)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Forest::from_document(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestKind {
    Forest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberDocument {
    pub feature_subset: Vec<usize>,
    pub tree_seed: u64,
    pub tree: TreeDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestDocument {
    pub schema_version: String,
    pub kind: ForestKind,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_names: Option<Vec<String>>,
    pub config: ForestConfig,
    pub trees: Vec<MemberDocument>,
}

/// Features and rows used by one tree.
pub fn draw_member_sample(n: usize, p: usize, mtry: usize, bootstrap: bool, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = sample(&mut rng, p, mtry).into_vec();
    features.sort_unstable();
    let rows = if bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    (features, rows)
}

/// Fits a forest. `sigma` is required for the uncertain variant and ignored
/// otherwise. Trees are grown in parallel on the current rayon pool; the
/// result does not depend on the number of threads.
pub fn fit_forest(
    x: &DenseMatrix,
    y: &[f64],
    sigma: Option<&SigmaVector>,
    config: &ForestConfig,
) -> Result<Forest> {
    let (n, p) = (x.rows(), x.cols());
    config.validate(p)?;
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let sigma = match (config.variant, sigma) {
        (ForestVariant::Uncertain, None) => {
            return Err(Error::InvalidArgument("uncertain forest needs sigma".into()))
        }
        (ForestVariant::Uncertain, Some(s)) => {
            if s.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: s.len(),
                });
            }
            s.clone()
        }
        (ForestVariant::Standard, _) => SigmaVector::zeros(p),
    };
    let mtry = config.resolved_mtry(p)?;

    let members = (0..config.tau)
        .into_par_iter()
        .map(|t| {
            let seed = tree_seed(config.seed, t);
            let (features, rows) = draw_member_sample(n, p, mtry, config.bootstrap, seed);
            let xs = x.select_rows(&rows)?.select_columns(&features)?;
            let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let local = match config.variant {
                ForestVariant::Standard => {
                    TreeModel::from(fit_standard_tree(&xs, &ys, &config.tree_config)?)
                }
                ForestVariant::Uncertain => TreeModel::from(fit_uncertain_tree(
                    &xs,
                    &ys,
                    &sigma.select(&features)?,
                    &config.tree_config,
                )?),
            };
            Ok(ForestMember {
                tree: local.lift(&features, p, &sigma)?,
                features,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Forest::from_members(p, config.clone(), members)
}
