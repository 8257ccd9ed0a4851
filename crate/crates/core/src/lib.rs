//! Regression trees and forests whose inputs carry Gaussian measurement noise.
//!
//! A sample `x` is read as the mean of `N(x, diag(sigma^2))`. A tree assigns it
//! to every leaf region with the probability that the latent input lies in
//! that region, and predicts the weighted sum of leaf values.

pub mod bench;
pub mod error;
pub mod forest;
pub mod linalg;
pub mod model;
pub mod partition;
pub mod prob;
pub mod trees;

pub use error::{Error, Result};
pub use forest::{fit_forest, Forest, ForestConfig, ForestVariant};
pub use linalg::{DenseMatrix, WeightVector};
pub use model::Model;
pub use partition::{MembershipMatrix, Partition, Region};
pub use prob::SigmaVector;
pub use trees::{
    evaluate_split, fit_standard_tree, fit_uncertain_tree, uncertainize, StandardTree,
    TreeConfig, TreeModel, UncertainTree,
};
