//! A fitted model of any kind, as stored in a model file.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::forest::{Forest, ForestDocument};
use crate::linalg::DenseMatrix;
use crate::trees::{TreeDocument, TreeModel};

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Tree(TreeModel),
    Forest(Forest),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Tree(t) => t.n_features(),
            Model::Forest(f) => f.n_features(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Tree(t) => t.predict(x),
            Model::Forest(f) => f.predict(x),
        }
    }

    pub fn predict_many(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }

    /// JSON document, with optional column names recorded alongside.
    pub fn to_json(&self, feature_names: Option<&[String]>) -> Result<String> {
        let names = feature_names.map(<[String]>::to_vec);
        Ok(match self {
            Model::Tree(t) => {
                let mut doc = t.to_document();
                doc.feature_names = names;
                serde_json::to_string_pretty(&doc)?
            }
            Model::Forest(f) => {
                let mut doc = f.to_document();
                doc.feature_names = names;
                serde_json::to_string_pretty(&doc)?
            }
        })
    }

    /// Parses a tree or forest document; returns the stored column names too.
    pub fn from_json(s: &str) -> Result<(Model, Option<Vec<String>>)> {
        let value: Value = serde_json::from_str(s)?;
        match value.get("kind").and_then(Value::as_str) {
            Some("forest") => {
                let doc: ForestDocument = serde_json::from_value(value)?;
                let names = doc.feature_names.clone();
                Ok((Model::Forest(Forest::from_document(doc)?), names))
            }
            Some(_) => {
                let doc: TreeDocument = serde_json::from_value(value)?;
                let names = doc.feature_names.clone();
                Ok((Model::Tree(TreeModel::from_document(doc)?), names))
            }
            None => Err(Error::Data("model document has no \"kind\"".into())),
        }
    }
}

impl From<TreeModel> for Model {
    fn from(t: TreeModel) -> Self {
        Model::Tree(t)
    }
}

impl From<Forest> for Model {
    fn from(f: Forest) -> Self {
        Model::Forest(f)
    }
}
