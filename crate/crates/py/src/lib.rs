//! Python bindings: `import utrees`.
//!
//! Matrices cross the boundary as sequences of rows (lists or 2-D numpy
//! arrays). Fitting and benchmarking release the GIL.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use uncertain_trees::bench::{self, BenchConfig, Dataset, Method, NoiseSpec, SigmaPolicy};
use uncertain_trees::{
    fit_forest, fit_standard_tree, fit_uncertain_tree, uncertainize, DenseMatrix, Error, ForestConfig,
    ForestVariant, Model, SigmaVector, TreeConfig, TreeModel,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::SplitMassMismatch { .. } => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(&rows).map_err(to_py)
}

fn tree_config(min_leaf_frac: f64, max_leaves: Option<usize>, max_depth: Option<usize>) -> PyResult<TreeConfig> {
    let cfg = TreeConfig {
        min_leaf_fraction: min_leaf_frac,
        max_leaves,
        max_depth,
    };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// `None` means the empirical per-feature standard deviation.
fn resolve_sigma(sigma: Option<Vec<f64>>, x: &DenseMatrix) -> PyResult<SigmaVector> {
    let policy = match sigma {
        Some(v) => SigmaPolicy::Fixed(v),
        None => SigmaPolicy::EmpiricalStd,
    };
    bench::sigma_from_policy(&policy, x).map_err(to_py)
}

/// A fitted tree or forest.
#[pyclass(name = "Model", module = "utrees", frozen)]
struct PyModel {
    inner: Model,
    feature_names: Option<Vec<String>>,
}

#[pymethods]
impl PyModel {
    /// Predictions for each row of `x`.
    fn predict(&self, py: Python<'_>, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = matrix(x)?;
        py.detach(|| self.inner.predict_many(&x)).map_err(to_py)
    }

    fn predict_one(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&x).map_err(to_py)
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    /// `"tree"` or `"forest"`.
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            Model::Tree(_) => "tree",
            Model::Forest(_) => "forest",
        }
    }

    /// Leaf count per tree.
    #[getter]
    fn n_leaves(&self) -> Vec<usize> {
        match &self.inner {
            Model::Tree(t) => vec![t.n_leaves()],
            Model::Forest(f) => f.members().iter().map(|m| m.tree.n_leaves()).collect(),
        }
    }

    /// Leaf weights of a single tree; `None` for a forest.
    #[getter]
    fn weights(&self) -> Option<Vec<f64>> {
        match &self.inner {
            Model::Tree(t) => Some(t.weights().as_slice().to_vec()),
            Model::Forest(_) => None,
        }
    }

    /// Per-feature sigma bound below which the membership Gram matrix is
    /// invertible; `inf` where no region bounds the feature. Trees only.
    fn invertibility_bound(&self) -> PyResult<Vec<f64>> {
        match &self.inner {
            Model::Tree(t) => t.partition().invertibility_bound(t.n_features()).map_err(to_py),
            Model::Forest(_) => Err(PyValueError::new_err("invertibility bound is defined per tree")),
        }
    }

    #[getter]
    fn feature_names(&self) -> Option<Vec<String>> {
        self.feature_names.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json(self.feature_names.as_deref()).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let (inner, feature_names) = Model::from_json(s).map_err(to_py)?;
        Ok(PyModel { inner, feature_names })
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={:?}, n_features={})", self.kind(), self.n_features())
    }
}

/// Fits one tree. `method` is `"tree"` (axis-aligned CART), `"utree"`
/// (uncertain splits) or `"hybrid"` (CART partition, uncertain weights).
#[pyfunction]
#[pyo3(signature = (x, y, method = "utree", sigma = None, min_leaf_frac = 0.1, max_leaves = None, max_depth = None, feature_names = None))]
#[allow(clippy::too_many_arguments)]
fn fit_tree(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    method: &str,
    sigma: Option<Vec<f64>>,
    min_leaf_frac: f64,
    max_leaves: Option<usize>,
    max_depth: Option<usize>,
    feature_names: Option<Vec<String>>,
) -> PyResult<PyModel> {
    let x = matrix(x)?;
    let cfg = tree_config(min_leaf_frac, max_leaves, max_depth)?;
    let tree: TreeModel = match method {
        "tree" => py.detach(|| fit_standard_tree(&x, &y, &cfg)).map_err(to_py)?.into(),
        "utree" => {
            let sigma = resolve_sigma(sigma, &x)?;
            py.detach(|| fit_uncertain_tree(&x, &y, &sigma, &cfg)).map_err(to_py)?.into()
        }
        "hybrid" => {
            let sigma = resolve_sigma(sigma, &x)?;
            py.detach(|| fit_standard_tree(&x, &y, &cfg).and_then(|t| uncertainize(&t, &x, &y, &sigma)))
                .map_err(to_py)?
                .into()
        }
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    Ok(PyModel {
        inner: tree.into(),
        feature_names,
    })
}

/// Fits a random forest of `tau` trees, each on a random subset of `mtry`
/// features. `uncertain=True` grows uncertain trees.
#[pyfunction]
#[pyo3(signature = (x, y, uncertain = true, sigma = None, tau = 100, mtry = None, bootstrap = true, seed = 0, min_leaf_frac = 0.1, feature_names = None))]
#[allow(clippy::too_many_arguments)]
fn fit_random_forest(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    uncertain: bool,
    sigma: Option<Vec<f64>>,
    tau: usize,
    mtry: Option<usize>,
    bootstrap: bool,
    seed: u64,
    min_leaf_frac: f64,
    feature_names: Option<Vec<String>>,
) -> PyResult<PyModel> {
    let x = matrix(x)?;
    let variant = if uncertain {
        ForestVariant::Uncertain
    } else {
        ForestVariant::Standard
    };
    let config = ForestConfig {
        mtry,
        bootstrap,
        tree_config: tree_config(min_leaf_frac, None, None)?,
        ..ForestConfig::new(variant, tau, seed)
    };
    let sigma = if uncertain { Some(resolve_sigma(sigma, &x)?) } else { None };
    let forest = py
        .detach(|| fit_forest(&x, &y, sigma.as_ref(), &config))
        .map_err(to_py)?;
    Ok(PyModel {
        inner: forest.into(),
        feature_names,
    })
}

/// Per-feature sample standard deviation of the columns of `x`.
#[pyfunction]
fn empirical_std(x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    bench::empirical_std(&matrix(x)?).map_err(to_py)
}

/// K-fold cross-validated RMSE of each method; returns the report as JSON.
///
/// Method names: `standard_tree`, `hybrid_tree`, `uncertain_tree`,
/// `standard_rf:<tau>`, `uncertain_rf:<tau>`. `sigma` is `"empirical"`,
/// `"half"` or a list of per-feature values.
#[pyfunction]
#[pyo3(signature = (x, y, methods = vec!["standard_tree".to_string(), "hybrid_tree".to_string(), "uncertain_tree".to_string()], sigma = None, folds = 5, seed = 0, noise = false, feature_names = None, name = "data"))]
#[allow(clippy::too_many_arguments)]
fn benchmark(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    methods: Vec<String>,
    sigma: Option<Bound<'_, PyAny>>,
    folds: usize,
    seed: u64,
    noise: bool,
    feature_names: Option<Vec<String>>,
    name: &str,
) -> PyResult<String> {
    let x = matrix(x)?;
    let names = feature_names.unwrap_or_else(|| (0..x.cols()).map(|j| format!("x{j}")).collect());
    let dataset = Dataset::new(name, x, y, names, "y").map_err(to_py)?;
    let methods = methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<uncertain_trees::Result<Vec<_>>>()
        .map_err(to_py)?;
    let policy = match sigma {
        None => SigmaPolicy::EmpiricalStd,
        Some(s) => match s.extract::<String>() {
            Ok(t) if t == "empirical" => SigmaPolicy::EmpiricalStd,
            Ok(t) if t == "half" => SigmaPolicy::HalfEmpiricalStd,
            Ok(t) => return Err(PyValueError::new_err(format!("unknown sigma policy {t:?}"))),
            Err(_) => SigmaPolicy::Fixed(s.extract()?),
        },
    };
    let mut config = BenchConfig::new(methods, policy, seed);
    config.folds = folds;
    if noise {
        config.noise = Some(NoiseSpec::new(seed));
    }
    let report = py.detach(|| bench::run_benchmark(&dataset, &config)).map_err(to_py)?;
    report.to_json().map_err(to_py)
}

#[pymodule]
fn utrees(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(fit_tree, m)?)?;
    m.add_function(wrap_pyfunction!(fit_random_forest, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_std, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    Ok(())
}
