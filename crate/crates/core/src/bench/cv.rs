//! K-fold cross-validated RMSE for the tree and forest variants.

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::noise::{inject_noise, sigma_from_policy, NoiseSpec, SigmaPolicy};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, tree_seed, ForestConfig, ForestVariant};
use crate::trees::{
    fit_standard_tree, fit_uncertain_tree, uncertainize, TreeConfig, TreeModel, SCHEMA_VERSION,
};

/// `k` disjoint folds covering `0..n`, sizes differing by at most one.
/// Indices inside a fold are sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::Config(format!("cannot cut {n} rows into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

pub fn rmse(yhat: &[f64], y: &[f64]) -> Result<f64> {
    if yhat.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ss: f64 = yhat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

/// Written as `standard_tree`, `hybrid_tree`, `uncertain_tree`,
/// `standard_rf:<tau>` or `uncertain_rf:<tau>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    StandardTree,
    HybridTree,
    UncertainTree,
    StandardRf { tau: usize },
    UncertainRf { tau: usize },
}

impl Method {
    fn needs_sigma(self) -> bool {
        !matches!(self, Method::StandardTree | Method::StandardRf { .. })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::StandardTree => write!(f, "standard_tree"),
            Method::HybridTree => write!(f, "hybrid_tree"),
            Method::UncertainTree => write!(f, "uncertain_tree"),
            Method::StandardRf { tau } => write!(f, "standard_rf:{tau}"),
            Method::UncertainRf { tau } => write!(f, "uncertain_rf:{tau}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, tau) = match s.split_once(':') {
            Some((h, t)) => {
                let tau = t
                    .parse::<usize>()
                    .ok()
                    .filter(|&t| t > 0)
                    .ok_or_else(|| Error::Config(format!("bad tree count in {s:?}")))?;
                (h, Some(tau))
            }
            None => (s, None),
        };
        match (head, tau) {
            ("standard_tree", None) => Ok(Method::StandardTree),
            ("hybrid_tree", None) => Ok(Method::HybridTree),
            ("uncertain_tree", None) => Ok(Method::UncertainTree),
            ("standard_rf", Some(tau)) => Ok(Method::StandardRf { tau }),
            ("uncertain_rf", Some(tau)) => Ok(Method::UncertainRf { tau }),
            ("standard_rf" | "uncertain_rf", None) => {
                Err(Error::Config(format!("{s:?} needs a tree count, e.g. {s}:100")))
            }
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything a benchmark run depends on besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub sigma_policy: SigmaPolicy,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    pub folds: usize,
    pub cv_seed: u64,
    pub tree_config: TreeConfig,
    /// Features per forest tree; `None` for the default rule.
    #[serde(default)]
    pub mtry: Option<usize>,
    pub bootstrap: bool,
}

impl BenchConfig {
    pub fn new(methods: Vec<Method>, sigma_policy: SigmaPolicy, cv_seed: u64) -> Self {
        BenchConfig {
            methods,
            sigma_policy,
            noise: None,
            folds: 5,
            cv_seed,
            tree_config: TreeConfig::default(),
            mtry: None,
            bootstrap: true,
        }
    }
}

/// Seed of the forest fitted for `method` on fold `fold`.
pub fn cell_seed(cv_seed: u64, method: Method, fold: usize) -> u64 {
    let tag = method
        .to_string()
        .bytes()
        .fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(u64::from(b)));
    tree_seed(cv_seed ^ tag, fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
    /// Population standard deviation of the fold scores.
    pub std_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub features: Vec<String>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub schema_version: String,
    pub dataset: DatasetSummary,
    pub config: BenchConfig,
    /// Test rows of each fold.
    pub folds: Vec<Vec<usize>>,
    pub results: Vec<MethodResult>,
}

impl CVReport {
    pub fn result(&self, method: Method) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per method, `mean (std)` with two decimals.
    pub fn to_table(&self) -> String {
        let width = self
            .results
            .iter()
            .map(|r| r.method.to_string().len())
            .chain(["method".len()])
            .max()
            .unwrap_or(6);
        let mut out = format!(
            "{} (n={}, p={}, {}-fold, seed {})\n",
            self.dataset.name,
            self.dataset.n,
            self.dataset.p,
            self.config.folds,
            self.config.cv_seed
        );
        out.push_str(&format!("{:<width$}  {:>16}\n", "method", "RMSE mean (std)"));
        for r in &self.results {
            let cell = format!("{:.2} ({:.2})", r.mean_rmse, r.std_rmse);
            out.push_str(&format!("{:<width$}  {:>16}\n", r.method.to_string(), cell));
        }
        out
    }
}

/// Why rows are being read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Fit,
    Score,
}

/// Source of dataset rows for the harness. Every row the harness touches
/// goes through [`RowSource::rows`], which lets tests watch for leakage.
pub trait RowSource: Sync {
    fn dataset(&self) -> &Dataset;

    fn rows(&self, fold: usize, purpose: Purpose, rows: &[usize]) -> Result<Dataset> {
        let _ = (fold, purpose);
        self.dataset().subset(rows)
    }
}

impl RowSource for Dataset {
    fn dataset(&self) -> &Dataset {
        self
    }
}

/// Wraps a dataset and records every row request.
pub struct AccessProbe<'a> {
    inner: &'a Dataset,
    log: Mutex<Vec<(usize, Purpose, Vec<usize>)>>,
}

impl<'a> AccessProbe<'a> {
    pub fn new(inner: &'a Dataset) -> Self {
        AccessProbe {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    /// `(fold, purpose, rows)` for each request, in arrival order.
    pub fn log(&self) -> Vec<(usize, Purpose, Vec<usize>)> {
        self.log.lock().expect("probe lock").clone()
    }
}

impl RowSource for AccessProbe<'_> {
    fn dataset(&self) -> &Dataset {
        self.inner
    }

    fn rows(&self, fold: usize, purpose: Purpose, rows: &[usize]) -> Result<Dataset> {
        self.log
            .lock()
            .expect("probe lock")
            .push((fold, purpose, rows.to_vec()));
        self.inner.subset(rows)
    }
}

enum Fitted {
    Tree(TreeModel),
    Forest(crate::forest::Forest),
}

impl Fitted {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Fitted::Tree(t) => t.predict_unchecked(x),
            Fitted::Forest(f) => f.predict_unchecked(x),
        }
    }
}

fn fit_method(method: Method, train: &Dataset, cfg: &BenchConfig, fold: usize) -> Result<Fitted> {
    let sigma = if method.needs_sigma() {
        Some(sigma_from_policy(&cfg.sigma_policy, &train.x)?)
    } else {
        None
    };
    let tc = &cfg.tree_config;
    let forest = |variant, tau| {
        let fc = ForestConfig {
            tau,
            mtry: cfg.mtry,
            bootstrap: cfg.bootstrap,
            seed: cell_seed(cfg.cv_seed, method, fold),
            tree_config: tc.clone(),
            variant,
        };
        fit_forest(&train.x, &train.y, sigma.as_ref(), &fc).map(Fitted::Forest)
    };
    Ok(match method {
        Method::StandardTree => Fitted::Tree(fit_standard_tree(&train.x, &train.y, tc)?.into()),
        Method::HybridTree => {
            let t = fit_standard_tree(&train.x, &train.y, tc)?;
            let s = sigma.as_ref().expect("sigma");
            Fitted::Tree(uncertainize(&t, &train.x, &train.y, s)?.into())
        }
        Method::UncertainTree => {
            let s = sigma.as_ref().expect("sigma");
            Fitted::Tree(fit_uncertain_tree(&train.x, &train.y, s, tc)?.into())
        }
        Method::StandardRf { tau } => forest(ForestVariant::Standard, tau)?,
        Method::UncertainRf { tau } => forest(ForestVariant::Uncertain, tau)?,
    })
}

fn validate(config: &BenchConfig, n: usize) -> Result<()> {
    if config.methods.is_empty() {
        return Err(Error::Config("no methods given".into()));
    }
    config.tree_config.validate()?;
    if let Some(noise) = &config.noise {
        noise.validate()?;
    }
    if config.folds < 2 || config.folds > n {
        return Err(Error::Config(format!(
            "cannot cut {n} rows into {} folds",
            config.folds
        )));
    }
    // Smallest training split must still allow a one-row leaf.
    let smallest_train = n - n.div_ceil(config.folds);
    if config.tree_config.min_leaf_fraction * (smallest_train as f64) < 1.0 {
        return Err(Error::Config(format!(
            "training folds of {smallest_train} rows are too small for min_leaf_fraction {}",
            config.tree_config.min_leaf_fraction
        )));
    }
    Ok(())
}

/// Cross-validates every method of `config` on `dataset`.
pub fn run_benchmark(dataset: &Dataset, config: &BenchConfig) -> Result<CVReport> {
    validate(config, dataset.n())?;
    match &config.noise {
        Some(spec) => {
            let noisy =
                dataset.with_features(inject_noise(&dataset.x, &dataset.feature_names, spec)?)?;
            run_benchmark_on(&noisy, config)
        }
        None => run_benchmark_on(dataset, config),
    }
}

/// Like [`run_benchmark`], with rows drawn from `source`. Noise in the
/// config is ignored here: `source` is taken as already prepared.
pub fn run_benchmark_on<S: RowSource>(source: &S, config: &BenchConfig) -> Result<CVReport> {
    let data = source.dataset();
    let n = data.n();
    validate(config, n)?;
    for m in &config.methods {
        if let (Method::StandardRf { .. } | Method::UncertainRf { .. }, Some(mtry)) = (m, config.mtry) {
            if mtry == 0 || mtry > data.p() {
                return Err(Error::Config(format!("mtry {mtry} not in 1..={}", data.p())));
            }
        }
    }
    let folds = kfold_indices(n, config.folds, config.cv_seed)?;
    let cells: Vec<(usize, Method)> = config
        .methods
        .iter()
        .flat_map(|&m| (0..folds.len()).map(move |f| (f, m)))
        .collect();

    let scores = cells
        .par_iter()
        .map(|&(f, method)| {
            let mut in_test = vec![false; n];
            for &i in &folds[f] {
                in_test[i] = true;
            }
            let train_rows: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let model = {
                let train = source.rows(f, Purpose::Fit, &train_rows)?;
                fit_method(method, &train, config, f)?
            };
            let test = source.rows(f, Purpose::Score, &folds[f])?;
            let yhat: Vec<f64> = (0..test.n()).map(|i| model.predict(test.x.row(i))).collect();
            rmse(&yhat, &test.y)
        })
        .collect::<Result<Vec<f64>>>()?;

    let k = folds.len();
    let results = config
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let fold_rmse = scores[mi * k..(mi + 1) * k].to_vec();
            let mean = fold_rmse.iter().sum::<f64>() / k as f64;
            let var = fold_rmse.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / k as f64;
            MethodResult {
                method,
                fold_rmse,
                mean_rmse: mean,
                std_rmse: var.sqrt(),
            }
        })
        .collect();
    Ok(CVReport {
        schema_version: SCHEMA_VERSION.to_string(),
        dataset: DatasetSummary {
            name: data.name.clone(),
            n,
            p: data.p(),
            features: data.feature_names.clone(),
            target: data.target_name.clone(),
        },
        config: config.clone(),
        folds,
        results,
    })
}
