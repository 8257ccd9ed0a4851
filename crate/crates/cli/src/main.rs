use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use uncertain_trees::bench::{
    inject_noise, load_csv, read_features, run_benchmark, sigma_from_policy, BenchConfig, Dataset,
    Method, NoiseSpec, SigmaPolicy, TargetColumn,
};
use uncertain_trees::forest::{fit_forest, ForestConfig, ForestVariant};
use uncertain_trees::linalg::{numerical_rank, DenseMatrix};
use uncertain_trees::partition::build_membership;
use uncertain_trees::trees::TreeModel;
use uncertain_trees::{
    fit_standard_tree, fit_uncertain_tree, uncertainize, Error, Model, Partition, SigmaVector,
    TreeConfig,
};

#[derive(Parser, Debug)]
#[command(name = "utrees", version, about = "Regression trees and forests with Gaussian input uncertainty")]
struct Cli {
    /// Seed for every random choice (folds, forests, noise).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to $UTREES_THREADS, then to all cores.
    #[arg(long, global = true, env = "UTREES_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model and write it as JSON.
    Fit(FitArgs),
    /// Predict one value per input row.
    Predict(PredictArgs),
    /// Cross-validate methods and report RMSE.
    Bench(BenchArgs),
    /// Write a copy of a dataset with sign-times-uniform noise on its features.
    Noise(NoiseArgs),
    /// Report the per-feature sigma bound guaranteeing an invertible P^T P.
    CheckInvertibility(CheckArgs),
}

#[derive(Args, Debug, Serialize)]
struct DataArgs {
    /// Delimited text file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Target column name or zero-based index.
    #[arg(long)]
    target: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FitMethod {
    Tree,
    Utree,
    Hybrid,
    Rf,
    Urf,
}

#[derive(Args, Debug, Serialize)]
struct TreeArgs {
    #[arg(long, default_value_t = 0.1)]
    min_leaf_frac: f64,
    #[arg(long)]
    max_leaves: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
}

impl TreeArgs {
    fn config(&self) -> TreeConfig {
        TreeConfig {
            min_leaf_fraction: self.min_leaf_frac,
            max_leaves: self.max_leaves,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = FitMethod::Utree)]
    method: FitMethod,
    /// `empirical`, `half`, or a file of per-feature values.
    #[arg(long, default_value = "empirical")]
    sigma: String,
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long, default_value_t = 100)]
    tau: usize,
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long)]
    no_bootstrap: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature file with a header row; `-` or omitted reads stdin.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated, e.g. `standard_tree,uncertain_tree,uncertain_rf:15`.
    #[arg(long, default_value = "standard_tree,hybrid_tree,uncertain_tree")]
    methods: String,
    #[arg(long, default_value = "empirical")]
    sigma: String,
    /// Add noise to the inputs before cross-validation.
    #[arg(long)]
    noise: bool,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long)]
    no_bootstrap: bool,
}

#[derive(Args, Debug, Serialize)]
struct NoiseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.1)]
    lo_frac: f64,
    #[arg(long, default_value_t = 0.25)]
    hi_frac: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    /// Training data, to also report the numerical rank of P.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column of `--data`, which is then skipped.
    #[arg(long, requires = "data")]
    target: Option<String>,
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::StoppingRuleVacuous(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn load(data: &DataArgs) -> CliResult<Dataset> {
    let target: TargetColumn = data.target.parse()?;
    let (dataset, report) = load_csv(&data.data, &target, true)?;
    if report.rows_rejected > 0 {
        eprintln!(
            "warning: skipped {} of {} rows with missing or non-numeric values",
            report.rows_rejected, report.rows_read
        );
    }
    if !report.dropped_columns.is_empty() {
        eprintln!("note: dropped non-numeric columns {:?}", report.dropped_columns);
    }
    Ok(dataset)
}

fn parse_sigma_policy(s: &str, p: usize) -> CliResult<SigmaPolicy> {
    match s {
        "empirical" => Ok(SigmaPolicy::EmpiricalStd),
        "half" => Ok(SigmaPolicy::HalfEmpiricalStd),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("--sigma {path:?}: not a policy and unreadable: {e}")))?;
            let values: Vec<f64> = match serde_json::from_str::<Vec<f64>>(&text) {
                Ok(v) => v,
                Err(_) => text
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse::<f64>().map_err(|_| usage(format!("bad sigma value {t:?}"))))
                    .collect::<CliResult<_>>()?,
            };
            if values.len() != p {
                return Err(usage(format!("--sigma file has {} values for {p} features", values.len())));
            }
            Ok(SigmaPolicy::Fixed(values))
        }
    }
}

fn emit(format: Format, value: &Value, table: &str) -> CliResult<()> {
    let mut out = io::stdout().lock();
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(value).map_err(Error::from)?)?,
        Format::Table => write!(out, "{table}")?,
    }
    Ok(())
}

fn fmt_bound(b: f64) -> String {
    if b.is_infinite() {
        "inf".into()
    } else {
        format!("{b:.6}")
    }
}

/// Per-feature bound and whether sigma stays strictly below it.
fn invertibility(partition: &Partition, sigma: &SigmaVector) -> CliResult<(Vec<f64>, Vec<bool>)> {
    let bound = partition.invertibility_bound(partition.dim())?;
    let ok = bound.iter().zip(sigma.as_slice()).map(|(b, s)| s < b).collect();
    Ok((bound, ok))
}

fn bound_json(bound: &[f64]) -> Vec<Value> {
    bound
        .iter()
        .map(|b| if b.is_finite() { json!(b) } else { json!("inf") })
        .collect()
}

fn cmd_fit(cli: &Cli, args: &FitArgs) -> CliResult<()> {
    let data = load(&args.data)?;
    let cfg = args.tree.config();
    cfg.validate()?;
    let policy = parse_sigma_policy(&args.sigma, data.p())?;
    let sigma = sigma_from_policy(&policy, &data.x)?;
    let forest_cfg = |variant| ForestConfig {
        tau: args.tau,
        mtry: args.mtry,
        bootstrap: !args.no_bootstrap,
        seed: cli.seed,
        tree_config: cfg.clone(),
        variant,
    };
    if let Some(m) = args.mtry {
        if m == 0 || m > data.p() {
            return Err(usage(format!("--mtry {m} not in 1..={}", data.p())));
        }
    }
    let model: Model = match args.method {
        FitMethod::Tree => TreeModel::from(fit_standard_tree(&data.x, &data.y, &cfg)?).into(),
        FitMethod::Utree => TreeModel::from(fit_uncertain_tree(&data.x, &data.y, &sigma, &cfg)?).into(),
        FitMethod::Hybrid => {
            let t = fit_standard_tree(&data.x, &data.y, &cfg)?;
            TreeModel::from(uncertainize(&t, &data.x, &data.y, &sigma)?).into()
        }
        FitMethod::Rf => fit_forest(&data.x, &data.y, None, &forest_cfg(ForestVariant::Standard))?.into(),
        FitMethod::Urf => {
            fit_forest(&data.x, &data.y, Some(&sigma), &forest_cfg(ForestVariant::Uncertain))?.into()
        }
    };
    fs::write(&args.out, model.to_json(Some(&data.feature_names))? + "\n")?;

    let yhat = model.predict_many(&data.x)?;
    let risk: f64 = yhat.iter().zip(&data.y).map(|(a, b)| (a - b) * (a - b)).sum();
    let mean = data.y.iter().sum::<f64>() / data.n() as f64;
    let root_risk: f64 = data.y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let (leaves, check) = match &model {
        Model::Tree(t) => {
            let (bound, ok) = invertibility(t.partition(), &t.sigma())?;
            (vec![t.n_leaves()], Some((bound, ok)))
        }
        Model::Forest(f) => (f.members().iter().map(|m| m.tree.n_leaves()).collect(), None),
    };
    let mut table = format!(
        "model      {}\nleaves     {}\ntrain risk {:.6} (root-only {:.6})\n",
        args.out.display(),
        leaves.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
        risk,
        root_risk
    );
    let mut value = json!({
        "config": {
            "seed": cli.seed, "threads": cli.threads, "format": cli.format, "fit": args,
            "sigma": sigma.as_slice(),
        },
        "model": args.out,
        "n_leaves": if leaves.len() == 1 { json!(leaves[0]) } else { json!(leaves) },
        "training_risk": risk,
        "root_risk": root_risk,
    });
    if let Some((bound, ok)) = check {
        let all = ok.iter().all(|&b| b);
        table.push_str(&format!(
            "invertibility bound {} -> {}\n",
            bound.iter().map(|b| fmt_bound(*b)).collect::<Vec<_>>().join(" "),
            if all { "pass" } else { "fail" }
        ));
        value["invertibility"] = json!({ "bound": bound_json(&bound), "pass": ok, "all_pass": all });
    }
    emit(cli.format, &value, &table)
}

fn read_model(path: &Path) -> CliResult<(Model, Option<Vec<String>>)> {
    Ok(Model::from_json(&fs::read_to_string(path)?)?)
}

fn cmd_predict(cli: &Cli, args: &PredictArgs) -> CliResult<()> {
    let (model, names) = read_model(&args.model)?;
    let mut text = String::new();
    match &args.data {
        Some(p) if p.as_os_str() != "-" => text = fs::read_to_string(p)?,
        _ => {
            io::stdin().read_to_string(&mut text)?;
        }
    }
    let x = read_features(text.as_bytes(), names.as_deref())?;
    let yhat = model.predict_many(&x)?;
    let table: String = yhat.iter().map(|v| format!("{v}\n")).collect();
    emit(cli.format, &json!({ "predictions": yhat }), &table)
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> CliResult<()> {
    let data = load(&args.data)?;
    let methods = args
        .methods
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse::<Method>)
        .collect::<Result<Vec<_>, _>>()?;
    let mut cfg = BenchConfig::new(methods, parse_sigma_policy(&args.sigma, data.p())?, cli.seed);
    cfg.folds = args.folds;
    cfg.tree_config = args.tree.config();
    cfg.mtry = args.mtry;
    cfg.bootstrap = !args.no_bootstrap;
    if args.noise {
        cfg.noise = Some(NoiseSpec::new(cli.seed));
    }
    let report = run_benchmark(&data, &cfg)?;
    let value = serde_json::to_value(&report).map_err(Error::from)?;
    emit(cli.format, &value, &report.to_table())
}

fn cmd_noise(cli: &Cli, args: &NoiseArgs) -> CliResult<()> {
    let data = load(&args.data)?;
    let spec = NoiseSpec {
        lo_frac: args.lo_frac,
        hi_frac: args.hi_frac,
        seed: cli.seed,
    };
    let noisy = inject_noise(&data.x, &data.feature_names, &spec)?;
    let mut w = csv::Writer::from_path(&args.out).map_err(Error::from)?;
    let mut header = data.feature_names.clone();
    header.push(data.target_name.clone());
    w.write_record(&header).map_err(Error::from)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = noisy.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.y[i].to_string());
        w.write_record(&rec).map_err(Error::from)?;
    }
    w.flush()?;
    let value = json!({
        "config": { "seed": cli.seed, "noise": args },
        "rows": data.n(), "features": data.feature_names, "out": args.out,
    });
    let table = format!("wrote {} rows x {} features to {}\n", data.n(), data.p(), args.out.display());
    emit(cli.format, &value, &table)
}

fn cmd_check(cli: &Cli, args: &CheckArgs) -> CliResult<()> {
    let (model, names) = read_model(&args.model)?;
    let trees: Vec<&TreeModel> = match &model {
        Model::Tree(t) => vec![t],
        Model::Forest(f) => f.members().iter().map(|m| &m.tree).collect(),
    };
    let train: Option<DenseMatrix> = match (&args.data, &args.target) {
        (Some(d), Some(t)) => {
            let data = load(&DataArgs {
                data: d.clone(),
                target: t.clone(),
            })?;
            Some(match &names {
                Some(n) => {
                    let idx: Vec<usize> = n
                        .iter()
                        .map(|name| data.feature_names.iter().position(|f| f == name))
                        .collect::<Option<_>>()
                        .ok_or_else(|| usage("data columns do not match the model"))?;
                    data.x.select_columns(&idx)?
                }
                None => data.x,
            })
        }
        (Some(d), None) => Some(read_features(fs::File::open(d)?, names.as_deref())?),
        _ => None,
    };
    let mut table = String::new();
    let mut reports = Vec::new();
    for (t_idx, tree) in trees.iter().enumerate() {
        let sigma = tree.sigma();
        let (bound, ok) = invertibility(tree.partition(), &sigma)?;
        let k = tree.n_leaves();
        let rank = match &train {
            Some(x) => Some(numerical_rank(build_membership(x, &sigma, tree.partition())?.matrix(), None)?),
            None => None,
        };
        if trees.len() > 1 {
            table.push_str(&format!("tree {t_idx}\n"));
        }
        table.push_str("feature  sigma        bound        pass\n");
        for j in 0..bound.len() {
            let name = names.as_ref().and_then(|n| n.get(j)).cloned().unwrap_or_else(|| j.to_string());
            table.push_str(&format!(
                "{:<8} {:<12.6} {:<12} {}\n",
                name,
                sigma[j],
                fmt_bound(bound[j]),
                if ok[j] { "pass" } else { "fail" }
            ));
        }
        if let Some(r) = rank {
            table.push_str(&format!("rank(P) = {r}, K = {k}: {}\n", if r == k { "full" } else { "deficient" }));
        }
        reports.push(json!({
            "sigma": sigma.as_slice(), "bound": bound_json(&bound), "pass": ok,
            "all_pass": ok.iter().all(|&b| b), "k": k, "rank": rank,
            "full_rank": rank.map(|r| r == k),
        }));
    }
    let value = json!({
        "config": { "seed": cli.seed, "check": args },
        "trees": reports,
    });
    emit(cli.format, &value, &table)
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure {
                code: 1,
                message: e.to_string(),
            })?;
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(cli, a),
        Command::Predict(a) => cmd_predict(cli, a),
        Command::Bench(a) => cmd_bench(cli, a),
        Command::Noise(a) => cmd_noise(cli, a),
        Command::CheckInvertibility(a) => cmd_check(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
