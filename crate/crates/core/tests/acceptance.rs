//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that every line is printed even when
//! an earlier criterion fails. Exits non-zero if any criterion fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{exact_min_norm_solution, exact_rank, to_f64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uncertain_trees::bench::synthetic::{generate, Shape, SyntheticSpec};
use uncertain_trees::bench::{
    load_abalone_uci, load_csv, parse_index_list, run_benchmark, BenchConfig, CVReport, Dataset,
    Method, NoiseSpec, SigmaPolicy,
};
use uncertain_trees::forest::{fit_forest, ForestConfig, ForestVariant};
use uncertain_trees::linalg::{numerical_rank, solve_least_squares};
use uncertain_trees::partition::{build_membership, sigma_within_bound};
use uncertain_trees::trees::TreeModel;
use uncertain_trees::{
    fit_standard_tree, fit_uncertain_tree, DenseMatrix, Partition, Region, SigmaVector,
    TreeConfig, UncertainTree,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn diabetes() -> Dataset {
    load_csv(fixture("diabetes.csv"), &"target".parse().unwrap(), true)
        .expect("diabetes fixture")
        .0
}

fn abalone() -> Result<Dataset, String> {
    let path = std::env::var_os("UTREES_ABALONE_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| fixture("abalone.data"));
    if !path.exists() {
        return Err(format!(
            "UCI abalone.data not found at {} (set UTREES_ABALONE_DATA)",
            path.display()
        ));
    }
    let idx = std::fs::read_to_string(fixture("abalone_subsample_500.txt")).map_err(|e| e.to_string())?;
    let rows = parse_index_list(&idx).map_err(|e| e.to_string())?;
    load_abalone_uci(&path, Some(&rows)).map_err(|e| e.to_string())
}

/// Every uncertain tree fitted anywhere in the suite, with its training
/// inputs, for the structural checks.
#[derive(Default)]
struct Collected {
    trees: Vec<(UncertainTree, DenseMatrix)>,
}

fn random_dataset(rng: &mut ChaCha8Rng) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let n = rng.random_range(20..=50);
    let p = rng.random_range(1..=3);
    let scale: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..20.0)).collect();
    let draw = |rng: &mut ChaCha8Rng, m: usize| -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| scale.iter().map(|s| s * rng.random::<f64>()).collect())
            .collect()
    };
    let rows = draw(rng, n);
    let y = rows
        .iter()
        .map(|r| {
            let t = r[0] / scale[0];
            (if t > 0.5 { 3.0 } else { 0.0 }) + (6.0 * t).sin() + rng.random_range(-0.3..0.3)
        })
        .collect();
    let test = draw(rng, 40);
    (
        DenseMatrix::from_rows(&rows).unwrap(),
        y,
        DenseMatrix::from_rows(&test).unwrap(),
    )
}

fn criterion_1(c: &mut Collected) -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = TreeConfig::default();
    let mut mismatches = Vec::new();
    let mut worst = 0.0f64;
    for case in 0..25 {
        let (x, y, test) = random_dataset(&mut rng);
        let sigma = SigmaVector::new(
            (0..x.cols())
                .map(|j| {
                    let col = x.column(j);
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    1e-12 * (hi - lo)
                })
                .collect(),
        )
        .unwrap();
        let s = fit_standard_tree(&x, &y, &cfg).unwrap();
        let u = fit_uncertain_tree(&x, &y, &sigma, &cfg).unwrap();
        let key = |log: &[uncertain_trees::trees::SplitRecord]| -> Vec<(usize, usize, f64)> {
            log.iter().map(|r| (r.region, r.feature, r.threshold)).collect()
        };
        if key(s.split_log()) != key(u.split_log()) {
            mismatches.push(case);
        }
        for i in 0..test.rows() {
            let d = (s.predict(test.row(i)).unwrap() - u.predict(test.row(i)).unwrap()).abs();
            worst = worst.max(d);
        }
        c.trees.push((u, x));
    }
    let elapsed = t0.elapsed();
    outcome(
        mismatches.is_empty() && worst <= 1e-6 && elapsed < Duration::from_secs(10),
        format!(
            "25 datasets, split-log mismatches {mismatches:?}, max |pred diff| {worst:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut deficient, mut rank_errors) = (0.0f64, 0, 0);
    for case in 0..100 {
        let n = rng.random_range(1..=30);
        let k = rng.random_range(1..=6);
        // Dyadic entries, so planted dependencies are exact.
        let mut cols: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| f64::from(rng.random_range(0..128u8)) / 128.0).collect())
            .collect();
        if case % 2 == 0 && k >= 2 {
            let t = rng.random_range(1..k);
            let (a, b) = (rng.random_range(0..t), rng.random_range(0..t));
            cols[t] = (0..n).map(|i| 0.25 * cols[a][i] + cols[b][i]).collect();
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..k).map(|j| cols[j][i]).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-1000..1000i16)) / 16.0).collect();
        let r = exact_rank(&rows);
        if r < k {
            deficient += 1;
        }
        let exact: Vec<f64> = exact_min_norm_solution(&rows, &y).iter().map(to_f64).collect();
        let p = DenseMatrix::from_rows(&rows).unwrap();
        let got = solve_least_squares(&p, &y).unwrap();
        let err = got.0.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = if norm > 0.0 { err / norm } else { err };
        worst = worst.max(rel);
        if numerical_rank(&p, None).unwrap() != r {
            rank_errors += 1;
        }
    }
    outcome(
        worst <= 1e-6 && rank_errors == 0,
        format!(
            "100 systems ({deficient} rank-deficient), max relative error {worst:.2e}, rank disagreements {rank_errors}"
        ),
    )
}

/// Random bounded partition of `[0, 1]^p` with `k` boxes.
fn random_boxes(rng: &mut ChaCha8Rng, p: usize, k: usize) -> Vec<Region> {
    let mut boxes = vec![Region::from_bounds(&vec![(0.0, 1.0); p]).unwrap()];
    while boxes.len() < k {
        let b = rng.random_range(0..boxes.len());
        let j = rng.random_range(0..p);
        let (lo, hi) = (boxes[b].lo(j), boxes[b].hi(j));
        let s = lo + (hi - lo) * rng.random_range(0.2..0.8);
        let mut left: Vec<(f64, f64)> = boxes[b].bounds().collect();
        let mut right = left.clone();
        left[j].1 = s;
        right[j].0 = s;
        boxes[b] = Region::from_bounds(&left).unwrap();
        boxes.push(Region::from_bounds(&right).unwrap());
    }
    boxes
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut rank_violations, mut mass_violations, mut min_diag) = (0, 0, f64::INFINITY);
    for _ in 0..50 {
        let p = rng.random_range(1..=3);
        let k = rng.random_range(2..=9);
        let partition = Partition::from_regions(random_boxes(&mut rng, p, k)).unwrap();
        let bound = partition.invertibility_bound(p).unwrap();
        let sigma = SigmaVector::new(
            bound
                .iter()
                .map(|b| if rng.random_bool(0.1) { 0.0 } else { b * rng.random_range(0.05..0.999) })
                .collect(),
        )
        .unwrap();
        assert!(sigma_within_bound(&sigma, &partition).unwrap());
        // One designated sample per region: its center.
        let centers: Vec<Vec<f64>> = partition
            .regions()
            .iter()
            .map(|r| r.bounds().map(|(a, b)| 0.5 * (a + b)).collect())
            .collect();
        let x = DenseMatrix::from_rows(&centers).unwrap();
        let pm = build_membership(&x, &sigma, &partition).unwrap();
        if numerical_rank(pm.matrix(), None).unwrap() != k {
            rank_violations += 1;
        }
        for i in 0..k {
            let d = pm.get(i, i);
            min_diag = min_diag.min(d);
            if d <= 0.5 {
                mass_violations += 1;
            }
        }
    }
    outcome(
        rank_violations == 0 && mass_violations == 0,
        format!(
            "50 partitions, rank violations {rank_violations}, P_ik <= 0.5 violations {mass_violations}, min P_ik {min_diag:.4}"
        ),
    )
}

fn criterion_4(c: &Collected) -> Outcome {
    let (mut worst_row, mut non_monotone) = (0.0f64, 0);
    for (t, x) in &c.trees {
        worst_row = worst_row.max(t.membership(x).unwrap().max_row_sum_error());
        if t.split_log().windows(2).any(|w| w[1].risk > w[0].risk) {
            non_monotone += 1;
        }
    }
    outcome(
        worst_row <= 1e-9 && non_monotone == 0 && !c.trees.is_empty(),
        format!(
            "{} uncertain trees, max |row sum - 1| {worst_row:.2e}, non-monotone split logs {non_monotone}",
            c.trees.len()
        ),
    )
}

fn mean_of(r: &CVReport, m: Method) -> f64 {
    r.result(m).unwrap().mean_rmse
}

fn ten_seed_scores(data: &Dataset, c: &mut Collected) -> (usize, usize, f64, f64, f64) {
    let methods = vec![Method::StandardTree, Method::HybridTree, Method::UncertainTree];
    let (mut wins, mut between) = (0, 0);
    let (mut s_avg, mut h_avg, mut u_avg) = (0.0, 0.0, 0.0);
    for seed in 0..10 {
        let cfg = BenchConfig::new(methods.clone(), SigmaPolicy::EmpiricalStd, seed);
        let r = run_benchmark(data, &cfg).unwrap();
        let (s, h, u) = (
            mean_of(&r, Method::StandardTree),
            mean_of(&r, Method::HybridTree),
            mean_of(&r, Method::UncertainTree),
        );
        wins += usize::from(u < s);
        between += usize::from(u < s && u <= h && h <= s);
        s_avg += s / 10.0;
        h_avg += h / 10.0;
        u_avg += u / 10.0;
    }
    let sigma = uncertain_trees::bench::sigma_from_policy(&SigmaPolicy::EmpiricalStd, &data.x).unwrap();
    let t = fit_uncertain_tree(&data.x, &data.y, &sigma, &TreeConfig::default()).unwrap();
    c.trees.push((t, data.x.clone()));
    (wins, between, s_avg, h_avg, u_avg)
}

fn criterion_5(name: &str, data: Result<Dataset, String>, c: &mut Collected, reference: (f64, f64)) -> Outcome {
    let data = match data {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("{name}: {e}")),
    };
    let t0 = Instant::now();
    let (wins, between, s, h, u) = ten_seed_scores(&data, c);
    let elapsed = t0.elapsed();
    outcome(
        between >= 8 && elapsed < Duration::from_secs(300),
        format!(
            "{name} (n={}, p={}): uncertain < standard in {wins}/10 seeds, hybrid between in {between}/10; \
             mean RMSE standard {s:.2} hybrid {h:.2} uncertain {u:.2} (reference {:.2} vs {:.2}); {:.1}s",
            data.n(),
            data.p(),
            reference.0,
            reference.1,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6(name: &str, data: Result<Dataset, String>, c: &mut Collected, reference: (f64, f64)) -> Outcome {
    let data = match data {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("{name}: {e}")),
    };
    let t0 = Instant::now();
    let std_rf = Method::StandardRf { tau: 100 };
    let unc_rf = Method::UncertainRf { tau: 15 };
    let (mut wins, mut s_avg, mut u_avg) = (0, 0.0, 0.0);
    for seed in 0..10 {
        let mut cfg = BenchConfig::new(vec![std_rf, unc_rf], SigmaPolicy::HalfEmpiricalStd, seed);
        cfg.noise = Some(NoiseSpec::new(seed));
        let r = run_benchmark(&data, &cfg).unwrap();
        let (s, u) = (mean_of(&r, std_rf), mean_of(&r, unc_rf));
        wins += usize::from(u < s);
        s_avg += s / 10.0;
        u_avg += u / 10.0;
    }
    // Members of one uncertain forest on the noisy data join the structural checks.
    let noisy = data
        .with_features(
            uncertain_trees::bench::inject_noise(&data.x, &data.feature_names, &NoiseSpec::new(0)).unwrap(),
        )
        .unwrap();
    let sigma = uncertain_trees::bench::sigma_from_policy(&SigmaPolicy::HalfEmpiricalStd, &noisy.x).unwrap();
    let forest = fit_forest(
        &noisy.x,
        &noisy.y,
        Some(&sigma),
        &ForestConfig::new(ForestVariant::Uncertain, 15, 0),
    )
    .unwrap();
    for m in forest.members() {
        if let TreeModel::Uncertain(t) = &m.tree {
            c.trees.push((t.clone(), noisy.x.clone()));
        }
    }
    let elapsed = t0.elapsed();
    outcome(
        wins >= 8 && elapsed < Duration::from_secs(900),
        format!(
            "{name}: uncertain RF(15) < standard RF(100) in {wins}/10 seeds; mean RMSE standard {s_avg:.2} \
             uncertain {u_avg:.2} (reference {:.2} vs {:.2}); {:.1}s",
            reference.0,
            reference.1,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7(c: &mut Collected) -> Outcome {
    let sigma_true = 0.1;
    let methods = vec![Method::StandardTree, Method::HybridTree, Method::UncertainTree];
    let mut parts = Vec::new();
    let mut pass = true;
    for shape in [Shape::PiecewiseConstant, Shape::SmoothMonotone] {
        let (mut wins, mut ordered) = (0, 0);
        for seed in 0..20 {
            let spec = SyntheticSpec {
                shape,
                n: 200,
                sigma_true,
                noise_sd: 0.1,
                seed,
            };
            let data = generate(&spec).unwrap();
            let policy = SigmaPolicy::Fixed(vec![sigma_true; 2]);
            let r = run_benchmark(&data, &BenchConfig::new(methods.clone(), policy, 100 + seed)).unwrap();
            let (s, h, u) = (
                mean_of(&r, Method::StandardTree),
                mean_of(&r, Method::HybridTree),
                mean_of(&r, Method::UncertainTree),
            );
            wins += usize::from(u < s);
            ordered += usize::from(u <= h && h <= s);
            let sig = SigmaVector::new(vec![sigma_true; 2]).unwrap();
            let t = fit_uncertain_tree(&data.x, &data.y, &sig, &TreeConfig::default()).unwrap();
            c.trees.push((t, data.x.clone()));
        }
        pass &= wins >= 14;
        parts.push(format!(
            "{shape:?}: uncertain < standard in {wins}/20, uncertain <= hybrid <= standard in {ordered}/20"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let data = diabetes();
    let mut cfg = BenchConfig::new(
        vec![
            Method::StandardTree,
            Method::HybridTree,
            Method::UncertainTree,
            Method::StandardRf { tau: 20 },
            Method::UncertainRf { tau: 5 },
        ],
        SigmaPolicy::HalfEmpiricalStd,
        42,
    );
    cfg.noise = Some(NoiseSpec::new(7));
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_benchmark(&data, &cfg).unwrap().to_json().unwrap())
    };
    let serial = run(1);
    let wide = run(16);
    let again = run(16);
    outcome(
        serial == wide && wide == again,
        format!("3 runs (1, 16, 16 threads), {} bytes, identical: {}", serial.len(), serial == wide && wide == again),
    )
}

fn main() {
    let mut c = Collected::default();
    let start = Instant::now();
    let results: Vec<(&str, Outcome)> = vec![
        ("1", criterion_1(&mut c)),
        ("2", criterion_2()),
        ("3", criterion_3()),
        ("5 diabete", criterion_5("Diabete", Ok(diabetes()), &mut c, (60.29, 56.56))),
        ("5 abalone", criterion_5("Abalone", abalone(), &mut c, (2.70, 2.33))),
        ("6 diabete", criterion_6("Diabete", Ok(diabetes()), &mut c, (59.55, 55.66))),
        ("6 abalone", criterion_6("Abalone", abalone(), &mut c, (2.64, 1.98))),
        ("7", criterion_7(&mut c)),
        ("4", criterion_4(&c)),
        ("8", criterion_8()),
    ];
    let mut failed = 0;
    for (id, o) in &results {
        println!("criterion {id:<10} {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.1}s)",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
