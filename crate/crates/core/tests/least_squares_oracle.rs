mod common;

use common::{exact_min_norm_solution, exact_rank, to_f64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uncertain_trees::linalg::{numerical_rank, solve_least_squares};
use uncertain_trees::DenseMatrix;

/// Dyadic entries keep sums of columns exact, so planted dependencies are
/// real dependencies for the rational oracle too.
fn dyadic_matrix(rng: &mut ChaCha8Rng, n: usize, k: usize, deficient: bool) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| f64::from(rng.random_range(0..64u8)) / 64.0).collect())
        .collect();
    if deficient && k >= 2 {
        let target = rng.random_range(1..k);
        let a = rng.random_range(0..target);
        let b = rng.random_range(0..target);
        cols[target] = (0..n).map(|i| cols[a][i] + 0.5 * cols[b][i]).collect();
    }
    (0..n).map(|i| (0..k).map(|j| cols[j][i]).collect()).collect()
}

#[test]
fn matches_exact_pseudoinverse_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..60 {
        let n = rng.random_range(1..=20);
        let k = rng.random_range(1..=5);
        let rows = dyadic_matrix(&mut rng, n, k, case % 3 == 0);
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-500..500i16)) / 8.0).collect();
        let exact: Vec<f64> = exact_min_norm_solution(&rows, &y).iter().map(to_f64).collect();
        let p = DenseMatrix::from_rows(&rows).unwrap();
        let got = solve_least_squares(&p, &y).unwrap();
        let err: f64 = got.0.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * norm.max(1e-300) + 1e-12, "case {case}: {got:?} vs {exact:?}");
        assert_eq!(numerical_rank(&p, None).unwrap(), exact_rank(&rows), "case {case}");
    }
}

#[test]
fn oracle_sanity() {
    // Duplicate columns share the weight equally.
    let rows = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
    let g: Vec<f64> = exact_min_norm_solution(&rows, &[3.0, 3.0]).iter().map(to_f64).collect();
    assert_eq!(g, vec![1.5, 1.5]);
    assert_eq!(exact_rank(&rows), 1);
}
