//! Exact rational oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(v: f64) -> Q {
    Q::from_float(v).expect("finite")
}

pub fn to_f64(v: &Q) -> f64 {
    v.to_f64().expect("representable")
}

/// Reduced row echelon form; returns (pivot columns, nonzero rows).
pub fn rref(a: &[Vec<Q>]) -> (Vec<usize>, Vec<Vec<Q>>) {
    let mut m: Vec<Vec<Q>> = a.to_vec();
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(pr) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, pr);
        let inv = Q::from_integer(BigInt::from(1)) / m[r][c].clone();
        for v in m[r].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let d = f.clone() * m[r][j].clone();
                    m[i][j] = m[i][j].clone() - d;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    m.truncate(r);
    (pivots, m)
}

pub fn exact_rank(p: &[Vec<f64>]) -> usize {
    let a: Vec<Vec<Q>> = p.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect();
    rref(&a).0.len()
}

/// Solves a nonsingular square system exactly.
fn solve_square(a: Vec<Vec<Q>>, b: Vec<Q>) -> Vec<Q> {
    let n = b.len();
    let aug: Vec<Vec<Q>> = a
        .into_iter()
        .zip(b)
        .map(|(mut row, bi)| {
            row.push(bi);
            row
        })
        .collect();
    let (pivots, red) = rref(&aug);
    assert_eq!(pivots, (0..n).collect::<Vec<_>>(), "singular system");
    red.into_iter().map(|row| row[n].clone()).collect()
}

/// Minimum-norm least-squares solution `pinv(P) y`, exactly, through the
/// full-rank factorisation `P = C F` (C: pivot columns, F: nonzero RREF rows):
/// `pinv(P) = F^T (F F^T)^{-1} (C^T C)^{-1} C^T`.
pub fn exact_min_norm_solution(p: &[Vec<f64>], y: &[f64]) -> Vec<Q> {
    let n = p.len();
    let k = p[0].len();
    let a: Vec<Vec<Q>> = p.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect();
    let yq: Vec<Q> = y.iter().map(|&v| q(v)).collect();
    let (pivots, f) = rref(&a);
    let r = pivots.len();
    if r == 0 {
        return vec![Q::zero(); k];
    }
    let c: Vec<Vec<Q>> = (0..n)
        .map(|i| pivots.iter().map(|&j| a[i][j].clone()).collect())
        .collect();
    let dot = |u: &mut dyn Iterator<Item = (Q, Q)>| u.fold(Q::zero(), |s, (x, y)| s + x * y);
    let ctc: Vec<Vec<Q>> = (0..r)
        .map(|s| {
            (0..r)
                .map(|t| dot(&mut (0..n).map(|i| (c[i][s].clone(), c[i][t].clone()))))
                .collect()
        })
        .collect();
    let cty: Vec<Q> = (0..r)
        .map(|s| dot(&mut (0..n).map(|i| (c[i][s].clone(), yq[i].clone()))))
        .collect();
    let z = solve_square(ctc, cty);
    let fft: Vec<Vec<Q>> = (0..r)
        .map(|s| {
            (0..r)
                .map(|t| dot(&mut (0..k).map(|j| (f[s][j].clone(), f[t][j].clone()))))
                .collect()
        })
        .collect();
    let w = solve_square(fft, z);
    (0..k)
        .map(|j| dot(&mut (0..r).map(|s| (f[s][j].clone(), w[s].clone()))))
        .collect()
}
