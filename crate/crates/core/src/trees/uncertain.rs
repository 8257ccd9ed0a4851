//! Growing trees under soft (Gaussian) region membership.
//!
//! Every candidate split is scored by the global least-squares risk over all
//! training rows. Replacing column `k` of `P` by `q_left` and appending
//! `q_right = P_k - q_left` spans the same space as appending `q_left` alone,
//! so the risk drop of a candidate is the squared projection of the current
//! residual onto the part of `q_left` orthogonal to `span(P)`. Scoring costs
//! `O(nK)` per candidate; the chosen split is then applied through the full
//! SVD solve.

use super::{
    admissible_cuts, centered_sse, may_split, validate_training, Frontier, SplitRecord,
    StandardTree, TreeConfig, TreeOrigin, UncertainTree,
};
use crate::error::{Error, Result};
use crate::linalg::{
    column_space_basis, default_rank_tolerance, dot, project_out, solve_least_squares, sse,
    DenseMatrix, WeightVector,
};
use crate::partition::{
    build_membership, update_membership_for_split, MembershipMatrix, Partition, Region,
};
use crate::prob::{self, axis_mass, gaussian_mass, SigmaVector};

/// Directions closer than this (relative) to `span(P)` add nothing.
const COLLINEAR_REL_TOL: f64 = 1e-10;

/// Risk and weights of the tree obtained by splitting region `k` on feature
/// `j` at `s`, computed with a fresh SVD solve. Inputs are left untouched.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_split(
    x: &DenseMatrix,
    p: &MembershipMatrix,
    k: usize,
    j: usize,
    s: f64,
    y: &[f64],
    sigma: &SigmaVector,
    partition: &Partition,
) -> Result<(f64, WeightVector)> {
    if p.cols() != partition.len() {
        return Err(Error::DimensionMismatch {
            expected: partition.len(),
            got: p.cols(),
        });
    }
    let next = partition.split(k, j, s)?;
    let (left, right) = (next.region(k), next.region(next.len() - 1));
    let child = |r: &Region| -> Result<Vec<f64>> {
        (0..x.rows())
            .map(|i| prob::region_membership(x.row(i), sigma, r))
            .collect()
    };
    let (ql, qr) = (child(left)?, child(right)?);
    let tentative = update_membership_for_split(p, k, &ql, &qr)?;
    let gamma = solve_least_squares(tentative.matrix(), y)?;
    let risk = sse(tentative.matrix(), &gamma, y)?;
    Ok((risk, gamma))
}

/// Orthonormal basis of the current `span(P)` and the residual of `y`.
struct Scorer {
    basis: Vec<Vec<f64>>,
    residual: Vec<f64>,
    abs_tol: f64,
    scratch: Vec<f64>,
}

impl Scorer {
    fn new(p: &MembershipMatrix, y: &[f64]) -> Self {
        let (basis, smax) = column_space_basis(p.matrix());
        let mut residual = y.to_vec();
        project_out(&mut residual, &basis);
        Scorer {
            basis,
            residual,
            abs_tol: default_rank_tolerance(p.rows(), p.cols() + 1, smax),
            scratch: vec![0.0; y.len()],
        }
    }

    /// Drop in least-squares risk from adding column `q` to `P`.
    fn reduction(&mut self, q: &[f64]) -> f64 {
        let v = &mut self.scratch;
        v.copy_from_slice(q);
        project_out(v, &self.basis);
        let nv2 = dot(v, v);
        let nq2 = dot(q, q);
        let tol2 = self.abs_tol.powi(2).max(COLLINEAR_REL_TOL.powi(2) * nq2);
        if nv2 <= tol2 {
            return 0.0;
        }
        let c = dot(v, &self.residual);
        c * c / nv2
    }
}

/// Per-row pieces needed to evaluate `P(U_i in R_L)` for every threshold of
/// one feature inside one region.
struct FeatureScan {
    column: Vec<f64>,
    /// Product of the other axes' masses.
    rest: Vec<f64>,
    sigma: f64,
    lo: f64,
    lo_lower: Vec<f64>,
    lo_upper: Vec<f64>,
    lo_positive: Vec<bool>,
}

impl FeatureScan {
    fn new(x: &DenseMatrix, factors: &[Vec<f64>], region: &Region, sigma: f64, j: usize) -> Self {
        let n = x.rows();
        let column = x.column(j);
        let rest: Vec<f64> = (0..n)
            .map(|i| {
                factors[i]
                    .iter()
                    .enumerate()
                    .filter(|&(jj, _)| jj != j)
                    .map(|(_, f)| f)
                    .product()
            })
            .collect();
        let lo = region.lo(j);
        let mut lo_lower = vec![0.0; n];
        let mut lo_upper = vec![1.0; n];
        let mut lo_positive = vec![false; n];
        if sigma > 0.0 {
            for i in 0..n {
                let z = (lo - column[i]) / sigma;
                lo_lower[i] = prob::phi(z);
                lo_upper[i] = prob::phi_upper(z);
                lo_positive[i] = z > 0.0;
            }
        }
        FeatureScan {
            column,
            rest,
            sigma,
            lo,
            lo_lower,
            lo_upper,
            lo_positive,
        }
    }

    /// `q_L` for threshold `s`, written into `out`.
    fn left_column(&self, s: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let rest = self.rest[i];
            if rest == 0.0 {
                *o = 0.0;
                continue;
            }
            let xi = self.column[i];
            let m = if self.sigma == 0.0 {
                if self.lo < xi && xi <= s {
                    1.0
                } else {
                    0.0
                }
            } else {
                let z = (s - xi) / self.sigma;
                let m = if self.lo_positive[i] {
                    self.lo_upper[i] - prob::phi_upper(z)
                } else {
                    prob::phi(z) - self.lo_lower[i]
                };
                m.max(0.0)
            };
            *o = rest * m;
        }
    }
}

struct Best {
    feature: usize,
    threshold: f64,
    reduction: f64,
}

fn axis_factors(x: &DenseMatrix, sigma: &SigmaVector, region: &Region) -> Vec<Vec<f64>> {
    (0..x.rows())
        .map(|i| {
            region
                .bounds()
                .enumerate()
                .map(|(j, (a, b))| axis_mass(x.get(i, j), sigma[j], a, b))
                .collect()
        })
        .collect()
}

fn best_split(
    x: &DenseMatrix,
    sigma: &SigmaVector,
    region: &Region,
    members: &[usize],
    min_count: usize,
    scorer: &mut Scorer,
    tie: f64,
) -> Option<Best> {
    let factors = axis_factors(x, sigma, region);
    let mut q = vec![0.0; x.rows()];
    let mut best: Option<Best> = None;
    for j in 0..x.cols() {
        let (_, cuts) = admissible_cuts(x, members, j, min_count);
        if cuts.is_empty() {
            continue;
        }
        let scan = FeatureScan::new(x, &factors, region, sigma[j], j);
        for cut in &cuts {
            scan.left_column(cut.threshold, &mut q);
            let reduction = scorer.reduction(&q);
            if best.as_ref().is_none_or(|b| reduction > b.reduction + tie) {
                best = Some(Best {
                    feature: j,
                    threshold: cut.threshold,
                    reduction,
                });
            }
        }
    }
    best
}

/// Children's membership columns for splitting `region` on `j` at `s`.
fn child_columns(
    x: &DenseMatrix,
    sigma: &SigmaVector,
    region: &Region,
    j: usize,
    s: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (region.lo(j), region.hi(j));
    let n = x.rows();
    let mut ql = vec![0.0; n];
    let mut qr = vec![0.0; n];
    for i in 0..n {
        let row = x.row(i);
        let rest: f64 = region
            .bounds()
            .enumerate()
            .filter(|&(jj, _)| jj != j)
            .map(|(jj, (lo, hi))| axis_mass(row[jj], sigma[jj], lo, hi))
            .product();
        if rest == 0.0 {
            continue;
        }
        let (ml, mr) = if sigma[j] == 0.0 {
            (axis_mass(row[j], 0.0, a, s), axis_mass(row[j], 0.0, s, b))
        } else {
            (
                gaussian_mass(row[j], sigma[j], a, s),
                gaussian_mass(row[j], sigma[j], s, b),
            )
        };
        ql[i] = rest * ml;
        qr[i] = rest * mr;
    }
    (ql, qr)
}

/// Grows an uncertain regression tree.
///
/// Regions are popped depth-first from a stack. For the popped region every
/// admissible `(feature, threshold)` is scored by the training risk of the
/// whole tree after the split; the best one is applied if it lowers the risk
/// by more than `1e-12 * n * Var(y)`, otherwise the region is kept as a leaf.
/// Weights are refit once on the final partition.
pub fn fit_uncertain_tree(
    x: &DenseMatrix,
    y: &[f64],
    sigma: &SigmaVector,
    config: &TreeConfig,
) -> Result<UncertainTree> {
    let min_count = validate_training(x, y, config)?;
    if sigma.len() != x.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            got: sigma.len(),
        });
    }
    let n = y.len();
    let root_sse = centered_sse(y.iter().copied());
    let y_norm2: f64 = y.iter().map(|v| v * v).sum();
    // Projections of y are only accurate to about n * eps * |y|.
    let noise = (n as f64 * f64::EPSILON).powi(2) * y_norm2;
    let floor = (1e-12 * root_sse).max(noise);
    let tie = (1e-11 * root_sse).max(noise);

    let mut partition = Partition::root(x.cols());
    let mut pmat = build_membership(x, sigma, &partition)?;
    let mut members: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut split_log = Vec::new();
    let mut frontier = Frontier::new();
    let mut scorer: Option<Scorer> = None;

    while let Some((k, depth)) = frontier.pop() {
        if !may_split(config, partition.len(), depth) {
            if config.max_leaves.is_some_and(|m| partition.len() >= m) {
                break;
            }
            continue;
        }
        let sc = scorer.get_or_insert_with(|| Scorer::new(&pmat, y));
        let region = partition.region(k).clone();
        let Some(best) = best_split(x, sigma, &region, &members[k], min_count, sc, tie) else {
            continue;
        };
        if best.reduction < floor || best.reduction <= 0.0 {
            continue;
        }

        let (ql, qr) = child_columns(x, sigma, &region, best.feature, best.threshold);
        pmat = update_membership_for_split(&pmat, k, &ql, &qr)?;
        partition = partition.split(k, best.feature, best.threshold)?;
        scorer = None;
        let gamma = solve_least_squares(pmat.matrix(), y)?;
        let risk = sse(pmat.matrix(), &gamma, y)?;

        let (left, right): (Vec<usize>, Vec<usize>) = members[k]
            .iter()
            .partition(|&&i| x.get(i, best.feature) <= best.threshold);
        members[k] = left;
        members.push(right);
        split_log.push(SplitRecord {
            region: k,
            feature: best.feature,
            threshold: best.threshold,
            risk,
        });
        frontier.push_children(k, partition.len() - 1, depth);
    }

    let final_p = build_membership(x, sigma, &partition)?;
    let gamma = solve_least_squares(final_p.matrix(), y)?;
    Ok(UncertainTree {
        partition,
        gamma,
        sigma: sigma.clone(),
        split_log,
        n_train: n,
        config: config.clone(),
        origin: TreeOrigin::Uncertain,
    })
}

/// Keeps a CART partition and refits its weights by least squares under soft
/// membership; prediction then follows the uncertain rule.
pub fn uncertainize(
    tree: &StandardTree,
    x: &DenseMatrix,
    y: &[f64],
    sigma: &SigmaVector,
) -> Result<UncertainTree> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    let pmat = build_membership(x, sigma, &tree.partition)?;
    let gamma = solve_least_squares(pmat.matrix(), y)?;
    Ok(UncertainTree {
        partition: tree.partition.clone(),
        gamma,
        sigma: sigma.clone(),
        split_log: tree.split_log.clone(),
        n_train: y.len(),
        config: tree.config.clone(),
        origin: TreeOrigin::Hybrid,
    })
}
