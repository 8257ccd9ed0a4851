use super::{
    admissible_cuts, centered_sse, may_split, validate_training, Frontier, SplitRecord,
    StandardTree, TreeConfig,
};
use crate::error::Result;
use crate::linalg::{DenseMatrix, WeightVector};
use crate::partition::Partition;

struct Best {
    feature: usize,
    threshold: f64,
    n_left: usize,
    reduction: f64,
}

/// Greedy least-squares CART with mean-valued leaves.
///
/// Uses the same candidate thresholds, admissibility filter, tie-breaking and
/// depth-first order as [`super::fit_uncertain_tree`], so the two coincide
/// when the uncertainty goes to zero.
pub fn fit_standard_tree(x: &DenseMatrix, y: &[f64], config: &TreeConfig) -> Result<StandardTree> {
    let min_count = validate_training(x, y, config)?;
    let n = y.len();
    let root_sse = centered_sse(y.iter().copied());
    let floor = 1e-12 * root_sse;
    let tie = 1e-11 * root_sse;

    let mut partition = Partition::root(x.cols());
    let mut members: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut split_log = Vec::new();
    let mut frontier = Frontier::new();

    while let Some((k, depth)) = frontier.pop() {
        if !may_split(config, partition.len(), depth) {
            if config.max_leaves.is_some_and(|m| partition.len() >= m) {
                break;
            }
            continue;
        }
        let rows = &members[k];
        let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
        let mut best: Option<Best> = None;
        for j in 0..x.cols() {
            let (order, cuts) = admissible_cuts(x, rows, j, min_count);
            if cuts.is_empty() {
                continue;
            }
            let total = order.len() as f64;
            let mut prefix = 0.0;
            let mut consumed = 0;
            for cut in &cuts {
                while consumed < cut.n_left {
                    prefix += y[order[consumed]] - mean;
                    consumed += 1;
                }
                let nl = cut.n_left as f64;
                let nr = total - nl;
                let reduction = prefix * prefix * total / (nl * nr);
                if best.as_ref().is_none_or(|b| reduction > b.reduction + tie) {
                    best = Some(Best {
                        feature: j,
                        threshold: cut.threshold,
                        n_left: cut.n_left,
                        reduction,
                    });
                }
            }
        }
        let Some(best) = best else { continue };
        if best.reduction < floor || best.reduction <= 0.0 {
            continue;
        }

        partition = partition.split(k, best.feature, best.threshold)?;
        let (left, right): (Vec<usize>, Vec<usize>) = members[k]
            .iter()
            .partition(|&&i| x.get(i, best.feature) <= best.threshold);
        debug_assert_eq!(left.len(), best.n_left);
        members[k] = left;
        members.push(right);
        let risk: f64 = members
            .iter()
            .map(|m| centered_sse(m.iter().map(|&i| y[i])))
            .sum();
        split_log.push(SplitRecord {
            region: k,
            feature: best.feature,
            threshold: best.threshold,
            risk,
        });
        frontier.push_children(k, partition.len() - 1, depth);
    }

    let leaf_values = members
        .iter()
        .map(|m| m.iter().map(|&i| y[i]).sum::<f64>() / m.len() as f64)
        .collect();
    Ok(StandardTree {
        partition,
        leaf_values: WeightVector(leaf_values),
        split_log,
        n_train: n,
        config: config.clone(),
    })
}
