//! Extremely randomized regression trees, used only for their accumulated
//! variance reduction per feature.
//!
//! Each node draws one uniform cut per feature between the node-local min and
//! max and keeps the cut with the largest variance reduction. Random draws come
//! from one stream per `(tree, feature name)`, and every feature draws exactly
//! once per split node, so permuting the columns permutes the importances.
//! Ties between equal gains are broken by feature name for the same reason.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::FeatureError;
use crate::dataset::Dataset;
use crate::rng;

use super::correlation::window_means;

#[derive(Debug, Clone, Copy)]
pub struct ExtraTreesConfig {
    pub tree_count: usize,
    /// Nodes with fewer samples become leaves.
    pub min_split_size: usize,
    pub seed: u64,
}

impl Default for ExtraTreesConfig {
    fn default() -> Self {
        ExtraTreesConfig { tree_count: 100, min_split_size: 5, seed: 0 }
    }
}

/// Non-negative importances summing to one, aligned to `names`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl ImportanceVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Importances over per-window time-averaged features with CrashRisk targets.
pub fn extra_trees_importance(
    dataset: &Dataset,
    tree_count: usize,
    rng_seed: u64,
) -> Result<ImportanceVector, FeatureError> {
    let rows = window_means(dataset);
    let config = ExtraTreesConfig { tree_count, seed: rng_seed, ..Default::default() };
    extra_trees_importance_rows(&dataset.feature_names, &rows, &dataset.targets(), &config)
}

/// Importances for an explicit `n × F` row matrix.
pub fn extra_trees_importance_rows(
    names: &[String],
    rows: &[Vec<f64>],
    targets: &[f64],
    config: &ExtraTreesConfig,
) -> Result<ImportanceVector, FeatureError> {
    if config.tree_count == 0 {
        return Err(FeatureError::NoTrees);
    }
    if rows.is_empty() {
        return Err(FeatureError::Empty);
    }
    if targets.iter().all(|&t| t == targets[0]) {
        return Err(FeatureError::DegenerateTarget);
    }
    let f = names.len();
    let mut totals = vec![0.0; f];
    for tree in 0..config.tree_count {
        let tree_seed = rng::indexed_seed(config.seed, tree as u64);
        let mut streams: Vec<ChaCha8Rng> = names
            .iter()
            .map(|n| ChaCha8Rng::seed_from_u64(rng::sub_seed(tree_seed, n)))
            .collect();
        let per_tree = grow_tree(rows, targets, names, config.min_split_size, &mut streams);
        for (t, v) in totals.iter_mut().zip(per_tree) {
            *t += v;
        }
    }
    let sum: f64 = totals.iter().sum();
    let values = if sum > 0.0 {
        totals.iter().map(|v| v / sum).collect()
    } else {
        vec![1.0 / f as f64; f]
    };
    Ok(ImportanceVector { names: names.to_vec(), values })
}

fn sse(sum: f64, sum_sq: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (sum_sq - sum * sum / n as f64).max(0.0)
    }
}

fn grow_tree(
    rows: &[Vec<f64>],
    targets: &[f64],
    names: &[String],
    min_split_size: usize,
    streams: &mut [ChaCha8Rng],
) -> Vec<f64> {
    let f = streams.len();
    let mut importance = vec![0.0; f];
    let mut stack: Vec<Vec<usize>> = vec![(0..rows.len()).collect()];
    while let Some(node) = stack.pop() {
        if node.len() < min_split_size.max(2) {
            continue;
        }
        let (sum, sum_sq) = node.iter().fold((0.0, 0.0), |(s, q), &i| (s + targets[i], q + targets[i] * targets[i]));
        let node_sse = sse(sum, sum_sq, node.len());
        if node_sse <= 0.0 {
            continue;
        }

        let mut best: Option<(usize, f64, f64)> = None;
        for (feature, stream) in streams.iter_mut().enumerate() {
            let u: f64 = stream.random();
            let (lo, hi) = node.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(rows[i][feature]), hi.max(rows[i][feature]))
            });
            if hi <= lo {
                continue;
            }
            let cut = lo + u * (hi - lo);
            let (mut ls, mut lq, mut ln) = (0.0, 0.0, 0usize);
            for &i in &node {
                if rows[i][feature] <= cut {
                    ls += targets[i];
                    lq += targets[i] * targets[i];
                    ln += 1;
                }
            }
            if ln == 0 || ln == node.len() {
                continue;
            }
            let gain = node_sse - sse(ls, lq, ln) - sse(sum - ls, sum_sq - lq, node.len() - ln);
            // Equal gains (identical partitions) go to the smaller name, so
            // the winner does not depend on column order.
            if best.is_none_or(|(b, _, g)| gain > g || (gain == g && names[feature] < names[b])) {
                best = Some((feature, cut, gain));
            }
        }

        let Some((feature, cut, gain)) = best else { continue };
        if gain <= 0.0 {
            continue;
        }
        importance[feature] += gain;
        let (left, right): (Vec<usize>, Vec<usize>) = node.into_iter().partition(|&i| rows[i][feature] <= cut);
        stack.push(right);
        stack.push(left);
    }
    importance
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    fn config(seed: u64) -> ExtraTreesConfig {
        ExtraTreesConfig { tree_count: 50, seed, ..Default::default() }
    }

    #[test]
    fn planted_signal_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..600).map(|_| (0..5).map(|_| rng.random::<f64>()).collect()).collect();
        let targets: Vec<f64> = rows
            .iter()
            .map(|r| if r[2] < 0.33 { 0.0 } else if r[2] < 0.66 { 0.5 } else { 1.0 })
            .collect();
        let imp = extra_trees_importance_rows(&names(5), &rows, &targets, &config(7)).unwrap();
        assert!(imp.values[2] > 0.9, "{:?}", imp.values);
        assert!((imp.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_copies_share_importance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let x = rng.random::<f64>();
                vec![x; 4]
            })
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[0] + 0.1 * rng.random::<f64>()).collect();
        let imp = extra_trees_importance_rows(&names(4), &rows, &targets, &config(3)).unwrap();
        for v in &imp.values {
            assert!((v - 0.25).abs() < 0.1, "{:?}", imp.values);
        }
    }

    #[test]
    fn degenerate_target_and_no_trees() {
        let rows = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            extra_trees_importance_rows(&names(1), &rows, &[1.0, 1.0], &config(0)),
            Err(FeatureError::DegenerateTarget)
        ));
        let cfg = ExtraTreesConfig { tree_count: 0, ..Default::default() };
        assert!(matches!(
            extra_trees_importance_rows(&names(1), &rows, &[0.0, 1.0], &cfg),
            Err(FeatureError::NoTrees)
        ));
    }

    #[test]
    fn column_permutation_permutes_importance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[0] + 0.5 * r[1] + 0.2 * rng.random::<f64>()).collect();
        let n = names(4);
        let imp = extra_trees_importance_rows(&n, &rows, &targets, &config(9)).unwrap();

        let perm = [2usize, 0, 3, 1];
        let p_rows: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let p_names: Vec<String> = perm.iter().map(|&j| n[j].clone()).collect();
        let p_imp = extra_trees_importance_rows(&p_names, &p_rows, &targets, &config(9)).unwrap();
        for (k, &j) in perm.iter().enumerate() {
            assert!((p_imp.values[k] - imp.values[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..100).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let a = extra_trees_importance_rows(&names(3), &rows, &targets, &config(1)).unwrap();
        let b = extra_trees_importance_rows(&names(3), &rows, &targets, &config(1)).unwrap();
        assert_eq!(a, b);
    }
}
