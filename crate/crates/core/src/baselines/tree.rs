use super::{check_features, check_width, training_norm, BaselineError};
use crate::dataset::Dataset;
use crate::features::NormalizationParams;
use crate::modelfile::{ModelFile, ModelFileError};
use crate::{fmt_f64, TIMESTEPS};

/// Gains within `tolerance · (1 + node SSE)` of the best count as ties, which
/// then go to the lower feature index and the lower threshold.
pub const SPLIT_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: 8, min_leaf: 5 }
    }
}

/// Preorder node; the left child of a split directly follows it.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub feature_names: Vec<String>,
    pub normalization: NormalizationParams,
    pub config: TreeConfig,
    pub nodes: Vec<TreeNode>,
}

/// CART regression tree over flattened windows.
pub fn train_decision_tree(train: &Dataset, config: &TreeConfig) -> Result<TreeModel, BaselineError> {
    let norm = training_norm(train)?;
    let rows: Vec<&[f64]> = train.windows.iter().map(|w| w.values.as_slice()).collect();
    let nodes = fit_tree_rows(&rows, &train.targets(), config)?;
    Ok(TreeModel { feature_names: train.feature_names.clone(), normalization: norm, config: *config, nodes })
}

/// Grows a tree on explicit rows; returns the preorder node list.
pub fn fit_tree_rows(rows: &[&[f64]], targets: &[f64], config: &TreeConfig) -> Result<Vec<TreeNode>, BaselineError> {
    if rows.is_empty() {
        return Err(BaselineError::EmptyDataset);
    }
    if config.min_leaf == 0 {
        return Err(BaselineError::InvalidConfig("min_leaf must be positive".into()));
    }
    if targets.iter().all(|&t| t == targets[0]) {
        return Err(BaselineError::DegenerateTarget);
    }
    let mut nodes = Vec::new();
    let indices: Vec<usize> = (0..rows.len()).collect();
    grow(rows, targets, config, indices, 0, &mut nodes);
    Ok(nodes)
}

fn mean(targets: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64
}

fn sse(sum: f64, sum_sq: f64, n: usize) -> f64 {
    (sum_sq - sum * sum / n as f64).max(0.0)
}

fn best_split(rows: &[&[f64]], targets: &[f64], idx: &[usize], min_leaf: usize) -> Option<(usize, f64)> {
    let n = idx.len();
    if n < 2 * min_leaf {
        return None;
    }
    let (sum, sum_sq) = idx.iter().fold((0.0, 0.0), |(s, q), &i| (s + targets[i], q + targets[i] * targets[i]));
    let node_sse = sse(sum, sum_sq, n);
    let width = rows[idx[0]].len();
    let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
    let mut sorted = idx.to_vec();
    for feature in 0..width {
        sorted.sort_by(|&a, &b| rows[a][feature].total_cmp(&rows[b][feature]).then(a.cmp(&b)));
        let (mut ls, mut lq) = (0.0, 0.0);
        for k in 0..n - 1 {
            let t = targets[sorted[k]];
            ls += t;
            lq += t * t;
            let left_n = k + 1;
            let (lo, hi) = (rows[sorted[k]][feature], rows[sorted[k + 1]][feature]);
            if lo == hi || left_n < min_leaf || n - left_n < min_leaf {
                continue;
            }
            let gain = node_sse - sse(ls, lq, left_n) - sse(sum - ls, sum_sq - lq, n - left_n);
            candidates.push((feature, lo + (hi - lo) / 2.0, gain));
        }
    }
    let best = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    let tol = SPLIT_TIE_TOLERANCE * (1.0 + node_sse);
    if best <= tol {
        return None;
    }
    candidates.iter().find(|c| c.2 >= best - tol).map(|&(f, thr, _)| (f, thr))
}

fn grow(
    rows: &[&[f64]],
    targets: &[f64],
    config: &TreeConfig,
    idx: Vec<usize>,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) {
    let split = if depth < config.max_depth { best_split(rows, targets, &idx, config.min_leaf) } else { None };
    let Some((feature, threshold)) = split else {
        nodes.push(TreeNode::Leaf { value: mean(targets, &idx) });
        return;
    };
    let at = nodes.len();
    nodes.push(TreeNode::Split { feature, threshold, right: 0 });
    let (left, right): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows[i][feature] <= threshold);
    grow(rows, targets, config, left, depth + 1, nodes);
    let right_at = nodes.len();
    if let TreeNode::Split { right, .. } = &mut nodes[at] {
        *right = right_at;
    }
    grow(rows, targets, config, right, depth + 1, nodes);
}

/// Leaf value reached by `values`.
pub fn walk(nodes: &[TreeNode], values: &[f64]) -> f64 {
    let mut at = 0;
    loop {
        match nodes[at] {
            TreeNode::Leaf { value } => return value,
            TreeNode::Split { feature, threshold, right } => {
                at = if values[feature] <= threshold { at + 1 } else { right };
            }
        }
    }
}

impl TreeModel {
    pub fn input_width(&self) -> usize {
        TIMESTEPS * self.feature_names.len()
    }

    pub fn score(&self, values: &[f64]) -> Result<f64, BaselineError> {
        check_width(self.input_width(), values, &self.feature_names)?;
        Ok(walk(&self.nodes, values))
    }

    pub fn predict(&self, dataset: &Dataset) -> Result<Vec<f64>, BaselineError> {
        check_features(&self.feature_names, &dataset.feature_names)?;
        if dataset.normalization.is_none() {
            return Err(BaselineError::NotNormalized);
        }
        dataset.windows.iter().map(|w| self.score(&w.values)).collect()
    }

    pub fn depth(&self) -> usize {
        fn depth_at(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { right, .. } => 1 + depth_at(nodes, at + 1).max(depth_at(nodes, right)),
            }
        }
        depth_at(&self.nodes, 0)
    }

    pub fn to_model_file(&self) -> ModelFile {
        ModelFile {
            kind: "tree".into(),
            feature_names: self.feature_names.clone(),
            dims: vec![
                ("timesteps".into(), TIMESTEPS.to_string()),
                ("features".into(), self.feature_names.len().to_string()),
                ("max_depth".into(), self.config.max_depth.to_string()),
                ("min_leaf".into(), self.config.min_leaf.to_string()),
                ("nodes".into(), self.nodes.len().to_string()),
            ],
            normalization: self.normalization.clone(),
            body: self
                .nodes
                .iter()
                .map(|n| match n {
                    TreeNode::Split { feature, threshold, .. } => format!("split {feature} {}", fmt_f64(*threshold)),
                    TreeNode::Leaf { value } => format!("leaf {}", fmt_f64(*value)),
                })
                .collect(),
        }
    }

    pub fn from_model_file(file: &ModelFile) -> Result<TreeModel, ModelFileError> {
        let timesteps: usize = file.dim("timesteps")?;
        let features: usize = file.dim("features")?;
        let count: usize = file.dim("nodes")?;
        let config = TreeConfig { max_depth: file.dim("max_depth")?, min_leaf: file.dim("min_leaf")? };
        if timesteps != TIMESTEPS || features != file.feature_names.len() || count == 0 {
            return Err(ModelFileError::Format {
                line: 3,
                reason: format!("inconsistent dims timesteps={timesteps} features={features} nodes={count}"),
            });
        }
        file.expect_body_len(count)?;
        let width = TIMESTEPS * features;
        let mut nodes = Vec::with_capacity(count);
        for (k, line) in file.body.iter().enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ModelFile::body_error(k, format!("bad number `{s}`")))
            };
            let node = match toks.as_slice() {
                ["leaf", v] => TreeNode::Leaf { value: num(v)? },
                ["split", f, thr] => {
                    let feature: usize = f
                        .parse()
                        .ok()
                        .filter(|&f| f < width)
                        .ok_or_else(|| ModelFile::body_error(k, format!("bad feature index `{f}`")))?;
                    TreeNode::Split { feature, threshold: num(thr)?, right: 0 }
                }
                _ => return Err(ModelFile::body_error(k, format!("expected a tree node, got `{line}`"))),
            };
            nodes.push(node);
        }
        // Resolve right-child links from the preorder layout.
        fn link(nodes: &mut [TreeNode], at: usize) -> Result<usize, ModelFileError> {
            if at >= nodes.len() {
                return Err(ModelFile::body_error(nodes.len(), "tree is missing nodes"));
            }
            match nodes[at] {
                TreeNode::Leaf { .. } => Ok(at + 1),
                TreeNode::Split { .. } => {
                    let right_at = link(nodes, at + 1)?;
                    if let TreeNode::Split { right, .. } = &mut nodes[at] {
                        *right = right_at;
                    }
                    link(nodes, right_at)
                }
            }
        }
        let end = link(&mut nodes, 0)?;
        if end != nodes.len() {
            return Err(ModelFile::body_error(end, "trailing nodes after a complete tree"));
        }
        Ok(TreeModel { feature_names: file.feature_names.clone(), normalization: file.normalization.clone(), config, nodes })
    }
}
