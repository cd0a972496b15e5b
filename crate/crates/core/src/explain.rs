//! Exact TreeSHAP attribution for the in-crate tree ensemble.
//!
//! Attributions are Shapley values under tree-path-dependent feature
//! perturbation: conditional expectations follow the tree structure, with
//! node weights (covers) recomputed by routing a background dataset through
//! every tree. Values are reported in margin (log-odds) space, where
//! additivity is exact: `base_value + sum(phi) == predict_margin(x)`.
//!
//! [`reference`] holds an independent brute-force implementation (explicit
//! subset enumeration) used by the test suites to cross-check the
//! polynomial-time path algorithm.

use thiserror::Error;

use crate::gbdt::{Model, Node, Tree};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("feature dimension mismatch: model has {expected}, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("background dataset is empty")]
    EmptyBackground,
    #[error("dataset is empty")]
    EmptyDataset,
}

/// Per-feature contributions for one prediction, in log-odds units.
#[derive(Debug, Clone)]
pub struct Attribution {
    pub phi: Vec<f64>,
    /// Expected margin over the background dataset.
    pub base_value: f64,
    /// The explained row (NaN = missing).
    pub x: Vec<f64>,
}

/// Ranked mean-|SHAP| importance entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceEntry {
    pub rank: usize,
    pub feature_index: usize,
    pub feature: String,
    pub mean_abs_shap: f64,
}

/// Precomputed per-(model, background) state: background covers per node.
pub struct Explainer<'m> {
    model: &'m Model,
    covers: Vec<Vec<f64>>,
    base_value: f64,
}

impl<'m> Explainer<'m> {
    pub fn new(model: &'m Model, background: &[Vec<f64>]) -> Result<Self, ExplainError> {
        if background.is_empty() {
            return Err(ExplainError::EmptyBackground);
        }
        for row in background {
            check_dim(model, row)?;
        }
        let covers: Vec<Vec<f64>> = model
            .trees
            .iter()
            .map(|tree| background_covers(tree, background))
            .collect();

        let mut base_value = model.base_score;
        let total = background.len() as f64;
        for (tree, cov) in model.trees.iter().zip(&covers) {
            for (i, node) in tree.nodes.iter().enumerate() {
                if let Node::Leaf { weight, .. } = node {
                    base_value += weight * cov[i] / total;
                }
            }
        }
        Ok(Explainer { model, covers, base_value })
    }

    pub fn base_value(&self) -> f64 {
        self.base_value
    }

    /// Exact Shapley attribution of one row.
    pub fn attribute(&self, x: &[f64]) -> Result<Attribution, ExplainError> {
        check_dim(self.model, x)?;
        let mut phi = vec![0.0; self.model.n_features()];
        for (tree, cov) in self.model.trees.iter().zip(&self.covers) {
            if !tree.is_empty() {
                shap_recurse(
                    tree,
                    cov,
                    x,
                    &mut phi,
                    0,
                    0,
                    PathList::default(),
                    1.0,
                    1.0,
                    usize::MAX,
                );
            }
        }
        Ok(Attribution { phi, base_value: self.base_value, x: x.to_vec() })
    }
}

fn check_dim(model: &Model, row: &[f64]) -> Result<(), ExplainError> {
    if row.len() != model.n_features() {
        return Err(ExplainError::DimensionMismatch {
            expected: model.n_features(),
            got: row.len(),
        });
    }
    Ok(())
}

/// Count of background rows reaching each node (missing follows the stored
/// default direction, exactly like inference).
fn background_covers(tree: &Tree, background: &[Vec<f64>]) -> Vec<f64> {
    let mut covers = vec![0.0; tree.nodes.len()];
    for row in background {
        let mut idx = 0usize;
        loop {
            covers[idx] += 1.0;
            match &tree.nodes[idx] {
                Node::Leaf { .. } => break,
                Node::Split { feature, threshold, default_left, left, right, .. } => {
                    let v = row[*feature as usize];
                    idx = if v.is_nan() {
                        if *default_left { *left as usize } else { *right as usize }
                    } else if v < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
    covers
}

/// One-shot convenience: build an [`Explainer`] and attribute a single row.
pub fn tree_shap(model: &Model, x: &[f64], background: &[Vec<f64>]) -> Result<Attribution, ExplainError> {
    Explainer::new(model, background)?.attribute(x)
}

/// Mean absolute SHAP value per feature over a dataset, ranked descending
/// (ties keep feature order).
pub fn mean_abs_shap(
    model: &Model,
    rows: &[Vec<f64>],
    background: &[Vec<f64>],
) -> Result<Vec<ImportanceEntry>, ExplainError> {
    if rows.is_empty() {
        return Err(ExplainError::EmptyDataset);
    }
    let explainer = Explainer::new(model, background)?;
    let mut sums = vec![0.0; model.n_features()];
    for row in rows {
        let att = explainer.attribute(row)?;
        for (s, p) in sums.iter_mut().zip(&att.phi) {
            *s += p.abs();
        }
    }
    let n = rows.len() as f64;
    let mut order: Vec<usize> = (0..sums.len()).collect();
    order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(rank, fi)| ImportanceEntry {
            rank: rank + 1,
            feature_index: fi,
            feature: model.feature_names[fi].clone(),
            mean_abs_shap: sums[fi] / n,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default)]
struct PathElement {
    feature_index: usize,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

#[derive(Debug, Clone, Default)]
struct PathList {
    elems: Vec<PathElement>,
}

impl PathList {
    fn get(&self, i: usize) -> PathElement {
        self.elems[i]
    }

    fn get_mut(&mut self, i: usize) -> &mut PathElement {
        if i == self.elems.len() {
            self.elems.push(PathElement::default());
        }
        &mut self.elems[i]
    }
}

fn extend_path(path: &mut PathList, depth: usize, zero_fraction: f64, one_fraction: f64, feature_index: usize) {
    {
        let el = path.get_mut(depth);
        el.feature_index = feature_index;
        el.zero_fraction = zero_fraction;
        el.one_fraction = one_fraction;
        el.pweight = if depth == 0 { 1.0 } else { 0.0 };
    }
    for i in (0..depth).rev() {
        let w = path.get(i).pweight;
        path.get_mut(i + 1).pweight += one_fraction * w * (i + 1) as f64 / (depth + 1) as f64;
        path.get_mut(i).pweight = zero_fraction * w * (depth - i) as f64 / (depth + 1) as f64;
    }
}

fn unwind_path(path: &mut PathList, depth: usize, index: usize) {
    let one_fraction = path.get(index).one_fraction;
    let zero_fraction = path.get(index).zero_fraction;
    let mut next_one_portion = path.get(depth).pweight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path.get(i).pweight;
            path.get_mut(i).pweight =
                next_one_portion * (depth + 1) as f64 / ((i + 1) as f64 * one_fraction);
            next_one_portion = tmp
                - path.get(i).pweight * zero_fraction * (depth - i) as f64 / (depth + 1) as f64;
        } else {
            path.get_mut(i).pweight =
                path.get(i).pweight * (depth + 1) as f64 / (zero_fraction * (depth - i) as f64);
        }
    }
    for i in index..depth {
        let next = path.get(i + 1);
        let el = path.get_mut(i);
        el.feature_index = next.feature_index;
        el.zero_fraction = next.zero_fraction;
        el.one_fraction = next.one_fraction;
    }
}

fn unwound_path_sum(path: &PathList, depth: usize, index: usize) -> f64 {
    let one_fraction = path.get(index).one_fraction;
    let zero_fraction = path.get(index).zero_fraction;
    let mut next_one_portion = path.get(depth).pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = next_one_portion * (depth + 1) as f64 / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next_one_portion =
                path.get(i).pweight - tmp * zero_fraction * (depth - i) as f64 / (depth + 1) as f64;
        } else if zero_fraction != 0.0 {
            total += path.get(i).pweight / zero_fraction
                / ((depth - i) as f64 / (depth + 1) as f64);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn shap_recurse(
    tree: &Tree,
    covers: &[f64],
    x: &[f64],
    phi: &mut [f64],
    node_idx: usize,
    mut depth: usize,
    mut path: PathList,
    parent_zero_fraction: f64,
    parent_one_fraction: f64,
    parent_feature: usize,
) {
    extend_path(&mut path, depth, parent_zero_fraction, parent_one_fraction, parent_feature);

    match &tree.nodes[node_idx] {
        Node::Leaf { weight, .. } => {
            for i in 1..=depth {
                let w = unwound_path_sum(&path, depth, i);
                let el = path.get(i);
                phi[el.feature_index] += w * (el.one_fraction - el.zero_fraction) * weight;
            }
        }
        Node::Split { feature, threshold, default_left, left, right, .. } => {
            let feature = *feature as usize;
            let v = x[feature];
            let hot = if v.is_nan() {
                if *default_left { *left } else { *right }
            } else if v < *threshold {
                *left
            } else {
                *right
            } as usize;
            let cold = if hot == *left as usize { *right as usize } else { *left as usize };

            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            let mut k = 0usize;
            while k <= depth {
                if path.get(k).feature_index == feature {
                    break;
                }
                k += 1;
            }
            if k != depth + 1 {
                incoming_zero = path.get(k).zero_fraction;
                incoming_one = path.get(k).one_fraction;
                unwind_path(&mut path, depth, k);
                depth -= 1;
            }

            let node_cover = covers[node_idx];
            let frac = |child: usize| {
                if node_cover > 0.0 { covers[child] / node_cover } else { 0.0 }
            };
            // Subtrees with both fractions zero contribute nothing and would
            // poison later unwinds with 0/0.
            let hot_zero = frac(hot) * incoming_zero;
            if hot_zero > 0.0 || incoming_one > 0.0 {
                shap_recurse(
                    tree,
                    covers,
                    x,
                    phi,
                    hot,
                    depth + 1,
                    path.clone(),
                    hot_zero,
                    incoming_one,
                    feature,
                );
            }
            let cold_zero = frac(cold) * incoming_zero;
            if cold_zero > 0.0 {
                shap_recurse(
                    tree,
                    covers,
                    x,
                    phi,
                    cold,
                    depth + 1,
                    path,
                    cold_zero,
                    0.0,
                    feature,
                );
            }
        }
    }
}

/// Brute-force Shapley reference: explicit subset enumeration with the same
/// tree-path-dependent expectation. Exponential in the feature count; only
/// for cross-checking small models in tests.
pub mod reference {
    use super::{background_covers, check_dim, Attribution, ExplainError};
    use crate::gbdt::{Model, Node, Tree};

    /// Conditional expectation of one tree given the feature subset `in_set`:
    /// in-set features follow `x`'s routing, out-of-set splits average the
    /// children by background cover.
    fn expvalue(tree: &Tree, covers: &[f64], x: &[f64], in_set: u32, node_idx: usize) -> f64 {
        match &tree.nodes[node_idx] {
            Node::Leaf { weight, .. } => *weight,
            Node::Split { feature, threshold, default_left, left, right, .. } => {
                let f = *feature as usize;
                if in_set & (1 << f) != 0 {
                    let v = x[f];
                    let child = if v.is_nan() {
                        if *default_left { *left } else { *right }
                    } else if v < *threshold {
                        *left
                    } else {
                        *right
                    } as usize;
                    expvalue(tree, covers, x, in_set, child)
                } else {
                    let total = covers[node_idx];
                    let weight = |child: u32| {
                        if total > 0.0 { covers[child as usize] / total } else { 0.0 }
                    };
                    weight(*left) * expvalue(tree, covers, x, in_set, *left as usize)
                        + weight(*right) * expvalue(tree, covers, x, in_set, *right as usize)
                }
            }
        }
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Shapley values by full subset enumeration (2^M model evaluations).
    pub fn brute_force_shap(
        model: &Model,
        x: &[f64],
        background: &[Vec<f64>],
    ) -> Result<Attribution, ExplainError> {
        if background.is_empty() {
            return Err(ExplainError::EmptyBackground);
        }
        check_dim(model, x)?;
        for row in background {
            check_dim(model, row)?;
        }
        let m = model.n_features();
        assert!(m <= 20, "brute force is exponential; use small models only");
        let covers: Vec<Vec<f64>> =
            model.trees.iter().map(|t| background_covers(t, background)).collect();

        let value = |in_set: u32| -> f64 {
            model
                .trees
                .iter()
                .zip(&covers)
                .filter(|(t, _)| !t.is_empty())
                .map(|(t, c)| expvalue(t, c, x, in_set, 0))
                .sum::<f64>()
        };

        let mut phi = vec![0.0; m];
        let m_fact = factorial(m);
        for (i, phi_i) in phi.iter_mut().enumerate() {
            for subset in 0..(1u32 << m) {
                if subset & (1 << i) != 0 {
                    continue;
                }
                let s = subset.count_ones() as usize;
                let coeff = factorial(s) * factorial(m - s - 1) / m_fact;
                *phi_i += coeff * (value(subset | (1 << i)) - value(subset));
            }
        }
        let base_value = model.base_score + value(0);
        Ok(Attribution { phi, base_value, x: x.to_vec() })
    }
}
