//! Second-order boosting with exact greedy split finding.
//!
//! Gradients for the weighted logistic loss are `g = w (p - y)` and
//! `h = w p (1 - p)` with `w = scale_pos_weight` for positives. Leaf weights
//! are `-G / (H + lambda)`; split gain is
//! `0.5 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma`. Candidate
//! thresholds are midpoints between consecutive distinct present values, and
//! missing rows route to whichever child yields more gain (the learned
//! default direction). Ties break to the lowest feature index, lowest
//! threshold, missing-left — the scan order makes "first strict improvement
//! wins" implement exactly that.

use super::tree::{Node, Tree};
use super::{sigmoid, Dataset, GbdtError, Model, ModelMetadata, TrainConfig};

/// A trained model plus per-round training curves.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: Model,
    /// Weighted mean logistic loss on the training set after each round.
    pub train_loss: Vec<f64>,
    /// ROC AUC on the validation set after each round; empty when the
    /// validation set is empty or single-class.
    pub valid_auc: Vec<f64>,
}

/// `f0`, `f1`, ... names for ad-hoc matrices.
pub fn default_feature_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

const NO_SLOT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitCandidate {
    pub gain: f64,
    pub feature: u32,
    pub threshold: f64,
    pub default_left: bool,
    pub left_g: f64,
    pub left_h: f64,
    pub right_g: f64,
    pub right_h: f64,
}

/// Train an ensemble on `train_set`, recording validation AUC per round.
pub fn train(
    train_set: &Dataset,
    valid_set: &Dataset,
    config: &TrainConfig,
    feature_names: &[String],
    metadata: ModelMetadata,
) -> Result<TrainResult, GbdtError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(GbdtError::EmptyDataset);
    }
    assert_eq!(feature_names.len(), train_set.n_features, "feature name count");
    train_set.check_finite()?;
    valid_set.check_finite()?;

    let n = train_set.n_rows();
    let n_pos = train_set.labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == n {
        return Err(GbdtError::SingleClass);
    }
    let w_pos = config.scale_pos_weight;
    let base_score = (w_pos * n_pos as f64 / (n - n_pos) as f64).ln();

    // Rows sorted ascending per feature, missing excluded. Ties keep row
    // order so the scan is fully deterministic.
    let sorted: Vec<Vec<u32>> = (0..train_set.n_features)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32)
                .filter(|&r| !train_set.value(r as usize, f).is_nan())
                .collect();
            idx.sort_by(|&a, &b| {
                train_set
                    .value(a as usize, f)
                    .total_cmp(&train_set.value(b as usize, f))
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();

    let weights: Vec<f64> =
        train_set.labels.iter().map(|&y| if y == 1 { w_pos } else { 1.0 }).collect();
    let mut margins = vec![base_score; n];
    let mut valid_margins = vec![base_score; valid_set.n_rows()];
    let valid_scoreable = {
        let pos = valid_set.labels.iter().filter(|&&y| y == 1).count();
        pos > 0 && pos < valid_set.n_rows()
    };

    let mut trees = Vec::with_capacity(config.n_trees as usize);
    let mut train_loss = Vec::with_capacity(config.n_trees as usize);
    let mut valid_auc = Vec::new();
    let mut grad = vec![0.0f64; n];
    let mut hess = vec![0.0f64; n];

    for _round in 0..config.n_trees {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            let y = f64::from(train_set.labels[i]);
            grad[i] = weights[i] * (p - y);
            hess[i] = weights[i] * p * (1.0 - p);
        }

        let tree = grow_tree(train_set, &sorted, &grad, &hess, config);
        for i in 0..n {
            margins[i] += tree.predict_leaf(train_set.row(i)).weight;
        }
        for (i, m) in valid_margins.iter_mut().enumerate() {
            *m += tree.predict_leaf(valid_set.row(i)).weight;
        }
        trees.push(tree);

        train_loss.push(weighted_logloss(&margins, &train_set.labels, &weights));
        if valid_scoreable {
            valid_auc.push(super::auc(&valid_margins, &valid_set.labels).expect("both classes"));
        }
    }

    Ok(TrainResult {
        model: Model {
            trees,
            base_score,
            feature_names: feature_names.to_vec(),
            config: config.clone(),
            metadata,
        },
        train_loss,
        valid_auc,
    })
}

fn weighted_logloss(margins: &[f64], labels: &[u8], weights: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..margins.len() {
        let m = margins[i];
        // ln(1 + e^x) computed stably.
        let softplus = |x: f64| x.max(0.0) + (-x.abs()).exp().ln_1p();
        let loss = if labels[i] == 1 { softplus(-m) } else { softplus(m) };
        num += weights[i] * loss;
        den += weights[i];
    }
    num / den
}

struct LevelNode {
    arena_idx: usize,
    g: f64,
    h: f64,
    depth: u32,
}

fn grow_tree(
    data: &Dataset,
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    config: &TrainConfig,
) -> Tree {
    let n = data.n_rows();
    let root_g: f64 = grad.iter().sum();
    let root_h: f64 = hess.iter().sum();

    // Arena with placeholders filled in as levels materialize.
    let mut arena: Vec<Option<Node>> = vec![None];
    let mut level = vec![LevelNode { arena_idx: 0, g: root_g, h: root_h, depth: 0 }];
    let mut slot_of_row = vec![0u32; n];

    while !level.is_empty() {
        let best = find_best_splits(data, sorted, grad, hess, &level, &slot_of_row, config);

        // Materialize: leaves stay leaves; split nodes gain children that form
        // the next level.
        let mut next_level: Vec<LevelNode> = Vec::new();
        let mut routing: Vec<Option<(u32, f64, bool, u32, u32)>> = vec![None; level.len()];
        for (slot, node) in level.iter().enumerate() {
            match best[slot] {
                Some(c) if node.depth < config.max_depth => {
                    let left_idx = arena.len();
                    let right_idx = arena.len() + 1;
                    arena.push(None);
                    arena.push(None);
                    arena[node.arena_idx] = Some(Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        default_left: c.default_left,
                        left: left_idx as u32,
                        right: right_idx as u32,
                        cover: node.h,
                    });
                    let left_slot = next_level.len() as u32;
                    next_level.push(LevelNode {
                        arena_idx: left_idx,
                        g: c.left_g,
                        h: c.left_h,
                        depth: node.depth + 1,
                    });
                    next_level.push(LevelNode {
                        arena_idx: right_idx,
                        g: c.right_g,
                        h: c.right_h,
                        depth: node.depth + 1,
                    });
                    routing[slot] =
                        Some((c.feature, c.threshold, c.default_left, left_slot, left_slot + 1));
                }
                _ => {
                    let weight =
                        -node.g / (node.h + config.l2_lambda) * config.learning_rate;
                    arena[node.arena_idx] = Some(Node::Leaf { weight, cover: node.h });
                }
            }
        }

        for r in 0..n {
            let slot = slot_of_row[r];
            if slot == NO_SLOT {
                continue;
            }
            slot_of_row[r] = match routing[slot as usize] {
                None => NO_SLOT,
                Some((feature, threshold, default_left, left_slot, right_slot)) => {
                    let v = data.value(r, feature as usize);
                    if v.is_nan() {
                        if default_left { left_slot } else { right_slot }
                    } else if v < threshold {
                        left_slot
                    } else {
                        right_slot
                    }
                }
            };
        }
        level = next_level;
    }

    Tree { nodes: arena.into_iter().map(|n| n.expect("node materialized")).collect() }
}

/// Best admissible split for every node of the current level, or None where
/// nothing clears the gain floor.
fn find_best_splits(
    data: &Dataset,
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    level: &[LevelNode],
    slot_of_row: &[u32],
    config: &TrainConfig,
) -> Vec<Option<SplitCandidate>> {
    let k = level.len();
    let mut best: Vec<Option<SplitCandidate>> = vec![None; k];
    let lambda = config.l2_lambda;
    let parent_term: Vec<f64> =
        level.iter().map(|nd| nd.g * nd.g / (nd.h + lambda)).collect();

    let mut present_g = vec![0.0f64; k];
    let mut present_h = vec![0.0f64; k];
    let mut acc_g = vec![0.0f64; k];
    let mut acc_h = vec![0.0f64; k];
    let mut count = vec![0usize; k];
    let mut last_val = vec![0.0f64; k];

    for f in 0..data.n_features {
        present_g.iter_mut().for_each(|v| *v = 0.0);
        present_h.iter_mut().for_each(|v| *v = 0.0);
        for &r in &sorted[f] {
            let slot = slot_of_row[r as usize];
            if slot == NO_SLOT {
                continue;
            }
            present_g[slot as usize] += grad[r as usize];
            present_h[slot as usize] += hess[r as usize];
        }

        acc_g.iter_mut().for_each(|v| *v = 0.0);
        acc_h.iter_mut().for_each(|v| *v = 0.0);
        count.iter_mut().for_each(|v| *v = 0);
        for &r in &sorted[f] {
            let r = r as usize;
            let slot = slot_of_row[r];
            if slot == NO_SLOT {
                continue;
            }
            let s = slot as usize;
            let v = data.value(r, f);
            if count[s] > 0 && v > last_val[s] {
                let threshold = 0.5 * (last_val[s] + v);
                // Midpoints that collapse onto a neighbor cannot separate the
                // two values and are not candidates.
                if threshold > last_val[s] && threshold <= v {
                    let node = &level[s];
                    let miss_g = node.g - present_g[s];
                    let miss_h = node.h - present_h[s];
                    for default_left in [true, false] {
                        let (lg, lh) = if default_left {
                            (acc_g[s] + miss_g, acc_h[s] + miss_h)
                        } else {
                            (acc_g[s], acc_h[s])
                        };
                        let (rg, rh) = (node.g - lg, node.h - lh);
                        if lh < config.min_child_weight || rh < config.min_child_weight {
                            continue;
                        }
                        let gain = 0.5
                            * (lg * lg / (lh + lambda) + rg * rg / (rh + lambda)
                                - parent_term[s])
                            - config.gamma;
                        if gain <= 0.0 {
                            continue;
                        }
                        let better = match best[s] {
                            None => true,
                            Some(b) => gain > b.gain,
                        };
                        if better {
                            best[s] = Some(SplitCandidate {
                                gain,
                                feature: f as u32,
                                threshold,
                                default_left,
                                left_g: lg,
                                left_h: lh,
                                right_g: rg,
                                right_h: rh,
                            });
                        }
                    }
                }
            }
            acc_g[s] += grad[r];
            acc_h[s] += hess[r];
            count[s] += 1;
            last_val[s] = v;
        }
    }
    best
}

/// Root-split search exposed for oracle comparison in tests: returns the
/// split the first tree's root would take for the given gradients.
pub fn root_split_for_test(
    data: &Dataset,
    grad: &[f64],
    hess: &[f64],
    config: &TrainConfig,
) -> Option<(u32, f64, bool)> {
    let n = data.n_rows();
    let sorted: Vec<Vec<u32>> = (0..data.n_features)
        .map(|f| {
            let mut idx: Vec<u32> =
                (0..n as u32).filter(|&r| !data.value(r as usize, f).is_nan()).collect();
            idx.sort_by(|&a, &b| {
                data.value(a as usize, f)
                    .total_cmp(&data.value(b as usize, f))
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();
    let level = vec![LevelNode {
        arena_idx: 0,
        g: grad.iter().sum(),
        h: hess.iter().sum(),
        depth: 0,
    }];
    let slot_of_row = vec![0u32; n];
    find_best_splits(data, &sorted, grad, hess, &level, &slot_of_row, config)[0]
        .map(|c| (c.feature, c.threshold, c.default_left))
}

/// Initial gradients/hessians at the model's base score, for oracle tests.
pub fn initial_gradients(labels: &[u8], scale_pos_weight: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let base = (scale_pos_weight * n_pos as f64 / (labels.len() - n_pos) as f64).ln();
    let p = sigmoid(base);
    let g = labels
        .iter()
        .map(|&y| if y == 1 { scale_pos_weight * (p - 1.0) } else { p })
        .collect();
    let h = labels
        .iter()
        .map(|&y| if y == 1 { scale_pos_weight } else { 1.0 } * p * (1.0 - p))
        .collect();
    (g, h, base)
}
