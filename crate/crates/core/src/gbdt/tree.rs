//! Regression tree structure shared by training, inference, serialization
//! and SHAP attribution.

use serde::{Deserialize, Serialize};

/// One tree node. Nodes live in a flat arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: u32,
        /// Present values with `value < threshold` go left, the rest right.
        threshold: f64,
        /// Where missing (NaN) values route.
        default_left: bool,
        left: u32,
        right: u32,
        /// Training hessian sum reaching this node (cover).
        cover: f64,
    },
    Leaf {
        /// Learning-rate-scaled leaf weight, summed into the margin.
        weight: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// A resolved prediction: the leaf a row routes to.
pub struct LeafHit {
    pub node_index: usize,
    pub weight: f64,
}

impl Tree {
    /// Single-leaf tree (used when no split clears the gain floor).
    pub fn leaf(weight: f64, cover: f64) -> Self {
        Tree { nodes: vec![Node::Leaf { weight, cover }] }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Route a dense row (NaN = missing) to its leaf.
    pub fn predict_leaf(&self, row: &[f64]) -> LeafHit {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { weight, .. } => {
                    return LeafHit { node_index: idx, weight: *weight }
                }
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

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    /// Feature indices used by any split in this tree.
    pub fn used_features(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}
