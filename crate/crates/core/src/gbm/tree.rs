use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node<T> {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf { value: T },
}

/// Binary regression tree stored as a flat node array, root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> RegressionTree<T> {
    pub fn leaf(value: T) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn predict(&self, row: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Depth counted in split levels (a single leaf has depth 0).
    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Structural checks used after deserialisation: children in range and
    /// every non-root node referenced exactly once.
    pub(crate) fn is_well_formed(&self, width: usize) -> bool {
        let mut seen = vec![0u32; self.nodes.len()];
        for n in &self.nodes {
            if let Node::Split { feature, left, right, threshold } = n {
                if *feature >= width || !threshold.is_finite() {
                    return false;
                }
                for &c in [left, right] {
                    if c == 0 || c >= self.nodes.len() {
                        return false;
                    }
                    seen[c] += 1;
                }
            } else if let Node::Leaf { value } = n {
                if !value.is_finite() {
                    return false;
                }
            }
        }
        !self.nodes.is_empty() && seen.iter().skip(1).all(|&c| c == 1)
    }
}

/// Best split found for one node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitChoice<T> {
    pub feature: usize,
    pub threshold: T,
    pub gain: T,
}

/// Exact greedy search over midpoints of consecutive distinct values.
///
/// `sorted[f]` lists the node's rows ordered by feature `f`. Gain is the SSE
/// reduction `SL²/nL + SR²/nR - S²/n`. Ties keep the earlier candidate, so
/// the lowest feature index and then the lowest threshold win.
pub(crate) fn best_split<T: Real>(
    x: &[T],
    width: usize,
    residual: &[T],
    sorted: &[Vec<usize>],
    min_leaf: usize,
) -> Option<SplitChoice<T>> {
    let rows = &sorted[0];
    let n = rows.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: T = rows.iter().map(|&r| residual[r]).sum();
    let parent = total * total / T::of(n as f64);
    let mut best: Option<SplitChoice<T>> = None;
    for (f, order) in sorted.iter().enumerate() {
        let mut left = T::zero();
        for i in 0..n - 1 {
            let r = order[i];
            left += residual[r];
            let nl = i + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let a = x[r * width + f];
            let b = x[order[i + 1] * width + f];
            if !(a < b) {
                continue;
            }
            let right = total - left;
            let gain = left * left / T::of(nl as f64) + right * right / T::of(nr as f64) - parent;
            if gain > T::zero() && best.is_none_or(|s| gain > s.gain) {
                let mid = (a + b) / T::of(2.0);
                // adjacent floats: the midpoint may round up onto b
                let threshold = if mid < b { mid } else { a };
                best = Some(SplitChoice {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

pub(crate) struct TreeBuilder<'a, T> {
    pub x: &'a [T],
    pub width: usize,
    pub residual: &'a [T],
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl<T: Real> TreeBuilder<'_, T> {
    /// Grows a tree from per-feature presorted row lists.
    pub fn build(&self, sorted: Vec<Vec<usize>>) -> RegressionTree<T> {
        let mut nodes = Vec::new();
        self.grow(&mut nodes, sorted, 0);
        RegressionTree { nodes }
    }

    fn grow(&self, nodes: &mut Vec<Node<T>>, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let id = nodes.len();
        let split = if depth < self.max_depth {
            best_split(self.x, self.width, self.residual, &sorted, self.min_leaf)
        } else {
            None
        };
        let Some(split) = split else {
            let rows = &sorted[0];
            let sum: T = rows.iter().map(|&r| self.residual[r]).sum();
            nodes.push(Node::Leaf {
                value: sum / T::of(rows.len() as f64),
            });
            return id;
        };
        nodes.push(Node::Leaf { value: T::zero() });
        let goes_left =
            |r: usize| self.x[r * self.width + split.feature] <= split.threshold;
        let (mut ls, mut rs) = (Vec::with_capacity(self.width), Vec::with_capacity(self.width));
        for order in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&r| goes_left(r));
            ls.push(l);
            rs.push(r);
        }
        let left = self.grow(nodes, ls, depth + 1);
        let right = self.grow(nodes, rs, depth + 1);
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Row indices sorted by each feature (ties by row index).
pub(crate) fn presort<T: Real>(x: &[T], width: usize, n: usize) -> Vec<Vec<usize>> {
    (0..width)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                x[a * width + f]
                    .partial_cmp(&x[b * width + f])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect()
}
