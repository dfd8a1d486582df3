//! Regular-tree chain with adversarially perturbed per-state observations.
//!
//! The chain is a random walk on a degree-regular tree: the root has
//! `delta` children, every other internal node has `delta - 1` children, and
//! leaves sit at depth `10 * d`. Non-leaf states move to a uniform tree
//! neighbor; a leaf returns to its parent with probability `1 / delta` and
//! stays put otherwise. One leaf, chosen uniformly by the seed, is the
//! target, and the optimal hitting time from any state is
//! `delta * dist(state, target)`.
//!
//! The observation table reports values that are individually within a
//! multiplicative `(1 +- eps)` band of the true optimum yet collectively
//! reveal nothing about which shallow subtree hides the target, which is
//! what makes the family a hard case for observation-guided policies.

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{MarkovChain, StateId};

use super::GenError;

/// Materialization guard for the tree size.
pub const MAX_TREE_STATES: u64 = 10_000_000;

/// Per-state observations for the adversarial tree, plus the root-to-target
/// path they are derived from.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LbTreeObservations {
    pub eps: f64,
    /// Observed value per state; within `(1 +- eps)` of the true optimum.
    pub values: Vec<f64>,
    /// Depth of each state in the tree.
    pub depths: Vec<usize>,
    /// The path from the root to the target leaf, in order.
    pub path: Vec<StateId>,
}

struct TreeShape {
    delta: usize,
    depth: usize,
    /// First node id of each level.
    offsets: Vec<usize>,
}

impl TreeShape {
    fn new(delta: usize, depth: usize) -> Result<Self, GenError> {
        let mut offsets = Vec::with_capacity(depth + 2);
        let mut total: u64 = 0;
        let mut level_size: u64 = 1;
        for level in 0..=depth {
            offsets.push(total as usize);
            total += level_size;
            if total > MAX_TREE_STATES {
                return Err(GenError::TooLarge { states: total, limit: MAX_TREE_STATES });
            }
            let arity = if level == 0 { delta as u64 } else { delta as u64 - 1 };
            level_size = level_size.saturating_mul(arity);
        }
        offsets.push(total as usize);
        Ok(TreeShape { delta, depth, offsets })
    }

    fn n(&self) -> usize {
        self.offsets[self.depth + 1]
    }

    fn arity(&self, level: usize) -> usize {
        if level == 0 {
            self.delta
        } else {
            self.delta - 1
        }
    }

    fn parent(&self, node: usize, level: usize) -> usize {
        let pos = node - self.offsets[level];
        self.offsets[level - 1] + pos / self.arity(level - 1)
    }

    fn children(&self, node: usize, level: usize) -> std::ops::Range<usize> {
        let pos = node - self.offsets[level];
        let arity = self.arity(level);
        let first = self.offsets[level + 1] + pos * arity;
        first..first + arity
    }
}

/// Builds the adversarial tree chain together with its observations.
///
/// `delta >= 2` is the regular degree, the tree has depth `10 * d`, and
/// `eps` in `(0, 1)` controls how far the observations may stray. The target
/// leaf is chosen uniformly from the bottom level using `target_leaf_seed`.
pub fn gen_lb_tree(
    delta: usize,
    d: usize,
    eps: f64,
    target_leaf_seed: u64,
) -> Result<(MarkovChain, LbTreeObservations), GenError> {
    if delta < 2 {
        return Err(super::param_err("delta must be at least 2"));
    }
    if d == 0 {
        return Err(super::param_err("d must be positive"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(super::param_err(format!("eps must be in (0, 1), got {eps}")));
    }

    let depth = 10 * d;
    let shape = TreeShape::new(delta, depth)?;
    let n = shape.n();
    let p = 1.0 / delta as f64;

    let mut edges = Vec::with_capacity(2 * n);
    for level in 0..=depth {
        for node in shape.offsets[level]..shape.offsets[level + 1] {
            if level < depth {
                for child in shape.children(node, level) {
                    edges.push((node, child, p));
                }
                if level > 0 {
                    edges.push((node, shape.parent(node, level), p));
                }
            } else {
                edges.push((node, shape.parent(node, level), p));
                edges.push((node, node, 1.0 - p));
            }
        }
    }

    let leaves = shape.offsets[depth]..shape.offsets[depth + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(target_leaf_seed);
    let target = rng.gen_range(leaves.start..leaves.end);
    let chain = MarkovChain::from_edges(n, 0, target, edges)?;
    debug_assert!(chain.is_valid());

    // Root-to-target path.
    let mut path_rev = Vec::with_capacity(depth + 1);
    let mut node = target;
    for level in (0..=depth).rev() {
        path_rev.push(node);
        if level > 0 {
            node = shape.parent(node, level);
        }
    }
    let path: Vec<usize> = path_rev.into_iter().rev().collect();
    let mut on_path = vec![false; n];
    for &x in &path {
        on_path[x] = true;
    }

    // Depth eps*d is where knowledge of the target's branch starts to
    // matter; observations below it either tell the exact truth (inside the
    // target's subtree) or pretend the state branched off right there.
    let pivot_depth = (eps * d as f64).floor() as usize;

    let scale = delta as f64;
    let horizon = depth as f64;
    let mut values = vec![0.0; n];
    let mut depths = vec![0usize; n];
    for level in 0..=depth {
        for node in shape.offsets[level]..shape.offsets[level + 1] {
            depths[node] = level;
            values[node] = if level <= pivot_depth {
                scale * (horizon - level as f64)
            } else {
                // Climb to the ancestor at the pivot depth; equality with
                // the pivot node decides the subtree membership, and the
                // deepest on-path ancestor gives the exact distance.
                let mut ancestor = node;
                let mut ancestor_level = level;
                let mut branch_depth = None;
                while ancestor_level > 0 {
                    if on_path[ancestor] {
                        branch_depth = Some(ancestor_level);
                        break;
                    }
                    ancestor = shape.parent(ancestor, ancestor_level);
                    ancestor_level -= 1;
                }
                let branch_depth = branch_depth.unwrap_or(0);
                // The deepest on-path ancestor is at the pivot or below
                // exactly when the node lives in the pivot's subtree.
                if branch_depth >= pivot_depth {
                    let dist = (level - branch_depth) + (depth - branch_depth);
                    scale * dist as f64
                } else {
                    scale * (horizon - 2.0 * pivot_depth as f64 + level as f64)
                }
            };
        }
    }

    let observations = LbTreeObservations {
        eps,
        values,
        depths,
        path: path.into_iter().map(StateId).collect(),
    };
    Ok((chain, observations))
}
