//! Verifier-guided random walk on a token prefix tree.
//!
//! States are the prefixes of length at most `depth` over a finite alphabet.
//! A reference next-token distribution `pi` and a nonnegative per-prefix
//! value table `vb` induce unnormalized weights on each node's tree
//! neighborhood:
//!
//! - toward the parent: `vb[node]` (zero at the root),
//! - toward child `(node, a)`: `pi[node][a] * vb[child]`.
//!
//! Normalizing the weights yields the walk's transition row. Zero-weight
//! edges are omitted from the chain; a node whose entire row is zero is a
//! construction error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{MarkovChain, StateId};

use super::GenError;

/// Materialization guard for the prefix-tree size.
const MAX_VGB_STATES: u64 = 10_000_000;

/// Per-prefix tables driving the walk. Nodes are indexed level by level,
/// root first; children of a node are contiguous in the next level.
#[derive(Clone, Debug, PartialEq)]
pub struct VgbTables {
    alphabet: usize,
    depth: usize,
    /// Next-token distribution per internal node (one row per node of depth
    /// `< depth`, one column per letter).
    pi: Vec<Vec<f64>>,
    /// Nonnegative base value per node, including leaves.
    vb: Vec<f64>,
}

impl VgbTables {
    pub fn new(
        alphabet: usize,
        depth: usize,
        pi: Vec<Vec<f64>>,
        vb: Vec<f64>,
    ) -> Result<Self, GenError> {
        if alphabet == 0 {
            return Err(super::param_err("alphabet must be nonempty"));
        }
        let nodes = node_count(alphabet, depth)?;
        let internal = node_count(alphabet, depth.saturating_sub(1))?;
        let internal = if depth == 0 { 0 } else { internal };
        if vb.len() != nodes {
            return Err(super::param_err(format!(
                "vb covers {} prefixes, tree has {nodes}",
                vb.len()
            )));
        }
        if pi.len() != internal {
            return Err(super::param_err(format!(
                "pi covers {} prefixes, tree has {internal} internal nodes",
                pi.len()
            )));
        }
        if pi.iter().any(|row| row.len() != alphabet) {
            return Err(super::param_err("every pi row must cover the alphabet"));
        }
        if vb.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(super::param_err("vb values must be nonnegative and finite"));
        }
        Ok(VgbTables { alphabet, depth, pi, vb })
    }

    /// Random positive tables: each `pi` row is a normalized random
    /// distribution, each `vb` entry is drawn away from zero.
    pub fn random(alphabet: usize, depth: usize, seed: u64) -> Result<Self, GenError> {
        let nodes = node_count(alphabet, depth)?;
        let internal = if depth == 0 { 0 } else { node_count(alphabet, depth - 1)? };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pi = Vec::with_capacity(internal);
        for _ in 0..internal {
            let raw: Vec<f64> = (0..alphabet).map(|_| rng.gen_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            pi.push(raw.into_iter().map(|w| w / total).collect());
        }
        let vb = (0..nodes).map(|_| rng.gen_range(0.2..1.2)).collect();
        VgbTables::new(alphabet, depth, pi, vb)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn node_count(&self) -> usize {
        self.vb.len()
    }

    pub fn pi(&self) -> &[Vec<f64>] {
        &self.pi
    }

    pub fn vb(&self) -> &[f64] {
        &self.vb
    }

    /// First node id of each level `0..=depth`.
    pub fn level_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.depth + 2);
        let mut total = 0usize;
        let mut size = 1usize;
        for _ in 0..=self.depth {
            offsets.push(total);
            total += size;
            size *= self.alphabet;
        }
        offsets.push(total);
        offsets
    }

    /// Unnormalized neighbor weights of `node`: optional parent entry plus
    /// one entry per child letter.
    pub fn weights(&self, node: usize) -> (Option<(usize, f64)>, Vec<(usize, f64)>) {
        let offsets = self.level_offsets();
        let level = (0..=self.depth).find(|&l| node < offsets[l + 1]).expect("node in range");
        let pos = node - offsets[level];
        let parent = if level == 0 {
            None
        } else {
            Some((offsets[level - 1] + pos / self.alphabet, self.vb[node]))
        };
        let mut children = Vec::new();
        if level < self.depth {
            for a in 0..self.alphabet {
                let child = offsets[level + 1] + pos * self.alphabet + a;
                children.push((child, self.pi[node][a] * self.vb[child]));
            }
        }
        (parent, children)
    }
}

fn node_count(alphabet: usize, depth: usize) -> Result<usize, GenError> {
    let mut total: u64 = 0;
    let mut size: u64 = 1;
    for _ in 0..=depth {
        total += size;
        if total > MAX_VGB_STATES {
            return Err(GenError::TooLarge { states: total, limit: MAX_VGB_STATES });
        }
        size = size.saturating_mul(alphabet as u64);
    }
    Ok(total as usize)
}

/// Builds the walk chain from the tables. The start is the root; the target
/// defaults to the last leaf in index order when not given.
pub fn gen_vgb(tables: &VgbTables, target: Option<StateId>) -> Result<MarkovChain, GenError> {
    let n = tables.node_count();
    let mut edges = Vec::new();
    for node in 0..n {
        let (parent, children) = tables.weights(node);
        let mut total = 0.0;
        if let Some((_, w)) = parent {
            total += w;
        }
        for &(_, w) in &children {
            total += w;
        }
        if !(total > 0.0) {
            return Err(GenError::ZeroWeightRow { node });
        }
        if let Some((p, w)) = parent {
            if w > 0.0 {
                edges.push((node, p, w / total));
            }
        }
        for (child, w) in children {
            if w > 0.0 {
                edges.push((node, child, w / total));
            }
        }
    }
    let target = target.unwrap_or(StateId(n - 1));
    if target.0 >= n {
        return Err(super::param_err(format!("target {target} out of range for {n} nodes")));
    }
    let chain = MarkovChain::from_edges(n, 0, target.0, edges)?;
    debug_assert!(chain.is_valid());
    Ok(chain)
}
