//! Chain generators: the benchmark families plus random chains for fuzzing.
//!
//! Every generator returns a chain that passes validation with zero
//! violations; tests assert this on top of each family's structural
//! properties.

mod game24;
mod lb_tree;
mod vgb;

pub use game24::{gen_game24, Game24Chain, Game24Options};
pub use lb_tree::{gen_lb_tree, LbTreeObservations, MAX_TREE_STATES};
pub use vgb::{gen_vgb, VgbTables};

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chain::{ChainError, MarkovChain};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("construction would materialize {states} states (limit {limit})")]
    TooLarge { states: u64, limit: u64 },
    #[error("node {node} has an all-zero weight row")]
    ZeroWeightRow { node: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

fn param_err(msg: impl Into<String>) -> GenError {
    GenError::InvalidParam(msg.into())
}

/// Path chain with an absorbing trap: states `x_0, ..., x_n` in a line plus
/// one extra state `D` at index `n + 1`. Each `x_i` with `i < n` advances
/// with probability `p` and falls into `D` otherwise; `x_n` and `D` feed
/// `D` with probability 1. Start is `x_0`, target is `x_n`.
///
/// Rewinding reaches the target in `n / p` expected generations while a
/// single unassisted trajectory succeeds with probability `p^n`.
pub fn gen_dummy(n: usize, p: f64) -> Result<MarkovChain, GenError> {
    if n == 0 {
        return Err(param_err("path length n must be positive"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(param_err(format!("p must be in (0, 1), got {p}")));
    }
    let trap = n + 1;
    let mut edges = Vec::with_capacity(2 * n + 2);
    for i in 0..n {
        edges.push((i, i + 1, p));
        edges.push((i, trap, 1.0 - p));
    }
    edges.push((n, trap, 1.0));
    edges.push((trap, trap, 1.0));
    let chain = MarkovChain::from_edges(n + 2, 0, n, edges)?;
    debug_assert!(chain.is_valid());
    Ok(chain)
}

/// Random sparse chain for fuzzing: every state gets between 1 and roughly
/// `2 * avg_out_degree - 1` distinct successors with random normalized
/// weights. Start is state 0, target is state `n - 1`.
///
/// With `ensure_reachable`, a positive-probability path from start to target
/// is forced by splicing extra edges before normalization, so the target's
/// optimal value from the start is finite.
pub fn gen_random(
    n: usize,
    avg_out_degree: f64,
    seed: u64,
    ensure_reachable: bool,
) -> Result<MarkovChain, GenError> {
    if n < 2 {
        return Err(param_err("random chains need at least 2 states"));
    }
    if !(avg_out_degree >= 1.0) {
        return Err(param_err("avg_out_degree must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_degree = (((2.0 * avg_out_degree).round() as usize).saturating_sub(1)).clamp(1, n);

    // Raw positive weights per row; normalized at the end.
    let mut raw: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for _ in 0..n {
        let degree = rng.gen_range(1..=max_degree);
        let targets = sample_indices(&mut rng, n, degree);
        let row = targets.into_iter().map(|to| (to, rng.gen_range(0.1..1.0))).collect();
        raw.push(row);
    }

    let start = 0usize;
    let target = n - 1;
    if ensure_reachable && !reaches(&raw, start, target) {
        let mut current = start;
        let mut hops = 0;
        while current != target && hops < n {
            let next = if hops + 1 == n || rng.gen_bool(0.5) {
                target
            } else {
                rng.gen_range(0..n)
            };
            if !raw[current].iter().any(|&(to, _)| to == next) {
                raw[current].push((next, 0.5));
            }
            current = next;
            hops += 1;
        }
        if current != target && !raw[current].iter().any(|&(to, _)| to == target) {
            raw[current].push((target, 0.5));
        }
        debug_assert!(reaches(&raw, start, target));
    }

    let mut edges = Vec::new();
    for (from, row) in raw.iter().enumerate() {
        let total: f64 = row.iter().map(|&(_, w)| w).sum();
        for &(to, w) in row {
            edges.push((from, to, w / total));
        }
    }
    let chain = MarkovChain::from_edges(n, start, target, edges)?;
    debug_assert!(chain.is_valid());
    Ok(chain)
}

fn reaches(raw: &[Vec<(usize, f64)>], from: usize, to: usize) -> bool {
    let mut seen = vec![false; raw.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(x) = stack.pop() {
        if x == to {
            return true;
        }
        for &(y, _) in &raw[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    false
}
