//! Exact brute-force oracle over observed-state subsets.
//!
//! For tiny chains this computes, for every subset `S` of states, the
//! optimal expected number of further generations when the process has
//! already observed exactly the states in `S`. Processing subsets in
//! decreasing cardinality makes each value closed-form:
//!
//! ```text
//! value(S) = min over a in S of
//!            (1 + sum_{g not in S} P(a, g) * value(S + g)) / P(a, outside S)
//! ```
//!
//! with value 0 once the target is in `S`, and infinity for a rewind state
//! that cannot escape `S`. Rewinding repeatedly to the same state until a
//! new one appears costs `1 / P(a, outside S)` generations in expectation,
//! which is where the division comes from; step costs are uniformly 1 and
//! positive, so the self-loop elimination is sound (see the unit test on the
//! 2-state geometric chain).
//!
//! This module is the independent ground truth that the per-state solvers
//! are differential-tested against.

use thiserror::Error;

use crate::chain::{ExtReal, MarkovChain, StateId};

/// Hard cap on the state count: the table has `2^n` entries.
pub const MAX_BRUTE_STATES: usize = 15;

#[derive(Debug, Error)]
pub enum BruteError {
    #[error("chain has {n} states, brute force handles at most {MAX_BRUTE_STATES}")]
    TooLarge { n: usize },
    #[error("chain fails validation ({0} violations)")]
    InvalidChain(usize),
}

/// Exact optimal values indexed by observed-state bitmask.
#[derive(Clone, Debug)]
pub struct SubsetValueTable {
    n: usize,
    values: Vec<f64>,
}

impl SubsetValueTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Value of the subset encoded by `mask` (bit `i` = state `i` observed).
    pub fn value(&self, mask: u32) -> ExtReal {
        ExtReal::from_f64(self.values[mask as usize])
    }

    /// Value of the singleton `{x}`.
    pub fn singleton(&self, x: StateId) -> ExtReal {
        self.value(1 << x.0)
    }
}

/// Computes the full subset table for a chain with at most
/// [`MAX_BRUTE_STATES`] states.
///
/// Subsets are processed in decreasing cardinality, ascending numerically
/// within a cardinality, so every referenced superset is already solved.
pub fn brute_opt_sets(chain: &MarkovChain) -> Result<SubsetValueTable, BruteError> {
    let n = chain.n();
    if n > MAX_BRUTE_STATES {
        return Err(BruteError::TooLarge { n });
    }
    let violations = chain.validate();
    if !violations.is_empty() {
        return Err(BruteError::InvalidChain(violations.len()));
    }

    let target_bit = 1u32 << chain.target().0;
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut values = vec![f64::INFINITY; 1 << n];

    let mut masks_by_size: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    for mask in 0..=full {
        masks_by_size[mask.count_ones() as usize].push(mask);
    }

    for size in (0..=n).rev() {
        for &mask in &masks_by_size[size] {
            if mask & target_bit != 0 {
                values[mask as usize] = 0.0;
                continue;
            }
            let mut best = f64::INFINITY;
            for a in 0..n {
                if mask & (1 << a) == 0 {
                    continue;
                }
                let mut escape = 0.0;
                let mut acc = 0.0;
                for &(StateId(g), p) in chain.successors(StateId(a)) {
                    if mask & (1 << g) == 0 {
                        escape += p;
                        acc += p * values[(mask | (1 << g)) as usize];
                    }
                }
                if escape > 0.0 {
                    let candidate = (1.0 + acc) / escape;
                    if candidate < best {
                        best = candidate;
                    }
                }
            }
            values[mask as usize] = best;
        }
    }

    Ok(SubsetValueTable { n, values })
}

/// Largest deviation from `value(S) = min over x in S of value({x})` across
/// every nonempty subset. Two infinities count as agreement.
pub fn verify_minimizer(table: &SubsetValueTable) -> f64 {
    let full: u32 = (1u32 << table.n) - 1;
    let mut worst: f64 = 0.0;
    for mask in 1..=full {
        let set_value = table.values[mask as usize];
        let mut best = f64::INFINITY;
        let mut bits = mask;
        while bits != 0 {
            let x = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            best = best.min(table.values[(1u32 << x) as usize]);
        }
        let gap = if set_value.is_infinite() && best.is_infinite() {
            0.0
        } else {
            (set_value - best).abs()
        };
        worst = worst.max(gap);
    }
    worst
}
