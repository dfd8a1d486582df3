//! Shared helpers for the integration suites: an exhaustive Game-of-24
//! expression search (independent of the chain generator), statistical
//! helpers, and label parsing.

#![allow(dead_code)]

use num::{BigInt, BigRational, Zero};
use rmc_core::StateId;

pub fn rational(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Exhaustive expression-tree search: can the multiset be reduced to exactly
/// 24 by repeatedly combining two values with `+ - * /`?
///
/// Works position-by-position over the raw values and never consults the
/// chain generator, so it serves as an independent solvability oracle.
pub fn expression_reaches_24(values: &[BigRational]) -> bool {
    if values.len() == 1 {
        return values[0] == rational(24);
    }
    for i in 0..values.len() {
        for j in 0..values.len() {
            if i == j {
                continue;
            }
            let a = values[i].clone();
            let b = values[j].clone();
            let mut rest: Vec<BigRational> = values
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i && k != j)
                .map(|(_, v)| v.clone())
                .collect();
            let mut candidates = vec![&a + &b, &a - &b, &a * &b];
            if !b.is_zero() {
                candidates.push(&a / &b);
            }
            for result in candidates {
                rest.push(result);
                if expression_reaches_24(&rest) {
                    return true;
                }
                rest.pop();
            }
        }
    }
    false
}

/// Parses a canonical position label ("4 6 12", "3/8 8") back into values.
pub fn parse_label(label: &str) -> Vec<BigRational> {
    label
        .split_whitespace()
        .map(|token| token.parse::<BigRational>().expect("well-formed label"))
        .collect()
}

/// Total-variation distance between an empirical count vector and a
/// probability row over the same support.
pub fn total_variation(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| (c as f64 / total as f64 - p).abs())
        .sum::<f64>()
        / 2.0
}

/// Draws `draws` successors of `x` and tallies them against the stored row
/// order.
pub fn empirical_row(
    chain: &rmc_core::MarkovChain,
    x: StateId,
    draws: u64,
    seed: u64,
) -> (Vec<u64>, Vec<f64>) {
    use rand::SeedableRng;
    let row = chain.successors(x);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; row.len()];
    for _ in 0..draws {
        let y = chain.sample_successor(x, &mut rng);
        let idx = row.iter().position(|&(s, _)| s == y).expect("sample within row");
        counts[idx] += 1;
    }
    (counts, row.iter().map(|&(_, p)| p).collect())
}
