//! Hitting-time value oracles.
//!
//! Policies that cannot see the chain structure consult an oracle for
//! per-state value estimates. Three behaviors are provided:
//!
//! - `exact`: returns the table value verbatim,
//! - `laplace`: adds independent Laplace(0, lambda) noise per call
//!   (variance `2 lambda^2`),
//! - `adversarial`: returns a fixed, adversarially chosen observation.
//!
//! Every raw evaluation increments the oracle's cost counter by exactly one,
//! so recorded costs are comparable across policies. States with an infinite
//! true value pass infinity through unnoised; the noise model presumes a
//! finite mean, and policies treat infinity as "never preferable".
//!
//! The mean-median estimator batches raw evaluations into groups, averages
//! each group, and takes the median of the group means: with
//! `k = ceil(32 lambda^2 / eps^2)` samples per group and
//! `ceil(log2(1 / delta))` groups, the result lands within `eps` of the true
//! value except with probability at most `delta`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{ExtReal, StateId};
use crate::solver::HittingTimeTable;

/// Parameters of the mean-median estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanMedianParams {
    pub eps: f64,
    pub delta: f64,
    /// Raw evaluations per group.
    pub group_size: u64,
    /// Number of groups; the estimate is the (lower) median of the group
    /// means.
    pub group_count: u64,
}

impl MeanMedianParams {
    /// Derives group size and count from the accuracy target and the noise
    /// scale of the oracle that will be queried.
    ///
    /// The group count uses log base 2: the failure analysis needs
    /// `2^-groups <= delta`, which a natural-log reading would
    /// under-provision.
    pub fn new(eps: f64, delta: f64, lambda: f64) -> Self {
        assert!(eps > 0.0, "eps must be positive");
        assert!(delta > 0.0 && delta < 1.0, "delta must be in (0, 1)");
        assert!(lambda >= 0.0, "lambda must be nonnegative");
        let group_size = ((32.0 * lambda * lambda / (eps * eps)).ceil() as u64).max(1);
        let group_count = ((1.0 / delta).log2().ceil() as u64).max(1);
        MeanMedianParams { eps, delta, group_size, group_count }
    }

    /// Raw evaluations consumed by one estimate.
    pub fn cost(&self) -> u64 {
        self.group_size * self.group_count
    }
}

#[derive(Clone, Debug)]
enum Behavior {
    Exact { table: Arc<[ExtReal]> },
    Laplace { table: Arc<[ExtReal]>, lambda: f64 },
    Adversarial { observations: Arc<[f64]> },
}

/// A stateful evaluator of per-state values with cost accounting.
///
/// One oracle instance serves a single run at a time (the cost counter and
/// rng are mutable); distinct instances run in parallel freely.
#[derive(Clone, Debug)]
pub struct ValueOracle {
    behavior: Behavior,
    rng: ChaCha8Rng,
    cost: u64,
}

impl ValueOracle {
    pub fn exact(table: &HittingTimeTable) -> Self {
        ValueOracle {
            behavior: Behavior::Exact { table: table.values().into() },
            rng: ChaCha8Rng::seed_from_u64(0),
            cost: 0,
        }
    }

    pub fn laplace(table: &HittingTimeTable, lambda: f64, seed: u64) -> Self {
        assert!(lambda >= 0.0, "lambda must be nonnegative");
        ValueOracle {
            behavior: Behavior::Laplace { table: table.values().into(), lambda },
            rng: ChaCha8Rng::seed_from_u64(seed),
            cost: 0,
        }
    }

    /// Oracle returning fixed per-state observations (finite by
    /// construction).
    pub fn adversarial(observations: &[f64]) -> Self {
        ValueOracle {
            behavior: Behavior::Adversarial { observations: observations.into() },
            rng: ChaCha8Rng::seed_from_u64(0),
            cost: 0,
        }
    }

    /// Noise scale of this oracle (zero for exact and adversarial).
    pub fn lambda(&self) -> f64 {
        match &self.behavior {
            Behavior::Laplace { lambda, .. } => *lambda,
            _ => 0.0,
        }
    }

    /// Raw evaluations performed so far.
    pub fn cost(&self) -> u64 {
        self.cost
    }

    /// One raw evaluation of state `s`. Infinite table values pass through
    /// unnoised.
    pub fn evaluate(&mut self, s: StateId) -> f64 {
        self.cost += 1;
        match &self.behavior {
            Behavior::Exact { table } => table[s.0].as_f64(),
            Behavior::Laplace { table, lambda } => match table[s.0] {
                ExtReal::Infinity => f64::INFINITY,
                ExtReal::Finite(v) => v + laplace_sample(&mut self.rng, *lambda),
            },
            Behavior::Adversarial { observations } => observations[s.0],
        }
    }

    /// Mean-median estimate of the value of `s`.
    ///
    /// Always consumes exactly `params.cost()` raw evaluations. With a group
    /// of even length, the lower median is used; any fixed rule preserves
    /// the failure bound.
    pub fn mean_median(&mut self, s: StateId, params: &MeanMedianParams) -> f64 {
        let k = params.group_size;
        self.cost += params.cost();
        let mut means = Vec::with_capacity(params.group_count as usize);
        match &self.behavior {
            Behavior::Exact { table } => {
                // Noiseless means: every group mean is the table value.
                means.resize(params.group_count as usize, table[s.0].as_f64());
            }
            Behavior::Adversarial { observations } => {
                means.resize(params.group_count as usize, observations[s.0]);
            }
            Behavior::Laplace { table, lambda } => match table[s.0] {
                ExtReal::Infinity => {
                    means.resize(params.group_count as usize, f64::INFINITY);
                }
                ExtReal::Finite(v) => {
                    let lambda = *lambda;
                    for _ in 0..params.group_count {
                        let mut sum = 0.0;
                        for _ in 0..k {
                            sum += laplace_sample(&mut self.rng, lambda);
                        }
                        means.push(v + sum / k as f64);
                    }
                }
            },
        }
        means.sort_by(|a, b| a.partial_cmp(b).expect("means are never NaN"));
        means[(means.len() - 1) / 2]
    }
}

/// Draws Laplace(0, lambda) by inverse CDF: with `u` uniform in
/// `(-1/2, 1/2)`, the sample is `-lambda * sign(u) * ln(1 - 2|u|)`.
#[inline]
pub fn laplace_sample(rng: &mut impl Rng, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut v: f64 = rng.gen();
    while v == 0.0 {
        v = rng.gen();
    }
    let u = v - 0.5;
    -lambda * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ExtReal;
    use crate::generators::gen_dummy;
    use crate::solver::compute_opt_heap;

    fn dummy_table() -> (crate::chain::MarkovChain, HittingTimeTable) {
        let chain = gen_dummy(5, 0.5).unwrap();
        let table = compute_opt_heap(&chain).unwrap();
        (chain, table)
    }

    #[test]
    fn zero_scale_noise_is_exact() {
        let (chain, table) = dummy_table();
        let mut oracle = ValueOracle::laplace(&table, 0.0, 9);
        for x in 0..chain.n() {
            let got = oracle.evaluate(StateId(x));
            assert_eq!(got, table.value(StateId(x)).as_f64());
        }
        assert_eq!(oracle.cost(), chain.n() as u64);
    }

    #[test]
    fn laplace_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let lambda = 2.0;
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = laplace_sample(&mut rng, lambda);
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // Standard error of the mean is lambda * sqrt(2 / n).
        let se = lambda * (2.0 / n as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean {mean} vs 3se {}", 3.0 * se);
        let expected_var = 2.0 * lambda * lambda;
        assert!(
            (var - expected_var).abs() <= 0.05 * expected_var,
            "variance {var} vs {expected_var}"
        );
    }

    #[test]
    fn mean_median_params_pin_group_shape() {
        let params = MeanMedianParams::new(0.1, 1.0 / 160.0, 1.0);
        assert_eq!(params.group_size, 3200);
        assert_eq!(params.group_count, 8);
        assert_eq!(params.cost(), 25_600);
    }

    #[test]
    fn mean_median_exact_oracle_ignores_noise_params() {
        let (chain, table) = dummy_table();
        let mut oracle = ValueOracle::exact(&table);
        let params = MeanMedianParams::new(0.5, 0.01, 3.0);
        let got = oracle.mean_median(chain.start(), &params);
        assert_eq!(got, table.value(chain.start()).as_f64());
        assert_eq!(oracle.cost(), params.cost());
    }

    #[test]
    fn infinite_values_pass_through() {
        let (chain, table) = dummy_table();
        let absorber = StateId(chain.n() - 1);
        assert_eq!(table.value(absorber), ExtReal::Infinity);
        let mut oracle = ValueOracle::laplace(&table, 4.0, 11);
        assert_eq!(oracle.evaluate(absorber), f64::INFINITY);
        let params = MeanMedianParams::new(0.1, 0.1, 4.0);
        assert_eq!(oracle.mean_median(absorber, &params), f64::INFINITY);
        assert_eq!(oracle.cost(), 1 + params.cost());
    }

    #[test]
    fn same_seed_same_stream() {
        let (chain, table) = dummy_table();
        let mut a = ValueOracle::laplace(&table, 1.5, 77);
        let mut b = ValueOracle::laplace(&table, 1.5, 77);
        for x in 0..chain.n() {
            assert_eq!(a.evaluate(StateId(x)), b.evaluate(StateId(x)));
        }
    }

    #[test]
    fn adversarial_returns_stored_observation() {
        let observations = vec![4.0, 2.5, 0.0];
        let mut oracle = ValueOracle::adversarial(&observations);
        assert_eq!(oracle.evaluate(StateId(1)), 2.5);
        assert_eq!(oracle.cost(), 1);
    }

    #[test]
    fn adversarial_oracle_is_exact_inside_the_target_subtree() {
        // States under the pivot on the target's branch are observed without
        // error: the oracle returns exactly delta * distance-to-target.
        let (chain, obs) = crate::generators::gen_lb_tree(2, 5, 0.7, 3).unwrap();
        let table = compute_opt_heap(&chain).unwrap();
        let mut oracle = ValueOracle::adversarial(&obs.values);
        let pivot_depth = (0.7 * 5.0_f64).floor() as usize;
        for &node in &obs.path[pivot_depth..] {
            assert_eq!(oracle.evaluate(node), table.value(node).as_f64());
        }
        assert_eq!(oracle.cost(), (obs.path.len() - pivot_depth) as u64);
    }
}
