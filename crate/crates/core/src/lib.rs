//! Finite Markov chains with rewinding.
//!
//! A rewinding process walks a finite Markov chain but may resume generation
//! from any previously observed state rather than only the most recent one.
//! This crate provides:
//!
//! - the chain data model with validation, sampling, and JSON file I/O
//!   ([`chain`]),
//! - generators for the benchmark chain families ([`generators`]),
//! - solvers for the per-state optimal expected hitting time, in dense and
//!   heap-accelerated variants ([`solver`]),
//! - exact, Laplace-noisy, and adversarial value oracles with mean-median
//!   boosting and cost accounting ([`oracle`]),
//! - the rewinding policies and no-rewinding baselines, with observed-tree
//!   recording and caterpillar checking ([`policy`]),
//! - an exact subset brute-force oracle for certifying the solvers and the
//!   set-value theory on tiny chains ([`brute`]).

pub mod brute;
pub mod chain;
pub mod generators;
pub mod oracle;
pub mod policy;
pub mod solver;

pub use brute::{brute_opt_sets, verify_minimizer, SubsetValueTable};
pub use chain::{ExtReal, MarkovChain, StateId, Violation};
pub use generators::{
    gen_dummy, gen_game24, gen_lb_tree, gen_random, gen_vgb, Game24Chain, Game24Options,
    LbTreeObservations, VgbTables,
};
pub use oracle::{MeanMedianParams, ValueOracle};
pub use policy::{
    default_max_steps, derive_n_bound, derive_seed, replicate, replicate_stats, run_aux, run_cat,
    run_k_parallel, run_no_rewind, run_softmax_cat, run_stable, ObservedTree, RunRecord, RunStats,
    SoftmaxOptions,
};
pub use solver::{
    compute_aux_opt, compute_opt_dense, compute_opt_heap, recursion_residual, HittingTimeTable,
};
