//! Policy execution shared by `simulate` and `experiment`: resolves a policy
//! configuration against a chain, runs seeded replications in parallel, and
//! renders the per-replication CSV.
//!
//! Rows are produced in replication order and all aggregates use integer
//! accumulators, so outputs never depend on the worker count.

use rayon::prelude::*;

use rmc_core::{
    compute_opt_heap, default_max_steps, derive_n_bound, derive_seed, run_aux, run_cat,
    run_k_parallel, run_no_rewind, run_softmax_cat, run_stable, HittingTimeTable, MarkovChain,
    RunRecord, RunStats, SoftmaxOptions, ValueOracle,
};

use crate::{CliError, CliResult, SimulateArgs};

pub const CSV_HEADER: &str = "run_id,policy,chain,seed,steps,oracle_cost,success,caterpillar";

/// A fully resolved policy: everything needed to run one replication.
#[derive(Clone, Debug)]
pub enum PolicyCfg {
    Cat,
    Aux { eps: f64 },
    Stable { lambda: f64, n_bound: Option<u64>, with_reset: bool },
    Softmax { lambda: Option<f64>, tau: f64, reevaluate: bool },
    NoRewind,
    KParallel { k: u64 },
}

impl PolicyCfg {
    /// Compact comma-free label used in the CSV policy column.
    pub fn label(&self) -> String {
        match self {
            PolicyCfg::Cat => "cat".into(),
            PolicyCfg::Aux { eps } => format!("aux(eps={eps})"),
            PolicyCfg::Stable { lambda, .. } => format!("stable(lambda={lambda})"),
            PolicyCfg::Softmax { lambda, tau, .. } => match lambda {
                Some(l) => format!("softmax(lambda={l};tau={tau})"),
                None => format!("softmax(tau={tau})"),
            },
            PolicyCfg::NoRewind => "norewind".into(),
            PolicyCfg::KParallel { k } => format!("kparallel(k={k})"),
        }
    }

    fn needs_table(&self) -> bool {
        !matches!(self, PolicyCfg::NoRewind | PolicyCfg::KParallel { .. })
    }
}

/// Runs one replication. Oracle-backed policies derive their oracle seed
/// from the replication seed so the whole row is a function of
/// (chain, policy, seed).
pub fn run_replication(
    chain: &MarkovChain,
    opt: Option<&HittingTimeTable>,
    cfg: &PolicyCfg,
    rep_seed: u64,
    max_steps: u64,
) -> RunRecord {
    match cfg {
        PolicyCfg::Cat => run_cat(chain, opt.expect("table prepared"), rep_seed, max_steps),
        PolicyCfg::Aux { eps } => {
            run_aux(chain, opt.expect("table prepared"), *eps, rep_seed, max_steps)
        }
        PolicyCfg::Stable { lambda, n_bound, with_reset } => {
            let table = opt.expect("table prepared");
            let mut oracle = ValueOracle::laplace(table, *lambda, derive_seed(rep_seed, 1));
            let n_bound = n_bound.unwrap_or_else(|| derive_n_bound(&mut oracle, chain.start()));
            run_stable(chain, &mut oracle, n_bound, rep_seed, *with_reset, Some(max_steps))
        }
        PolicyCfg::Softmax { lambda, tau, reevaluate } => {
            let table = opt.expect("table prepared");
            let mut oracle = match lambda {
                Some(l) if *l > 0.0 => ValueOracle::laplace(table, *l, derive_seed(rep_seed, 1)),
                _ => ValueOracle::exact(table),
            };
            let options = SoftmaxOptions { tau: *tau, reevaluate: *reevaluate };
            run_softmax_cat(chain, &mut oracle, &options, rep_seed, max_steps)
        }
        PolicyCfg::NoRewind => run_no_rewind(chain, rep_seed, max_steps),
        PolicyCfg::KParallel { k } => run_k_parallel(chain, *k, rep_seed, max_steps),
    }
}

/// Everything `simulate` and `experiment` need to run a policy block.
pub struct PreparedPolicy {
    pub cfg: PolicyCfg,
    pub label: String,
    pub max_steps: u64,
}

pub fn prepare(
    chain: &MarkovChain,
    cfg: PolicyCfg,
    max_steps_override: Option<u64>,
    opt: &mut Option<HittingTimeTable>,
) -> Result<PreparedPolicy, CliError> {
    if (cfg.needs_table() || max_steps_override.is_none()) && opt.is_none() {
        let table =
            compute_opt_heap(chain).map_err(|e| CliError::usage(format!("solver: {e}")))?;
        *opt = Some(table);
    }
    let max_steps = match max_steps_override {
        Some(value) => value,
        None => {
            let table = opt.as_ref().expect("table computed above");
            default_max_steps(table.value(chain.start()))
        }
    };
    let label = cfg.label();
    Ok(PreparedPolicy { cfg, label, max_steps })
}

/// Runs a policy block and appends CSV rows (in replication order) plus the
/// aggregate stats. Replications are processed in parallel batches to bound
/// memory on large runs.
pub fn run_block(
    chain: &MarkovChain,
    chain_label: &str,
    opt: Option<&HittingTimeTable>,
    policy: &PreparedPolicy,
    reps: u64,
    master_seed: u64,
    csv: &mut String,
) -> RunStats {
    const BATCH: u64 = 8192;
    let mut stats = RunStats::default();
    let mut start = 0u64;
    while start < reps {
        let end = (start + BATCH).min(reps);
        let batch: Vec<(String, RunStats)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let rep_seed = derive_seed(master_seed, i);
                let record =
                    run_replication(chain, opt, &policy.cfg, rep_seed, policy.max_steps);
                let mut one = RunStats::default();
                one.add(&record);
                let row = format!(
                    "{i},{},{chain_label},{rep_seed},{},{},{},{}\n",
                    policy.label,
                    record.steps,
                    record.oracle_cost,
                    record.success,
                    record.tree.is_caterpillar(),
                );
                (row, one)
            })
            .collect();
        for (row, one) in batch {
            csv.push_str(&row);
            stats = stats.merge(one);
        }
        start = end;
    }
    stats
}

/// Strips CSV-hostile characters from a label.
pub fn sanitize_label(label: &str) -> String {
    label.replace([',', '\n', '\r'], ";")
}

pub fn simulate(args: SimulateArgs) -> CliResult {
    let chain = crate::load_chain(&args.chain)?;
    let cfg = policy_from_flags(&args)?;
    let mut opt = None;
    let prepared = prepare(&chain, cfg, args.max_steps, &mut opt)?;
    let label = sanitize_label(&args.chain.display().to_string());

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    run_block(&chain, &label, opt.as_ref(), &prepared, args.reps, args.seed, &mut csv);
    crate::emit(csv, args.out.as_ref())
}

fn policy_from_flags(args: &SimulateArgs) -> Result<PolicyCfg, CliError> {
    let cfg = match args.policy.as_str() {
        "cat" => PolicyCfg::Cat,
        "aux" => {
            let eps = args
                .eps
                .ok_or_else(|| CliError::usage("policy aux requires --eps"))?;
            if eps <= 0.0 {
                return Err(CliError::usage("--eps must be positive"));
            }
            PolicyCfg::Aux { eps }
        }
        "stable" => PolicyCfg::Stable {
            lambda: args.lambda.unwrap_or(0.0),
            n_bound: args.nbound,
            with_reset: !args.no_reset,
        },
        "softmax" => PolicyCfg::Softmax {
            lambda: args.lambda,
            tau: args.tau.unwrap_or(1.0),
            reevaluate: args.reevaluate,
        },
        "norewind" => PolicyCfg::NoRewind,
        "kparallel" => PolicyCfg::KParallel { k: args.k.unwrap_or(1) },
        other => return Err(CliError::usage(format!("unknown policy {other}"))),
    };
    if let PolicyCfg::Stable { lambda, .. } = &cfg {
        if *lambda < 0.0 {
            return Err(CliError::usage("--lambda must be nonnegative"));
        }
    }
    if let PolicyCfg::Softmax { tau, .. } = &cfg {
        if *tau <= 0.0 {
            return Err(CliError::usage("--tau must be positive"));
        }
    }
    Ok(cfg)
}
