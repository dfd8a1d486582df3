//! Experiment runner: a config names a chain (generator parameters or file),
//! a list of policies, a replication count, and a master seed; the runner
//! executes every (policy x replication) cell with derived seeds, writes the
//! per-replication CSV, and prints a per-policy summary.
//!
//! The config speaks the same JSON dialect as chain files and round-trips
//! losslessly. `RMC_SEED` overrides the config seed.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use rmc_core::{
    gen_dummy, gen_game24, gen_lb_tree, gen_random, gen_vgb, Game24Options, MarkovChain, RunStats,
    VgbTables,
};

use crate::runner::{self, PolicyCfg};
use crate::{CliError, CliResult, ExperimentArgs};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub chain: ChainSpec,
    pub policies: Vec<PolicySpec>,
    pub replications: u64,
    pub seed: u64,
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainSpec {
    File { path: PathBuf },
    Dummy { n: usize, p: f64 },
    LbTree { delta: usize, d: usize, eps: f64, seed: u64 },
    Vgb { alphabet: usize, depth: usize, seed: u64 },
    Random { n: usize, avg_out_degree: f64, seed: u64, ensure_reachable: bool },
    Game24 { nums: Vec<i64> },
}

impl ChainSpec {
    fn label(&self) -> String {
        let raw = match self {
            ChainSpec::File { path } => path.display().to_string(),
            ChainSpec::Dummy { n, p } => format!("dummy(n={n};p={p})"),
            ChainSpec::LbTree { delta, d, eps, seed } => {
                format!("lbtree(delta={delta};d={d};eps={eps};seed={seed})")
            }
            ChainSpec::Vgb { alphabet, depth, seed } => {
                format!("vgb(alphabet={alphabet};depth={depth};seed={seed})")
            }
            ChainSpec::Random { n, avg_out_degree, seed, ensure_reachable } => format!(
                "random(n={n};avg={avg_out_degree};seed={seed};reachable={ensure_reachable})"
            ),
            ChainSpec::Game24 { nums } => {
                let nums =
                    nums.iter().map(ToString::to_string).collect::<Vec<_>>().join(";");
                format!("game24({nums})")
            }
        };
        runner::sanitize_label(&raw)
    }

    fn build(&self) -> Result<MarkovChain, CliError> {
        let usage = |e: rmc_core::generators::GenError| CliError::usage(e.to_string());
        match self {
            ChainSpec::File { path } => crate::load_chain(path),
            ChainSpec::Dummy { n, p } => gen_dummy(*n, *p).map_err(usage),
            ChainSpec::LbTree { delta, d, eps, seed } => {
                Ok(gen_lb_tree(*delta, *d, *eps, *seed).map_err(usage)?.0)
            }
            ChainSpec::Vgb { alphabet, depth, seed } => {
                let tables = VgbTables::random(*alphabet, *depth, *seed).map_err(usage)?;
                gen_vgb(&tables, None).map_err(usage)
            }
            ChainSpec::Random { n, avg_out_degree, seed, ensure_reachable } => {
                gen_random(*n, *avg_out_degree, *seed, *ensure_reachable).map_err(usage)
            }
            ChainSpec::Game24 { nums } => {
                Ok(gen_game24(nums, Game24Options::default()).map_err(usage)?.chain)
            }
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_tau() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PolicySpec {
    Cat {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_steps: Option<u64>,
    },
    Aux {
        eps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_steps: Option<u64>,
    },
    Stable {
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_bound: Option<u64>,
        #[serde(default = "default_true")]
        with_reset: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_steps: Option<u64>,
    },
    Softmax {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default = "default_tau")]
        tau: f64,
        #[serde(default)]
        reevaluate: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_steps: Option<u64>,
    },
    Norewind {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_steps: Option<u64>,
    },
    Kparallel {
        k: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_steps: Option<u64>,
    },
}

impl PolicySpec {
    fn resolve(&self) -> (PolicyCfg, Option<u64>) {
        match self {
            PolicySpec::Cat { max_steps } => (PolicyCfg::Cat, *max_steps),
            PolicySpec::Aux { eps, max_steps } => (PolicyCfg::Aux { eps: *eps }, *max_steps),
            PolicySpec::Stable { lambda, n_bound, with_reset, max_steps } => (
                PolicyCfg::Stable {
                    lambda: *lambda,
                    n_bound: *n_bound,
                    with_reset: *with_reset,
                },
                *max_steps,
            ),
            PolicySpec::Softmax { lambda, tau, reevaluate, max_steps } => (
                PolicyCfg::Softmax { lambda: *lambda, tau: *tau, reevaluate: *reevaluate },
                *max_steps,
            ),
            PolicySpec::Norewind { max_steps } => (PolicyCfg::NoRewind, *max_steps),
            PolicySpec::Kparallel { k, max_steps } => {
                (PolicyCfg::KParallel { k: *k }, *max_steps)
            }
        }
    }
}

/// Bundled configurations.
pub fn builtin(name: &str) -> Option<ExperimentConfig> {
    match name {
        // Rewinding vs. single-trajectory exploration on the path chain
        // where the gap is exponential.
        "separation" => Some(ExperimentConfig {
            scenario: "separation".into(),
            chain: ChainSpec::Dummy { n: 12, p: 0.5 },
            policies: vec![
                PolicySpec::Cat { max_steps: None },
                PolicySpec::Norewind { max_steps: Some(10_000) },
                PolicySpec::Kparallel { k: 64, max_steps: Some(10_000) },
            ],
            replications: 100_000,
            seed: 7,
            output: PathBuf::from("separation.csv"),
        }),
        // Mean cost of the noise-robust policy across noise scales; the
        // per-policy mean costs feed a log-log slope estimate.
        "noise-scaling" => Some(ExperimentConfig {
            scenario: "noise-scaling".into(),
            chain: ChainSpec::Dummy { n: 8, p: 0.5 },
            policies: [1.0, 2.0, 4.0, 8.0]
                .into_iter()
                .map(|lambda| PolicySpec::Stable {
                    lambda,
                    n_bound: Some(16),
                    with_reset: true,
                    max_steps: None,
                })
                .collect(),
            replications: 200,
            seed: 7,
            output: PathBuf::from("noise_scaling.csv"),
        }),
        _ => None,
    }
}

#[derive(Serialize)]
struct SummaryRow {
    policy: String,
    replications: u64,
    success_rate: f64,
    mean_steps: f64,
    se_steps: f64,
    mean_oracle_cost: f64,
}

pub fn run(args: ExperimentArgs) -> CliResult {
    let mut config = match (&args.config, &args.scenario) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| CliError::usage(format!("config parse error: {e}")))?
        }
        (None, Some(name)) => builtin(name)
            .ok_or_else(|| CliError::usage(format!("unknown scenario {name:?}")))?,
        (None, None) => {
            return Err(CliError::usage("experiment needs --config or --scenario"))
        }
    };
    if let Some(reps) = args.reps {
        config.replications = reps;
    }
    if let Some(out) = args.out {
        config.output = out;
    }
    if let Ok(text) = std::env::var("RMC_SEED") {
        config.seed = text
            .parse::<u64>()
            .map_err(|e| CliError::usage(format!("RMC_SEED must be a u64: {e}")))?;
    }

    let chain = config.chain.build()?;
    let chain_label = config.chain.label();

    let mut opt = None;
    let mut csv = String::from(runner::CSV_HEADER);
    csv.push('\n');
    let mut summary: Vec<SummaryRow> = Vec::new();
    for spec in &config.policies {
        let (cfg, max_steps) = spec.resolve();
        let prepared = runner::prepare(&chain, cfg, max_steps, &mut opt)?;
        let stats: RunStats = runner::run_block(
            &chain,
            &chain_label,
            opt.as_ref(),
            &prepared,
            config.replications,
            config.seed,
            &mut csv,
        );
        summary.push(SummaryRow {
            policy: prepared.label,
            replications: stats.runs,
            success_rate: stats.success_rate(),
            mean_steps: stats.mean_steps(),
            se_steps: stats.se_steps(),
            mean_oracle_cost: stats.mean_cost(),
        });
    }

    std::fs::write(&config.output, &csv).map_err(|e| {
        CliError::usage(format!("cannot write {}: {e}", config.output.display()))
    })?;

    if args.json {
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::check(format!("summary serialization failed: {e}")))?;
        println!("{text}");
    } else {
        println!("scenario: {} (chain {chain_label}, seed {})", config.scenario, config.seed);
        println!(
            "{:<28} {:>8} {:>10} {:>12} {:>10} {:>14}",
            "policy", "reps", "success", "mean steps", "se", "mean cost"
        );
        for row in &summary {
            println!(
                "{:<28} {:>8} {:>10.4} {:>12.4} {:>10.4} {:>14.1}",
                row.policy,
                row.replications,
                row.success_rate,
                row.mean_steps,
                row.se_steps,
                row.mean_oracle_cost
            );
        }
        println!("per-replication rows written to {}", config.output.display());
    }
    Ok(())
}
