//! `rmc`: generate, solve, simulate, and verify finite Markov chains with
//! rewinding.
//!
//! Exit codes: 0 on success, 1 when a verification check or internal
//! invariant fails, 2 on usage or parse errors.

mod experiment;
mod runner;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rmc_core::{
    gen_dummy, gen_game24, gen_lb_tree, gen_random, gen_vgb, Game24Options, MarkovChain, StateId,
    VgbTables,
};

/// Failure modes that map onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable files, malformed configs: exit 2.
    Usage(String),
    /// A verification check or internal invariant failed: exit 1.
    Check(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn check(msg: impl Into<String>) -> Self {
        CliError::Check(msg.into())
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(name = "rmc", about = "Finite Markov chains with rewinding", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a chain file from one of the built-in families.
    Gen {
        #[command(subcommand)]
        family: GenFamily,
    },
    /// Compute per-state hitting-time values and print them as CSV.
    Solve(SolveArgs),
    /// Run a policy repeatedly and emit one CSV row per replication.
    Simulate(SimulateArgs),
    /// Exact subset brute force on a tiny chain.
    Brute(BruteArgs),
    /// Run the full invariant battery.
    Verify(VerifyArgs),
    /// Run a multi-policy experiment from a config file or bundled scenario.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum GenFamily {
    /// Path chain with an absorbing trap.
    Dummy {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Degree-regular tree with adversarial observations.
    Lbtree {
        #[arg(long)]
        delta: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
        /// Where to write the observations sidecar (default: <out>.obs.json).
        #[arg(long)]
        obs_out: Option<PathBuf>,
    },
    /// Verifier-guided walk on a token prefix tree with random tables.
    Vgb {
        #[arg(long)]
        alphabet: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Target state (default: last leaf).
        #[arg(long)]
        target: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Random sparse chain for fuzzing.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3.0)]
        avg_degree: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        ensure_reachable: bool,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Chain induced by the Game of 24.
    Game24 {
        /// Comma-separated starting numbers, e.g. 4,4,6,8.
        #[arg(long)]
        nums: String,
        /// Keep operation histories in the state identity.
        #[arg(long)]
        history: bool,
        #[arg(long, short)]
        out: PathBuf,
        /// Optional JSON file for the per-state labels.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    chain: PathBuf,
    /// Solver variant.
    #[arg(long, value_parser = ["heap", "dense"], default_value = "heap")]
    method: String,
    /// Print the thresholded table for this improvement parameter instead of
    /// the exact one.
    #[arg(long)]
    aux_eps: Option<f64>,
    /// Output file (default: stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long, value_parser = ["cat", "aux", "stable", "softmax", "norewind", "kparallel"])]
    policy: String,
    #[arg(long, default_value_t = 1000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Improvement threshold parameter for the aux policy.
    #[arg(long)]
    eps: Option<f64>,
    /// Laplace noise scale for the stable and softmax policies.
    #[arg(long)]
    lambda: Option<f64>,
    /// Value bound for the stable policy (derived from a coarse estimate
    /// when omitted).
    #[arg(long)]
    nbound: Option<u64>,
    /// Softmax temperature.
    #[arg(long)]
    tau: Option<f64>,
    /// Re-evaluate every observed state each round in the softmax policy.
    #[arg(long)]
    reevaluate: bool,
    /// Disable the stable policy's restart mechanism.
    #[arg(long)]
    no_reset: bool,
    /// Trajectory count for the k-parallel baseline.
    #[arg(long)]
    k: Option<u64>,
    /// Step budget per run (default: 100x the optimal start value).
    #[arg(long)]
    max_steps: Option<u64>,
    /// Output file (default: stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BruteArgs {
    #[arg(long)]
    chain: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Inject a named fault to exercise the failure path (e.g. "residual").
    #[arg(long)]
    fault: Option<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Config file (JSON).
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Bundled scenario name: "separation" or "noise-scaling".
    #[arg(long)]
    scenario: Option<String>,
    /// Override the config's replication count.
    #[arg(long)]
    reps: Option<u64>,
    /// Override the config's CSV output path.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Print the summary as JSON instead of aligned text.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Gen { family } => gen(family),
        Command::Solve(args) => solve(args),
        Command::Simulate(args) => runner::simulate(args),
        Command::Brute(args) => brute(args),
        Command::Verify(args) => verify::run(args.fault.as_deref()),
        Command::Experiment(args) => experiment::run(args),
    }
}

pub fn load_chain(path: &PathBuf) -> Result<MarkovChain, CliError> {
    MarkovChain::load(path)
        .map_err(|e| CliError::usage(format!("cannot load chain {}: {e}", path.display())))
}

fn save_chain(chain: &MarkovChain, path: &PathBuf) -> CliResult {
    chain
        .save(path)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn write_json(value: &impl serde::Serialize, path: &PathBuf) -> CliResult {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::check(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn gen(family: GenFamily) -> CliResult {
    match family {
        GenFamily::Dummy { n, p, out } => {
            let chain = gen_dummy(n, p).map_err(|e| CliError::usage(e.to_string()))?;
            save_chain(&chain, &out)
        }
        GenFamily::Lbtree { delta, d, eps, seed, out, obs_out } => {
            let (chain, obs) =
                gen_lb_tree(delta, d, eps, seed).map_err(|e| CliError::usage(e.to_string()))?;
            save_chain(&chain, &out)?;
            let obs_path = obs_out.unwrap_or_else(|| sidecar_path(&out));
            write_json(&obs, &obs_path)
        }
        GenFamily::Vgb { alphabet, depth, seed, target, out } => {
            let tables = VgbTables::random(alphabet, depth, seed)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let chain = gen_vgb(&tables, target.map(StateId))
                .map_err(|e| CliError::usage(e.to_string()))?;
            save_chain(&chain, &out)
        }
        GenFamily::Random { n, avg_degree, seed, ensure_reachable, out } => {
            let chain = gen_random(n, avg_degree, seed, ensure_reachable)
                .map_err(|e| CliError::usage(e.to_string()))?;
            save_chain(&chain, &out)
        }
        GenFamily::Game24 { nums, history, out, labels_out } => {
            let nums: Vec<i64> = nums
                .split(',')
                .map(|t| t.trim().parse::<i64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::usage(format!("bad --nums: {e}")))?;
            let game = gen_game24(&nums, Game24Options { track_history: history })
                .map_err(|e| CliError::usage(e.to_string()))?;
            save_chain(&game.chain, &out)?;
            if let Some(path) = labels_out {
                write_json(&game.labels, &path)?;
            }
            Ok(())
        }
    }
}

fn sidecar_path(out: &PathBuf) -> PathBuf {
    let mut path = out.clone();
    let stem = path.file_stem().map(|s| s.to_owned()).unwrap_or_default();
    path.set_file_name(format!("{}.obs.json", stem.to_string_lossy()));
    path
}

fn solve(args: SolveArgs) -> CliResult {
    let chain = load_chain(&args.chain)?;
    let table = match args.method.as_str() {
        "dense" => rmc_core::compute_opt_dense(&chain),
        _ => rmc_core::compute_opt_heap(&chain),
    }
    .map_err(|e| CliError::usage(e.to_string()))?;
    let table = match args.aux_eps {
        Some(eps) if eps > 0.0 => rmc_core::compute_aux_opt(&chain, &table, eps),
        Some(eps) => return Err(CliError::usage(format!("--aux-eps must be positive, got {eps}"))),
        None => table,
    };

    let mut rank = vec![None; chain.n()];
    for (i, &state) in table.extraction_order().iter().enumerate() {
        rank[state.0] = Some(i);
    }
    let mut output = String::from("state,value,settled_rank\n");
    for x in 0..chain.n() {
        let rank_text = rank[x].map(|r| r.to_string()).unwrap_or_default();
        output.push_str(&format!("{x},{},{rank_text}\n", table.value(StateId(x))));
    }
    emit(output, args.out.as_ref())
}

fn brute(args: BruteArgs) -> CliResult {
    let chain = load_chain(&args.chain)?;
    let table = rmc_core::brute_opt_sets(&chain).map_err(|e| CliError::usage(e.to_string()))?;
    let mut output = String::from("state,value\n");
    for x in 0..chain.n() {
        output.push_str(&format!("{x},{}\n", table.singleton(StateId(x))));
    }
    let violation = rmc_core::verify_minimizer(&table);
    output.push_str(&format!("# minimizer violation: {violation:e}\n"));
    print!("{output}");
    if violation > 1e-9 {
        return Err(CliError::check(format!(
            "subset values disagree with singleton minima by {violation:e}"
        )));
    }
    Ok(())
}

pub fn emit(text: String, out: Option<&PathBuf>) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
