//! Invariant battery behind `rmc verify`: differential solver checks,
//! brute-force equivalence, recursion residuals, caterpillar structure,
//! tree observation bounds, and prefix-tree distribution equality.
//!
//! Prints one line per check with the measured value against its tolerance
//! and exits nonzero if any check fails. `--fault residual` perturbs a
//! solved table before the residual check to prove the battery can fail.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rmc_core::chain::undirected_distances;
use rmc_core::{
    brute_opt_sets, compute_opt_dense, compute_opt_heap, default_max_steps, gen_dummy, gen_game24,
    gen_lb_tree, gen_random, gen_vgb, recursion_residual, replicate_stats, run_aux, run_cat,
    verify_minimizer, ExtReal, Game24Options, HittingTimeTable, MarkovChain, StateId, VgbTables,
};

use crate::{CliError, CliResult};

#[derive(Clone, Copy, PartialEq)]
enum Fault {
    None,
    Residual,
}

struct CheckResult {
    name: &'static str,
    passed: bool,
    detail: String,
}

pub fn run(fault: Option<&str>) -> CliResult {
    let fault = match fault {
        None => Fault::None,
        Some("residual") => Fault::Residual,
        Some(other) => {
            return Err(CliError::usage(format!(
                "unknown fault {other:?} (available: residual)"
            )))
        }
    };

    let checks = [
        solver_differential(),
        brute_equivalence(),
        residuals(fault),
        caterpillar(),
        lb_tree_bounds(),
        vgb_distribution(),
    ];

    let mut failed = Vec::new();
    for check in &checks {
        println!(
            "check {:<22} {}  {}",
            check.name,
            if check.passed { "PASS" } else { "FAIL" },
            check.detail
        );
        if !check.passed {
            failed.push(check.name);
        }
    }
    if failed.is_empty() {
        println!("all {} checks passed", checks.len());
        Ok(())
    } else {
        Err(CliError::check(format!("failing checks: {}", failed.join(", "))))
    }
}

fn rel_gap(a: ExtReal, b: ExtReal) -> f64 {
    match (a, b) {
        (ExtReal::Infinity, ExtReal::Infinity) => 0.0,
        (a, b) => (a.as_f64() - b.as_f64()).abs() / a.as_f64().abs().max(1.0),
    }
}

fn solver_differential() -> CheckResult {
    let mut worst = 0.0f64;
    let mut monotone = true;
    for seed in 0..40u64 {
        let n = 2 + (seed as usize * 3) % 119;
        let chain = gen_random(n, 3.0, seed, seed % 2 == 0).unwrap();
        let dense = compute_opt_dense(&chain).unwrap();
        let heap = compute_opt_heap(&chain).unwrap();
        for x in 0..n {
            worst = worst.max(rel_gap(dense.value(StateId(x)), heap.value(StateId(x))));
        }
        for table in [&dense, &heap] {
            let values: Vec<f64> =
                table.extraction_order().iter().map(|&x| table.value(x).as_f64()).collect();
            monotone &= values.windows(2).all(|w| w[0] <= w[1]);
        }
    }
    CheckResult {
        name: "solver-differential",
        passed: worst <= 1e-9 && monotone,
        detail: format!("max per-state gap {worst:.2e} (tolerance 1e-9), monotone {monotone}"),
    }
}

fn brute_equivalence() -> CheckResult {
    let mut worst_single = 0.0f64;
    let mut worst_min = 0.0f64;
    for seed in 0..25u64 {
        let n = 2 + (seed as usize) % 7;
        let chain = gen_random(n, 2.5, 50 + seed, seed % 3 != 0).unwrap();
        let table = brute_opt_sets(&chain).unwrap();
        let heap = compute_opt_heap(&chain).unwrap();
        for x in 0..n {
            worst_single =
                worst_single.max(rel_gap(table.singleton(StateId(x)), heap.value(StateId(x))));
        }
        worst_min = worst_min.max(verify_minimizer(&table));
    }
    CheckResult {
        name: "brute-equivalence",
        passed: worst_single <= 1e-9 && worst_min <= 1e-9,
        detail: format!(
            "max singleton gap {worst_single:.2e}, max minimizer gap {worst_min:.2e} (tolerance 1e-9)"
        ),
    }
}

fn family_chains() -> Vec<(&'static str, MarkovChain)> {
    vec![
        ("dummy", gen_dummy(10, 0.5).unwrap()),
        ("random", gen_random(30, 3.0, 11, true).unwrap()),
        ("lbtree", gen_lb_tree(3, 1, 0.5, 7).unwrap().0),
        ("game24", gen_game24(&[4, 4, 6, 8], Game24Options::default()).unwrap().chain),
        ("vgb", gen_vgb(&VgbTables::random(2, 3, 5).unwrap(), None).unwrap()),
    ]
}

fn residuals(fault: Fault) -> CheckResult {
    let mut worst = 0.0f64;
    for (i, (_, chain)) in family_chains().into_iter().enumerate() {
        let table = compute_opt_heap(&chain).unwrap();
        let table = if fault == Fault::Residual && i == 0 {
            // Injected fault: shift one settled value by +1 so the
            // optimality recursion visibly breaks.
            let mut values = table.values().to_vec();
            let victim = chain.start().0;
            values[victim] = ExtReal::finite(values[victim].as_f64() + 1.0);
            HittingTimeTable::from_values(values)
        } else {
            table
        };
        worst = worst.max(recursion_residual(&chain, &table));
    }
    CheckResult {
        name: "recursion-residual",
        passed: worst <= 1e-6,
        detail: format!("max relative residual {worst:.2e} (tolerance 1e-6)"),
    }
}

fn caterpillar() -> CheckResult {
    let mut runs = 0u64;
    let mut good = 0u64;
    for (i, (_, chain)) in family_chains().into_iter().enumerate() {
        let opt = compute_opt_heap(&chain).unwrap();
        let cap = default_max_steps(opt.value(chain.start()));
        let master = 0x5EED + i as u64;
        let cat = replicate_stats(200, master, |_, seed| run_cat(&chain, &opt, seed, cap));
        let aux =
            replicate_stats(200, master ^ 0xFF, |_, seed| run_aux(&chain, &opt, 1.0, seed, cap));
        runs += cat.runs + aux.runs;
        good += cat.caterpillars + aux.caterpillars;
    }
    CheckResult {
        name: "caterpillar",
        passed: runs == good,
        detail: format!("{good}/{runs} observed trees are caterpillars"),
    }
}

fn lb_tree_bounds() -> CheckResult {
    let mut worst_value = 0.0f64;
    let mut worst_band = f64::NEG_INFINITY;
    for (delta, d, eps) in [(3usize, 1usize, 0.5f64), (2, 5, 0.7)] {
        let (chain, obs) = gen_lb_tree(delta, d, eps, 7).unwrap();
        let table = compute_opt_heap(&chain).unwrap();
        let dist = undirected_distances(&chain, chain.target());
        for x in 0..chain.n() {
            let truth = table.value(StateId(x)).as_f64();
            worst_value = worst_value
                .max((truth - delta as f64 * dist[x] as f64).abs() / truth.max(1.0));
            if StateId(x) != chain.target() {
                worst_band = worst_band.max((obs.values[x] / truth - 1.0).abs() - eps);
            }
        }
    }
    CheckResult {
        name: "lbtree-bounds",
        passed: worst_value <= 1e-9 && worst_band <= 1e-12,
        detail: format!(
            "max value error {worst_value:.2e} (tolerance 1e-9), band overshoot {worst_band:.2e}"
        ),
    }
}

fn vgb_distribution() -> CheckResult {
    let alphabet = 2usize;
    let depth = 3usize;
    let draws = 100_000u64;
    let mut worst_row = 0.0f64;
    let mut worst_tv = 0.0f64;
    for seed in 0..3u64 {
        let tables = VgbTables::random(alphabet, depth, seed).unwrap();
        let chain = gen_vgb(&tables, None).unwrap();
        let mut offsets = vec![0usize];
        let mut size = 1usize;
        for _ in 0..=depth {
            offsets.push(offsets.last().unwrap() + size);
            size *= alphabet;
        }
        for node in 0..chain.n() {
            let level = (0..=depth).find(|&l| node < offsets[l + 1]).unwrap();
            let pos = node - offsets[level];
            let mut expected: Vec<(usize, f64)> = Vec::new();
            if level > 0 {
                expected.push((offsets[level - 1] + pos / alphabet, tables.vb()[node]));
            }
            if level < depth {
                for a in 0..alphabet {
                    let child = offsets[level + 1] + pos * alphabet + a;
                    expected.push((child, tables.pi()[node][a] * tables.vb()[child]));
                }
            }
            let total: f64 = expected.iter().map(|&(_, w)| w).sum();
            expected.sort_by_key(|&(to, _)| to);
            let row = chain.successors(StateId(node));
            for (&(to, prob), &(eto, ew)) in row.iter().zip(&expected) {
                if to.0 != eto {
                    return CheckResult {
                        name: "vgb-distribution",
                        passed: false,
                        detail: format!("node {node}: successor {to} vs expected {eto}"),
                    };
                }
                worst_row = worst_row.max((prob - ew / total).abs());
            }

            // One-step simulation against the stored row.
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 1000 + node as u64);
            let mut counts = vec![0u64; row.len()];
            for _ in 0..draws {
                let y = chain.sample_successor(StateId(node), &mut rng);
                let idx = row.iter().position(|&(s, _)| s == y).unwrap();
                counts[idx] += 1;
            }
            let tv: f64 = row
                .iter()
                .zip(&counts)
                .map(|(&(_, p), &c)| (c as f64 / draws as f64 - p).abs())
                .sum::<f64>()
                / 2.0;
            worst_tv = worst_tv.max(tv);
        }
    }
    CheckResult {
        name: "vgb-distribution",
        passed: worst_row <= 1e-12 && worst_tv <= 0.01,
        detail: format!(
            "max row deviation {worst_row:.2e}, max total variation {worst_tv:.4} (tolerance 0.01)"
        ),
    }
}
