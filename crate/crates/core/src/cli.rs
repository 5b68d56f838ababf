//! Experiment drivers behind the `edgegen` subcommands.
//!
//! Each driver takes a loaded [`RunConfig`], runs the engine and writes its
//! artifacts under an output directory. Errors are returned to the caller,
//! which maps them to exit codes with [`SimError::exit_code`].

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use crate::alloc::{
    anneal, equal_allocation, exhaustive_search, search_space_size, slot_utility, AllocationPlan,
};
use crate::config::{Format, RunConfig};
use crate::engine::{
    omega_sweep, run_comparison, run_strategy, slot_anneal_params, slot_loads, OmegaPoint,
    RunReport, StrategyBundle, DEFAULT_STRATEGIES,
};
use crate::error::{Result, SimError};
use crate::output::{self, ArtifactDir};

/// Trade-off weights swept when none are given.
pub const DEFAULT_OMEGAS: [f64; 5] = [0.05, 0.1, 0.2, 0.5, 1.0];

fn seeded(config: &RunConfig, seed: Option<u64>) -> RunConfig {
    match seed {
        Some(s) => config.clone().with_seed(s),
        None => config.clone(),
    }
}

/// The configured assignment policy paired with annealing, unless overridden.
fn single_bundle(config: &RunConfig, strategy: Option<&str>) -> Result<StrategyBundle> {
    let name = match strategy {
        Some(s) => s.to_string(),
        None => format!("{}+anneal", config.assignment.kind.as_str()),
    };
    StrategyBundle::parse(&name, &config.assignment)
}

fn write_report(dir: &mut ArtifactDir, config: &RunConfig, report: &RunReport) -> Result<()> {
    if config.output.wants(Format::Csv) {
        dir.write("slots.csv", &output::slots_csv(report)?)?;
        dir.write("tasks.csv", &output::tasks_csv(report, &config.scenario.categories)?)?;
        dir.write("plans.csv", &output::plans_csv(report)?)?;
    }
    if config.output.wants(Format::Json) {
        dir.write("run.json", &output::json_bytes(report)?)?;
    }
    Ok(())
}

/// Runs one strategy over every slot and writes its run artifacts to `out`.
pub fn cmd_run(config: &RunConfig, seed: Option<u64>, out: &Path, strategy: Option<&str>) -> Result<RunReport> {
    let config = seeded(config, seed);
    let bundle = single_bundle(&config, strategy)?;
    let fingerprint = config.fingerprint();
    let report = run_strategy(&config.scenario, &bundle, &fingerprint)?;
    let mut dir = ArtifactDir::create(out)?;
    write_report(&mut dir, &config, &report)?;
    dir.finish(&fingerprint, config.scenario.seed())?;
    Ok(report)
}

/// Runs several strategies on a shared workload.
///
/// Each strategy's run artifacts go to `out/<strategy>/` and the metric table
/// to `out/compare.csv`. When a strategy fails, the strategies finished
/// before it are still written and the failure is returned afterwards.
pub fn cmd_compare(
    config: &RunConfig,
    seed: Option<u64>,
    out: &Path,
    strategies: &[String],
) -> Result<Vec<RunReport>> {
    let config = seeded(config, seed);
    let names: Vec<String> = if strategies.is_empty() {
        DEFAULT_STRATEGIES.iter().map(|s| s.to_string()).collect()
    } else {
        strategies.to_vec()
    };
    let bundles = names
        .iter()
        .map(|n| StrategyBundle::parse(n, &config.assignment))
        .collect::<Result<Vec<_>>>()?;
    let fingerprint = config.fingerprint();
    let comparison = run_comparison(&config.scenario, &bundles, &fingerprint)?;

    let mut root = ArtifactDir::create(out)?;
    let mut written = BTreeSet::new();
    for report in &comparison.reports {
        if written.insert(report.strategy.clone()) {
            let mut dir = ArtifactDir::create(&out.join(&report.strategy))?;
            write_report(&mut dir, &config, report)?;
            dir.finish(&fingerprint, config.scenario.seed())?;
        }
    }
    root.write("compare.csv", &output::compare_csv(&comparison.reports)?)?;
    root.finish(&fingerprint, config.scenario.seed())?;

    match comparison.failure {
        Some((label, err)) => {
            eprintln!("strategy `{label}` failed; results of earlier strategies were kept");
            Err(err)
        }
        None => Ok(comparison.reports),
    }
}

/// Re-runs one strategy for each trade-off weight and writes `sweep.csv`.
pub fn cmd_sweep(
    config: &RunConfig,
    seed: Option<u64>,
    out: &Path,
    omegas: &[f64],
    strategy: Option<&str>,
) -> Result<Vec<OmegaPoint>> {
    let config = seeded(config, seed);
    let bundle = single_bundle(&config, strategy)?;
    let fingerprint = config.fingerprint();
    let points = omega_sweep(&config.scenario, &bundle, omegas, &fingerprint)?;
    let mut dir = ArtifactDir::create(out)?;
    dir.write("sweep.csv", &output::sweep_csv(&points)?)?;
    dir.finish(&fingerprint, config.scenario.seed())?;
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleModelLoad {
    pub model_id: u32,
    pub count: usize,
}

/// Exhaustive optimum of the first slot next to the annealer's answer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub config_fingerprint: String,
    pub seed: u64,
    pub slot: u64,
    pub assignment: String,
    pub grid_points: usize,
    pub search_space_size: u128,
    pub loads: Vec<OracleModelLoad>,
    pub optimal_plan: AllocationPlan,
    pub optimal_utility: f64,
    pub anneal_plan: AllocationPlan,
    pub anneal_utility: f64,
    /// `(optimal - anneal) / |optimal|`; negative when annealing beats the grid.
    pub relative_gap: f64,
    pub equal_allocation_utility: f64,
}

/// Solves slot 0 on the resource grid and compares the annealer against it.
pub fn oracle_report(config: &RunConfig, grid_points: usize) -> Result<OracleReport> {
    let scenario = &config.scenario;
    let (profiles, weights) = (&scenario.profiles, &scenario.weights);
    let bound = scenario.sa.latency_bound;
    let slot = 0;
    let loads = slot_loads(scenario, &config.assignment, slot)?;

    let (optimal_plan, optimal_utility) =
        exhaustive_search(&loads, profiles, weights, grid_points, bound).map_err(|e| e.in_slot(slot))?;
    let (anneal_plan, anneal_utility) =
        anneal(&loads, profiles, weights, &slot_anneal_params(scenario, slot)).map_err(|e| e.in_slot(slot))?;
    let equal = equal_allocation(&loads, profiles, weights, bound).map_err(|e| e.in_slot(slot))?;
    let equal_allocation_utility = slot_utility(&equal, &loads, profiles, weights)?;

    Ok(OracleReport {
        config_fingerprint: config.fingerprint(),
        seed: scenario.seed(),
        slot,
        assignment: config.assignment.kind.as_str().to_string(),
        grid_points,
        search_space_size: search_space_size(&loads, profiles, grid_points),
        loads: loads
            .0
            .iter()
            .map(|(&model_id, l)| OracleModelLoad {
                model_id,
                count: l.count,
            })
            .collect(),
        optimal_plan,
        optimal_utility,
        anneal_plan,
        anneal_utility,
        relative_gap: (optimal_utility - anneal_utility) / optimal_utility.abs(),
        equal_allocation_utility,
    })
}

/// Writes `oracle.json` for slot 0 of the configured workload.
pub fn cmd_oracle(config: &RunConfig, seed: Option<u64>, out: &Path, grid_points: Option<usize>) -> Result<OracleReport> {
    let config = seeded(config, seed);
    let grid = grid_points.unwrap_or(config.scenario.grid_points);
    if grid == 0 {
        return Err(SimError::Usage("--grid must be at least 1".into()));
    }
    let report = oracle_report(&config, grid)?;
    let mut dir = ArtifactDir::create(out)?;
    dir.write("oracle.json", &output::json_bytes(&report)?)?;
    dir.finish(&report.config_fingerprint, report.seed)?;
    Ok(report)
}
