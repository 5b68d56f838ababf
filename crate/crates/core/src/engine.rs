//! Per-slot simulation: workload, assignment, allocation, then realized
//! scores and delays.
//!
//! Every strategy in a comparison sees the same tasks and the same per-task
//! noise, which is keyed by `(task, model, steps)` rather than by strategy.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::alloc::{
    anneal, check_plan, equal_allocation, exhaustive_search, optimal_step, slot_utility,
    AllocationPlan, Loads, SaParams, UtilityWeights,
};
use crate::assign::{
    assign, tier_models, Assignment, AssignmentKind, AssignmentPolicy, CategoryAssignmentTable,
    Thresholds,
};
use crate::error::{Result, SimError};
use crate::gaussian::{interval_mass, truncated_mean};
use crate::profiles::{eval_latency, eval_score, CategorySet, ModelProfile, ProfileSet, Tier};
use crate::rng::{self, Stream};
use crate::workload::{generate_slot, Task, WorkloadSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationStrategy {
    Anneal,
    Equal,
    OptimalStep,
    Exhaustive,
}

impl AllocationStrategy {
    pub const ALL: [AllocationStrategy; 4] = [
        AllocationStrategy::Anneal,
        AllocationStrategy::Equal,
        AllocationStrategy::OptimalStep,
        AllocationStrategy::Exhaustive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AllocationStrategy::Anneal => "anneal",
            AllocationStrategy::Equal => "equal",
            AllocationStrategy::OptimalStep => "optimal-step",
            AllocationStrategy::Exhaustive => "exhaustive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

/// An assignment policy paired with an allocation strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyBundle {
    pub label: String,
    pub assignment: AssignmentPolicy,
    pub allocation: AllocationStrategy,
}

impl StrategyBundle {
    /// Every valid `assignment+allocation` name.
    pub fn valid_names() -> Vec<String> {
        AssignmentKind::ALL
            .iter()
            .flat_map(|k| {
                AllocationStrategy::ALL
                    .iter()
                    .map(move |a| format!("{}+{}", k.as_str(), a.as_str()))
            })
            .collect()
    }

    /// Parses `assignment+allocation`, taking thresholds and the direct map from `base`.
    pub fn parse(name: &str, base: &AssignmentPolicy) -> Result<Self> {
        let usage = || {
            SimError::Usage(format!(
                "unknown strategy `{name}`; valid names: {}",
                Self::valid_names().join(", ")
            ))
        };
        let (kind, alloc) = name.split_once('+').ok_or_else(usage)?;
        let kind = AssignmentKind::parse(kind).ok_or_else(usage)?;
        let allocation = AllocationStrategy::parse(alloc).ok_or_else(usage)?;
        Ok(StrategyBundle {
            label: name.to_string(),
            assignment: AssignmentPolicy {
                kind,
                ..base.clone()
            },
            allocation,
        })
    }
}

/// The five strategies of the comparison protocol plus the oracle allocator.
pub const DEFAULT_STRATEGIES: [&str; 6] = [
    "probabilistic+anneal",
    "direct+anneal",
    "random+anneal",
    "probabilistic+equal",
    "probabilistic+optimal-step",
    "probabilistic+exhaustive",
];

/// Everything a run needs besides the strategy.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub profiles: ProfileSet,
    pub categories: CategorySet,
    pub workload: WorkloadSpec,
    pub weights: UtilityWeights,
    pub sa: SaParams,
    /// Resource grid points per loaded model for the exhaustive allocator.
    pub grid_points: usize,
}

impl Scenario {
    pub fn seed(&self) -> u64 {
        self.workload.seed
    }

    pub fn with_seed(&self, seed: u64) -> Scenario {
        let mut s = self.clone();
        s.workload.seed = seed;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskRecord {
    pub task_id: u64,
    pub category_id: u32,
    pub latent_quality: f64,
    pub model_id: u32,
    pub steps: u32,
    pub expected_score: f64,
    pub score: f64,
    pub delay_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelStats {
    pub count: usize,
    pub mean_score: Option<f64>,
    pub mean_delay_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotReport {
    pub slot: u64,
    pub strategy: String,
    pub n_tasks: usize,
    pub mean_score: f64,
    pub mean_delay_s: f64,
    /// Realized objective: mean of `score - omega * delay` over tasks.
    pub utility: f64,
    /// Noise-free objective the allocator optimized.
    pub expected_utility: f64,
    pub mean_expected_score: f64,
    pub per_model: BTreeMap<u32, ModelStats>,
    pub plan: AllocationPlan,
    pub records: Vec<TaskRecord>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / n as f64)
}

fn per_model_stats<'a>(
    profiles: &ProfileSet,
    records: impl Iterator<Item = &'a TaskRecord> + Clone,
) -> BTreeMap<u32, ModelStats> {
    profiles
        .models()
        .iter()
        .map(|m| {
            let mine = records.clone().filter(|r| r.model_id == m.model_id);
            (
                m.model_id,
                ModelStats {
                    count: mine.clone().count(),
                    mean_score: mean(mine.clone().map(|r| r.score)),
                    mean_delay_s: mean(mine.map(|r| r.delay_s)),
                },
            )
        })
        .collect()
}

/// Annealing parameters for one slot, with a seed derived from the run seed.
pub fn slot_anneal_params(scenario: &Scenario, slot: u64) -> SaParams {
    let sa = &scenario.sa;
    SaParams {
        seed: rng::derive_seed(scenario.seed(), Stream::Anneal, &[sa.seed, slot]),
        ..sa.clone()
    }
}

fn route(tasks: &[Task], policy: &AssignmentPolicy, scenario: &Scenario, slot: u64) -> Result<Assignment> {
    let table = CategoryAssignmentTable::build(&scenario.categories, policy.thresholds)?;
    let mut assign_rng = rng::stream(scenario.seed(), Stream::Assignment, &[slot]);
    let assignment = assign(
        tasks,
        policy,
        &table,
        &scenario.categories,
        &scenario.profiles,
        &mut assign_rng,
    )?;
    assignment.verify(tasks, &scenario.profiles)?;
    Ok(assignment)
}

/// Per-model loads of one slot's workload under an assignment policy.
pub fn slot_loads(scenario: &Scenario, policy: &AssignmentPolicy, slot: u64) -> Result<Loads> {
    let tasks = generate_slot(&scenario.workload, &scenario.categories, slot)?;
    let assignment = route(&tasks, policy, scenario, slot)?;
    Ok(Loads::from_assignment(&tasks, &assignment, &scenario.profiles))
}

fn allocate(
    strategy: AllocationStrategy,
    loads: &Loads,
    scenario: &Scenario,
    slot: u64,
) -> Result<AllocationPlan> {
    let (profiles, weights, sa) = (&scenario.profiles, &scenario.weights, &scenario.sa);
    let bound = sa.latency_bound;
    match strategy {
        AllocationStrategy::Anneal => {
            anneal(loads, profiles, weights, &slot_anneal_params(scenario, slot)).map(|(p, _)| p)
        }
        AllocationStrategy::Equal => equal_allocation(loads, profiles, weights, bound),
        AllocationStrategy::OptimalStep => optimal_step(loads, profiles, weights, bound),
        AllocationStrategy::Exhaustive => {
            exhaustive_search(loads, profiles, weights, scenario.grid_points, bound).map(|(p, _)| p)
        }
    }
}

/// Runs one slot end to end for one strategy.
pub fn run_slot(
    tasks: &[Task],
    bundle: &StrategyBundle,
    scenario: &Scenario,
    slot: u64,
) -> Result<SlotReport> {
    if tasks.is_empty() {
        return Err(SimError::Usage(format!("slot {slot} has no tasks")));
    }
    let profiles = &scenario.profiles;
    let weights = &scenario.weights;
    let assignment = route(tasks, &bundle.assignment, scenario, slot)?;

    let loads = Loads::from_assignment(tasks, &assignment, profiles);
    let plan = allocate(bundle.allocation, &loads, scenario, slot).map_err(|e| e.in_slot(slot))?;
    check_plan(&plan, &loads, profiles, weights)?;
    let expected_utility = slot_utility(&plan, &loads, profiles, weights)?;

    let records = tasks
        .iter()
        .zip(assignment.entries())
        .map(|(t, &(_, model_id))| {
            let profile = profiles.get(model_id).expect("assignment verified");
            let entry = plan.entry(model_id).expect("plan checked");
            let noise = rng::task_noise(scenario.seed(), t.task_id, model_id, entry.steps);
            Ok(TaskRecord {
                task_id: t.task_id,
                category_id: t.category_id,
                latent_quality: t.latent_quality,
                model_id,
                steps: entry.steps,
                expected_score: profile.score_curve.expected(t.latent_quality, entry.steps),
                score: eval_score(profile, t.latent_quality, entry.steps, noise)?,
                delay_s: eval_latency(profile, entry.steps, entry.gamma, weights.total_resource)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = records.len() as f64;
    let mean_score = records.iter().map(|r| r.score).sum::<f64>() / n;
    let mean_delay_s = records.iter().map(|r| r.delay_s).sum::<f64>() / n;
    let utility = records
        .iter()
        .map(|r| r.score - weights.omega * r.delay_s)
        .sum::<f64>()
        / n;
    let identity_gap = (utility - (mean_score - weights.omega * mean_delay_s)).abs();
    if identity_gap > 1e-9 {
        return Err(SimError::Invariant(format!(
            "slot {slot}: realized utility differs from mean score minus weighted delay by {identity_gap}"
        )));
    }
    let mean_expected_score = records.iter().map(|r| r.expected_score).sum::<f64>() / n;

    Ok(SlotReport {
        slot,
        strategy: bundle.label.clone(),
        n_tasks: records.len(),
        mean_score,
        mean_delay_s,
        utility,
        expected_utility,
        mean_expected_score,
        per_model: per_model_stats(profiles, records.iter()),
        plan,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub n_tasks: usize,
    pub mean_score: f64,
    pub mean_delay_s: f64,
    pub utility: f64,
    pub expected_utility: f64,
    pub mean_expected_score: f64,
    pub per_model: BTreeMap<u32, ModelStats>,
}

impl Aggregate {
    /// Task-weighted means over slot reports.
    pub fn from_slots(slots: &[SlotReport], profiles: &ProfileSet) -> Aggregate {
        let n: usize = slots.iter().map(|s| s.n_tasks).sum();
        let weighted = |f: fn(&SlotReport) -> f64| {
            slots.iter().map(|s| s.n_tasks as f64 * f(s)).sum::<f64>() / n as f64
        };
        Aggregate {
            n_tasks: n,
            mean_score: weighted(|s| s.mean_score),
            mean_delay_s: weighted(|s| s.mean_delay_s),
            utility: weighted(|s| s.utility),
            expected_utility: weighted(|s| s.expected_utility),
            mean_expected_score: weighted(|s| s.mean_expected_score),
            per_model: per_model_stats(profiles, slots.iter().flat_map(|s| s.records.iter())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub strategy: String,
    pub seed: u64,
    pub config_fingerprint: String,
    pub aggregate: Aggregate,
    /// Sorted realized scores of every task.
    pub score_cdf: Vec<f64>,
    pub slots: Vec<SlotReport>,
}

impl RunReport {
    fn assemble(bundle: &StrategyBundle, scenario: &Scenario, fingerprint: &str, slots: Vec<SlotReport>) -> Self {
        let mut score_cdf: Vec<f64> = slots
            .iter()
            .flat_map(|s| s.records.iter().map(|r| r.score))
            .collect();
        score_cdf.sort_by(f64::total_cmp);
        RunReport {
            strategy: bundle.label.clone(),
            seed: scenario.seed(),
            config_fingerprint: fingerprint.to_string(),
            aggregate: Aggregate::from_slots(&slots, &scenario.profiles),
            score_cdf,
            slots,
        }
    }
}

fn all_slots(scenario: &Scenario) -> Result<Vec<Vec<Task>>> {
    (0..scenario.workload.num_slots)
        .map(|slot| generate_slot(&scenario.workload, &scenario.categories, slot))
        .collect()
}

/// Runs every slot of the scenario under one strategy.
pub fn run_strategy(scenario: &Scenario, bundle: &StrategyBundle, fingerprint: &str) -> Result<RunReport> {
    let slots = all_slots(scenario)?
        .iter()
        .enumerate()
        .map(|(slot, tasks)| run_slot(tasks, bundle, scenario, slot as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport::assemble(bundle, scenario, fingerprint, slots))
}

/// Reports of a paired comparison. A failing bundle stops the run; bundles
/// completed before it are kept.
#[derive(Debug)]
pub struct Comparison {
    pub reports: Vec<RunReport>,
    pub failure: Option<(String, SimError)>,
}

/// Runs several strategies over one shared workload.
pub fn run_comparison(scenario: &Scenario, bundles: &[StrategyBundle], fingerprint: &str) -> Result<Comparison> {
    if bundles.is_empty() {
        return Err(SimError::Usage("strategy list must not be empty".into()));
    }
    let workload = all_slots(scenario)?;
    let mut reports = Vec::with_capacity(bundles.len());
    for bundle in bundles {
        let outcome = workload
            .iter()
            .enumerate()
            .map(|(slot, tasks)| run_slot(tasks, bundle, scenario, slot as u64))
            .collect::<Result<Vec<_>>>();
        match outcome {
            Ok(slots) => reports.push(RunReport::assemble(bundle, scenario, fingerprint, slots)),
            Err(e) => {
                return Ok(Comparison {
                    reports,
                    failure: Some((bundle.label.clone(), e)),
                })
            }
        }
    }
    Ok(Comparison {
        reports,
        failure: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaPoint {
    pub omega: f64,
    pub mean_score: f64,
    pub mean_expected_score: f64,
    pub mean_delay_s: f64,
    pub utility: f64,
    pub expected_utility: f64,
}

/// Re-runs the same workload for each trade-off weight.
pub fn omega_sweep(
    scenario: &Scenario,
    bundle: &StrategyBundle,
    omegas: &[f64],
    fingerprint: &str,
) -> Result<Vec<OmegaPoint>> {
    if omegas.is_empty() {
        return Err(SimError::Usage("omega list must not be empty".into()));
    }
    if let Some(w) = omegas.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(SimError::config("omegas", format!("omega must be finite and >= 0, got {w}")));
    }
    if omegas.windows(2).any(|w| w[0] > w[1]) {
        return Err(SimError::Usage("omega list must be sorted ascending".into()));
    }
    omegas
        .iter()
        .map(|&omega| {
            let mut s = scenario.clone();
            s.weights.omega = omega;
            let agg = run_strategy(&s, bundle, fingerprint)?.aggregate;
            Ok(OmegaPoint {
                omega,
                mean_score: agg.mean_score,
                mean_expected_score: agg.mean_expected_score,
                mean_delay_s: agg.mean_delay_s,
                utility: agg.utility,
                expected_utility: agg.expected_utility,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCell {
    pub model_id: u32,
    pub steps: u32,
    pub expected_score: Option<f64>,
    /// Delay at the full edge resource.
    pub delay_s: f64,
}

/// Tasks whose medium-model score falls in one threshold interval, replayed on each model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: Tier,
    /// Mixture mass of the interval, with categories weighted equally.
    pub mass: f64,
    pub conditional_mean: Option<f64>,
    pub cells: Vec<LevelCell>,
}

/// Admissible step nearest the curve's reference step; ties go to the smaller step.
fn reference_step(profile: &ModelProfile) -> u32 {
    let target = i64::from(profile.score_curve.ref_steps);
    *profile
        .steps()
        .iter()
        .min_by_key(|&&s| ((i64::from(s) - target).abs(), s))
        .expect("validated non-empty")
}

/// Expected score and delay of each score level on each tier, using the
/// interval-conditional mean of the category mixture.
pub fn score_level_diagnostic(
    categories: &CategorySet,
    profiles: &ProfileSet,
    thresholds: Thresholds,
) -> Result<Vec<LevelRow>> {
    thresholds.check()?;
    let tiers = tier_models(profiles)?;
    let weight = 1.0 / categories.len() as f64;
    let rows = thresholds
        .intervals()
        .into_iter()
        .zip(Tier::ALL)
        .map(|((lo, hi), level)| {
            let (mass, moment) = categories.categories().iter().fold((0.0, 0.0), |(m, mm), c| {
                let part = interval_mass(c.mu, c.sigma, lo, hi);
                let cm = truncated_mean(c.mu, c.sigma, lo, hi).unwrap_or(0.0);
                (m + weight * part, mm + weight * part * cm)
            });
            let conditional_mean = (mass > 1e-12).then(|| moment / mass);
            let cells = tiers
                .iter()
                .map(|&id| {
                    let p = profiles.get(id).expect("tier model exists");
                    let steps = reference_step(p);
                    LevelCell {
                        model_id: id,
                        steps,
                        expected_score: conditional_mean.map(|q| p.score_curve.expected(q, steps)),
                        delay_s: p.latency_curve.full_resource(steps),
                    }
                })
                .collect();
            LevelRow {
                level,
                mass,
                conditional_mean,
                cells,
            }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{default_categories, default_profiles, CategoryProfile};

    fn scenario() -> Scenario {
        let categories = CategorySet::new(default_categories()).unwrap();
        Scenario {
            profiles: ProfileSet::new(default_profiles()).unwrap(),
            workload: WorkloadSpec {
                tasks_per_slot: 40,
                num_slots: 2,
                category_mix: WorkloadSpec::uniform_mix(&categories),
                seed: 5,
            },
            categories,
            weights: UtilityWeights::default(),
            sa: SaParams::default(),
            grid_points: 10,
        }
    }

    fn base_policy(s: &Scenario) -> AssignmentPolicy {
        let thresholds = Thresholds::default();
        AssignmentPolicy {
            kind: AssignmentKind::Probabilistic,
            thresholds,
            direct_map: AssignmentPolicy::default_direct_map(&s.categories, &s.profiles, thresholds)
                .unwrap(),
        }
    }

    #[test]
    fn bundle_names_round_trip() {
        let s = scenario();
        for name in StrategyBundle::valid_names() {
            assert_eq!(StrategyBundle::parse(&name, &base_policy(&s)).unwrap().label, name);
        }
        let err = StrategyBundle::parse("greedy+anneal", &base_policy(&s)).unwrap_err();
        assert!(err.to_string().contains("probabilistic+anneal"));
    }

    #[test]
    fn slot_is_deterministic() {
        let s = scenario();
        let bundle = StrategyBundle::parse("probabilistic+anneal", &base_policy(&s)).unwrap();
        let tasks = generate_slot(&s.workload, &s.categories, 1).unwrap();
        let a = run_slot(&tasks, &bundle, &s, 1).unwrap();
        let b = run_slot(&tasks, &bundle, &s, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn single_noise_free_task_scores_its_curve() {
        let mut s = scenario();
        let mut medium = default_profiles().remove(1);
        medium.model_id = 0;
        medium.score_curve.noise_sigma = 0.0;
        s.profiles = ProfileSet::new(vec![medium.clone()]).unwrap();
        s.weights.omega = 0.0;
        let policy = AssignmentPolicy {
            kind: AssignmentKind::Direct,
            thresholds: Thresholds::default(),
            direct_map: s
                .categories
                .categories()
                .iter()
                .map(|c| (c.label.clone(), 0))
                .collect(),
        };
        let bundle = StrategyBundle {
            label: "direct+anneal".into(),
            assignment: policy,
            allocation: AllocationStrategy::Anneal,
        };
        let task = Task {
            task_id: 0,
            category_id: 0,
            latent_quality: 31.0,
            arrival_slot: 0,
        };
        let r = run_slot(&[task], &bundle, &s, 0).unwrap();
        // with omega = 0 the largest step is optimal
        assert_eq!(r.plan.entries[0].steps, 42);
        assert_eq!(r.utility, medium.score_curve.expected(31.0, 42));
    }

    #[test]
    fn comparison_pairs_workloads() {
        let s = scenario();
        let base = base_policy(&s);
        let bundles: Vec<_> = ["probabilistic+anneal", "random+equal"]
            .iter()
            .map(|n| StrategyBundle::parse(n, &base).unwrap())
            .collect();
        let cmp = run_comparison(&s, &bundles, "fp").unwrap();
        assert!(cmp.failure.is_none());
        let ids = |r: &RunReport| -> Vec<(u64, f64)> {
            r.slots
                .iter()
                .flat_map(|s| s.records.iter().map(|t| (t.task_id, t.latent_quality)))
                .collect()
        };
        assert_eq!(ids(&cmp.reports[0]), ids(&cmp.reports[1]));

        let twice = vec![bundles[0].clone(), bundles[0].clone()];
        let cmp = run_comparison(&s, &twice, "fp").unwrap();
        assert_eq!(cmp.reports[0], cmp.reports[1]);
        assert!(run_comparison(&s, &[], "fp").is_err());
    }

    #[test]
    fn failing_bundle_keeps_partial_results() {
        let mut s = scenario();
        // only the annealer can shrink steps far enough for this bound
        s.sa.latency_bound = 30.0;
        let base = base_policy(&s);
        let bundles: Vec<_> = ["probabilistic+anneal", "probabilistic+optimal-step"]
            .iter()
            .map(|n| StrategyBundle::parse(n, &base).unwrap())
            .collect();
        let cmp = run_comparison(&s, &bundles, "fp").unwrap();
        assert_eq!(cmp.reports.len(), 1);
        let (label, err) = cmp.failure.unwrap();
        assert_eq!(label, "probabilistic+optimal-step");
        assert!(matches!(err, SimError::Infeasible { slot: Some(0), .. }));
    }

    #[test]
    fn sweep_rejects_bad_lists() {
        let s = scenario();
        let b = StrategyBundle::parse("probabilistic+anneal", &base_policy(&s)).unwrap();
        assert!(matches!(omega_sweep(&s, &b, &[], "fp"), Err(SimError::Usage(_))));
        assert!(omega_sweep(&s, &b, &[-0.1], "fp").is_err());
        assert!(omega_sweep(&s, &b, &[0.5, 0.2], "fp").is_err());
    }

    #[test]
    fn single_omega_sweep_matches_plain_run() {
        let s = scenario();
        let b = StrategyBundle::parse("probabilistic+anneal", &base_policy(&s)).unwrap();
        let sweep = omega_sweep(&s, &b, &[0.2], "fp").unwrap();
        let run = run_strategy(&s, &b, "fp").unwrap().aggregate;
        assert_eq!(sweep[0].utility, run.utility);
        assert_eq!(sweep[0].mean_delay_s, run.mean_delay_s);
    }

    #[test]
    fn level_table_structure() {
        let s = scenario();
        let rows = score_level_diagnostic(&s.categories, &s.profiles, Thresholds::default()).unwrap();
        assert_eq!(rows.len(), 3);
        let low = &rows[0];
        assert!(low.cells[0].delay_s < low.cells[1].delay_s);
        let q = low.conditional_mean.unwrap();
        assert!((low.cells[0].expected_score.unwrap() - (q - 1.5)).abs() < 1e-12);
        let high = &rows[2];
        let gap = high.cells[2].expected_score.unwrap() - high.cells[1].expected_score.unwrap();
        assert!((gap - 2.5).abs() < 1e-12);

        let narrow = CategorySet::new(vec![CategoryProfile {
            category_id: 0,
            label: "Narrow".into(),
            mu: 31.0,
            sigma: 1e-3,
        }])
        .unwrap();
        let rows = score_level_diagnostic(&narrow, &s.profiles, Thresholds::default()).unwrap();
        assert!(rows[0].conditional_mean.is_none());
        assert!(rows[2].conditional_mean.is_none());
        assert!((rows[1].conditional_mean.unwrap() - 31.0).abs() < 1e-9);
    }
}
