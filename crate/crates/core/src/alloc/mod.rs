//! Per-slot step selection and resource allocation.
//!
//! All strategies maximize the same expected utility
//! `(1/N) * sum_m N_m * (C_m(q_m, s_m) - omega * (G / g_m) * d_m(s_m))`
//! where `q_m` is the mean latent quality of the tasks on model `m`, `G` the
//! total resource and `g_m` the model's share.

mod anneal;
mod baselines;
mod exhaustive;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assign::Assignment;
use crate::error::{Constraint, Result, SimError};
use crate::profiles::ProfileSet;
use crate::workload::Task;

pub use anneal::{anneal, cooling_schedule, metropolis_accept, CoolingMode, SaParams};
pub use baselines::{equal_allocation, optimal_step, water_fill};
pub use exhaustive::{exhaustive_search, search_space_size, SEARCH_SPACE_LIMIT};

/// Relative slack on the latency check, absorbing rounding in renormalized shares.
const REL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityWeights {
    pub omega: f64,
    pub total_resource: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        UtilityWeights {
            omega: 0.2,
            total_resource: 100.0,
        }
    }
}

impl UtilityWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(SimError::config("weights.omega", "must be finite and >= 0"));
        }
        if !(self.total_resource > 0.0 && self.total_resource.is_finite()) {
            return Err(SimError::config("weights.total_resource", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Tasks routed to one model in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelLoad {
    pub count: usize,
    pub mean_latent_quality: f64,
}

/// Per-model loads, one entry per profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Loads(pub BTreeMap<u32, ModelLoad>);

impl Loads {
    pub fn from_assignment(tasks: &[Task], assignment: &Assignment, profiles: &ProfileSet) -> Self {
        let mut sums: BTreeMap<u32, (usize, f64)> =
            profiles.models().iter().map(|m| (m.model_id, (0, 0.0))).collect();
        for (t, &(_, m)) in tasks.iter().zip(assignment.entries()) {
            let e = sums.entry(m).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += t.latent_quality;
        }
        Loads(
            sums.into_iter()
                .map(|(m, (n, s))| {
                    let mean = if n > 0 { s / n as f64 } else { 0.0 };
                    (
                        m,
                        ModelLoad {
                            count: n,
                            mean_latent_quality: mean,
                        },
                    )
                })
                .collect(),
        )
    }

    /// Loads with identical latent quality on every model.
    pub fn uniform_quality(counts: &[(u32, usize)], latent_quality: f64) -> Self {
        Loads(
            counts
                .iter()
                .map(|&(m, n)| {
                    (
                        m,
                        ModelLoad {
                            count: n,
                            mean_latent_quality: latent_quality,
                        },
                    )
                })
                .collect(),
        )
    }

    pub fn total(&self) -> usize {
        self.0.values().map(|l| l.count).sum()
    }

    pub fn get(&self, model_id: u32) -> ModelLoad {
        self.0.get(&model_id).copied().unwrap_or(ModelLoad {
            count: 0,
            mean_latent_quality: 0.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub model_id: u32,
    pub steps: u32,
    /// Resource share in TFLOPS.
    pub gamma: f64,
}

/// Steps and resource share for every deployed model, ordered by model id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub entries: Vec<PlanEntry>,
}

impl AllocationPlan {
    pub fn entry(&self, model_id: u32) -> Option<&PlanEntry> {
        self.entries.iter().find(|e| e.model_id == model_id)
    }

    pub fn total_gamma(&self) -> f64 {
        self.entries.iter().map(|e| e.gamma).sum()
    }
}

/// Validates a plan against the step-set, budget and positive-share constraints.
pub fn check_plan(
    plan: &AllocationPlan,
    loads: &Loads,
    profiles: &ProfileSet,
    weights: &UtilityWeights,
) -> Result<()> {
    let violation = |constraint, detail: String| SimError::ConstraintViolation { constraint, detail };
    if plan.entries.len() != profiles.len()
        || plan
            .entries
            .iter()
            .zip(profiles.models())
            .any(|(e, p)| e.model_id != p.model_id)
    {
        return Err(violation(
            Constraint::StepSet,
            "plan does not cover every deployed model in id order".into(),
        ));
    }
    for (e, p) in plan.entries.iter().zip(profiles.models()) {
        if !p.admits(e.steps) {
            return Err(violation(
                Constraint::StepSet,
                format!("model {} has inadmissible steps {}", e.model_id, e.steps),
            ));
        }
        if !(e.gamma >= 0.0 && e.gamma.is_finite()) {
            return Err(violation(
                Constraint::ResourceBudget,
                format!("model {} has invalid share {}", e.model_id, e.gamma),
            ));
        }
        if loads.get(e.model_id).count > 0 && e.gamma <= 0.0 {
            return Err(violation(
                Constraint::PositiveShare,
                format!("loaded model {} has no resource", e.model_id),
            ));
        }
    }
    let total = plan.total_gamma();
    if total > weights.total_resource {
        return Err(violation(
            Constraint::ResourceBudget,
            format!("shares sum to {total} > {}", weights.total_resource),
        ));
    }
    Ok(())
}

/// Expected utility of a plan. Errors if the plan is infeasible or no task is loaded.
pub fn slot_utility(
    plan: &AllocationPlan,
    loads: &Loads,
    profiles: &ProfileSet,
    weights: &UtilityWeights,
) -> Result<f64> {
    check_plan(plan, loads, profiles, weights)?;
    let inst = Instance::new(loads, profiles, *weights)?;
    let steps: Vec<u32> = plan.entries.iter().map(|e| e.steps).collect();
    let gamma: Vec<f64> = plan.entries.iter().map(|e| e.gamma).collect();
    Ok(inst.utility(&steps, &gamma))
}

/// Largest per-task delay over loaded models.
pub fn max_delay(plan: &AllocationPlan, loads: &Loads, profiles: &ProfileSet, total_resource: f64) -> f64 {
    plan.entries
        .iter()
        .zip(profiles.models())
        .filter(|(e, _)| loads.get(e.model_id).count > 0)
        .map(|(e, p)| total_resource / e.gamma * p.latency_curve.full_resource(e.steps))
        .fold(0.0, f64::max)
}

/// Shrinks shares by relative ulps until their sum, taken in index order,
/// no longer exceeds `total`. Rounding in `k * total / n` style splits can
/// otherwise overshoot the budget by one ulp.
pub(crate) fn fit_budget(gamma: &mut [f64], total: f64) {
    while gamma.iter().sum::<f64>() > total {
        for g in gamma.iter_mut() {
            *g *= 1.0 - f64::EPSILON;
        }
    }
}

pub(crate) fn within_bound(delay: f64, bound: f64) -> bool {
    delay <= bound * (1.0 + REL_SLACK)
}

/// Precomputed view of one slot's allocation problem, indexed by profile position.
pub(crate) struct Instance<'a> {
    pub profiles: &'a ProfileSet,
    pub weights: UtilityWeights,
    pub counts: Vec<usize>,
    pub qualities: Vec<f64>,
    pub total_tasks: usize,
    /// Positions of models with at least one task.
    pub loaded: Vec<usize>,
}

impl<'a> Instance<'a> {
    pub fn new(loads: &Loads, profiles: &'a ProfileSet, weights: UtilityWeights) -> Result<Self> {
        let counts: Vec<usize> = profiles
            .models()
            .iter()
            .map(|m| loads.get(m.model_id).count)
            .collect();
        if let Some(unknown) = loads.0.keys().find(|id| profiles.get(**id).is_none()) {
            return Err(SimError::Invariant(format!("load for unknown model {unknown}")));
        }
        let qualities = profiles
            .models()
            .iter()
            .map(|m| loads.get(m.model_id).mean_latent_quality)
            .collect();
        let total_tasks = counts.iter().sum();
        if total_tasks == 0 {
            return Err(SimError::Usage("allocation needs at least one task".into()));
        }
        let loaded = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
        Ok(Instance {
            profiles,
            weights,
            counts,
            qualities,
            total_tasks,
            loaded,
        })
    }

    pub fn model(&self, i: usize) -> &crate::profiles::ModelProfile {
        &self.profiles.models()[i]
    }

    /// Latency of model `i` at full resource.
    pub fn full_latency(&self, i: usize, steps: u32) -> f64 {
        self.model(i).latency_curve.full_resource(steps)
    }

    /// Loaded model `i`'s contribution to the utility sum (before dividing by N).
    pub fn term(&self, i: usize, steps: u32, gamma: f64) -> f64 {
        let p = self.model(i);
        let score = p.score_curve.expected(self.qualities[i], steps);
        let delay = self.weights.total_resource / gamma * p.latency_curve.full_resource(steps);
        self.counts[i] as f64 * (score - self.weights.omega * delay)
    }

    pub fn utility(&self, steps: &[u32], gamma: &[f64]) -> f64 {
        let sum: f64 = self
            .loaded
            .iter()
            .map(|&i| self.term(i, steps[i], gamma[i]))
            .sum();
        sum / self.total_tasks as f64
    }

    pub fn max_delay(&self, steps: &[u32], gamma: &[f64]) -> f64 {
        self.loaded
            .iter()
            .map(|&i| self.weights.total_resource / gamma[i] * self.full_latency(i, steps[i]))
            .fold(0.0, f64::max)
    }

    pub fn plan(&self, steps: &[u32], gamma: &[f64]) -> AllocationPlan {
        AllocationPlan {
            entries: self
                .profiles
                .models()
                .iter()
                .enumerate()
                .map(|(i, m)| PlanEntry {
                    model_id: m.model_id,
                    steps: steps[i],
                    gamma: gamma[i],
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{default_profiles, LatencyCurve, ModelProfile, ScoreCurve, Tier};

    pub(crate) fn flat_model(id: u32, steps: Vec<u32>) -> ModelProfile {
        ModelProfile {
            model_id: id,
            name: format!("m{id}"),
            tier: Tier::Medium,
            step_options: steps,
            step_fixed: None,
            score_curve: ScoreCurve {
                base_offset: 0.0,
                gain: 0.0,
                tau: 1.0,
                ref_steps: 1,
                noise_sigma: 0.0,
            },
            latency_curve: LatencyCurve {
                intercept: 5.0,
                slope: 0.0001,
            },
            param_count: 1.0,
            flops_per_image: None,
        }
    }

    #[test]
    fn single_task_arithmetic() {
        // score 30, full-resource latency 5 s, whole budget
        let mut m = flat_model(0, vec![1]);
        m.latency_curve = LatencyCurve {
            intercept: 4.9,
            slope: 0.1,
        };
        let profiles = ProfileSet::new(vec![m]).unwrap();
        let loads = Loads::uniform_quality(&[(0, 1)], 30.0);
        let plan = AllocationPlan {
            entries: vec![PlanEntry {
                model_id: 0,
                steps: 1,
                gamma: 100.0,
            }],
        };
        let u = slot_utility(&plan, &loads, &profiles, &UtilityWeights::default()).unwrap();
        assert!((u - 29.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_plans_name_the_constraint() {
        let profiles = ProfileSet::new(default_profiles()).unwrap();
        let loads = Loads::uniform_quality(&[(0, 2), (1, 3), (2, 0)], 31.0);
        let w = UtilityWeights::default();
        let ok = AllocationPlan {
            entries: vec![
                PlanEntry { model_id: 0, steps: 1, gamma: 30.0 },
                PlanEntry { model_id: 1, steps: 26, gamma: 70.0 },
                PlanEntry { model_id: 2, steps: 10, gamma: 0.0 },
            ],
        };
        assert!(slot_utility(&ok, &loads, &profiles, &w).is_ok());

        let mut bad_step = ok.clone();
        bad_step.entries[1].steps = 27;
        assert!(matches!(
            slot_utility(&bad_step, &loads, &profiles, &w),
            Err(SimError::ConstraintViolation { constraint: Constraint::StepSet, .. })
        ));

        let mut over = ok.clone();
        over.entries[2].gamma = 5.0;
        assert!(matches!(
            slot_utility(&over, &loads, &profiles, &w),
            Err(SimError::ConstraintViolation { constraint: Constraint::ResourceBudget, .. })
        ));

        let mut starved = ok.clone();
        starved.entries[0].gamma = 0.0;
        assert!(matches!(
            slot_utility(&starved, &loads, &profiles, &w),
            Err(SimError::ConstraintViolation { constraint: Constraint::PositiveShare, .. })
        ));
    }

    #[test]
    fn doubling_share_halves_delay_term() {
        let profiles = ProfileSet::new(default_profiles()).unwrap();
        let loads = Loads::uniform_quality(&[(0, 0), (1, 10), (2, 0)], 31.0);
        let mut w = UtilityWeights::default();
        let plan = |g: f64| AllocationPlan {
            entries: vec![
                PlanEntry { model_id: 0, steps: 1, gamma: 0.0 },
                PlanEntry { model_id: 1, steps: 30, gamma: g },
                PlanEntry { model_id: 2, steps: 10, gamma: 0.0 },
            ],
        };
        let score_only = {
            w.omega = 0.0;
            slot_utility(&plan(40.0), &loads, &profiles, &w).unwrap()
        };
        w.omega = 0.2;
        let at_40 = slot_utility(&plan(40.0), &loads, &profiles, &w).unwrap();
        let at_80 = slot_utility(&plan(80.0), &loads, &profiles, &w).unwrap();
        let (d40, d80) = (score_only - at_40, score_only - at_80);
        assert!((d80 - 0.5 * d40).abs() < 1e-12 * d40.abs().max(1.0));
        assert!(at_80 > at_40);
    }

    #[test]
    fn loads_from_assignment() {
        let profiles = ProfileSet::new(default_profiles()).unwrap();
        let tasks: Vec<Task> = [30.0, 32.0, 29.0]
            .iter()
            .enumerate()
            .map(|(i, &q)| Task {
                task_id: i as u64,
                category_id: 0,
                latent_quality: q,
                arrival_slot: 0,
            })
            .collect();
        let a = Assignment::from_entries(vec![(0, 1), (1, 1), (2, 0)]);
        let loads = Loads::from_assignment(&tasks, &a, &profiles);
        assert_eq!(loads.get(1).count, 2);
        assert_eq!(loads.get(1).mean_latent_quality, 31.0);
        assert_eq!(loads.get(0).mean_latent_quality, 29.0);
        assert_eq!(loads.get(2).count, 0);
        assert_eq!(loads.total(), 3);
    }
}
