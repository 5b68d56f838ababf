//! Simulated annealing over per-model steps and continuous resource shares.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fit_budget, within_bound, AllocationPlan, Instance, Loads, UtilityWeights};
use crate::error::{Result, SimError};
use crate::profiles::ProfileSet;
use crate::rng::{self, Stream};

/// Where the geometric cooling step sits in the loop nest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoolingMode {
    /// Cool once per outer iteration, after `k_m` candidates.
    #[default]
    PerOuter,
    /// Cool after every candidate, inside the inner loop.
    PerInner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaParams {
    pub initial_temperature: f64,
    pub min_temperature: f64,
    pub cooling_coefficient: f64,
    pub inner_iterations: usize,
    /// Cap on per-task delay, in seconds.
    pub latency_bound: f64,
    /// Largest resource transfer per move, as a fraction of the total.
    pub resource_move_scale: f64,
    pub cooling: CoolingMode,
    pub seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            initial_temperature: 5.0,
            min_temperature: 0.01,
            cooling_coefficient: 0.95,
            inner_iterations: 50,
            latency_bound: 60.0,
            resource_move_scale: 0.05,
            cooling: CoolingMode::PerOuter,
            seed: 0,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        let beta = self.cooling_coefficient;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(SimError::config("sa.cooling_coefficient", "must lie in (0, 1)"));
        }
        if !(self.min_temperature > 0.0 && self.min_temperature < self.initial_temperature) {
            return Err(SimError::config(
                "sa.min_temperature",
                "must satisfy 0 < min_temperature < initial_temperature",
            ));
        }
        if !self.initial_temperature.is_finite() {
            return Err(SimError::config("sa.initial_temperature", "must be finite"));
        }
        if self.inner_iterations == 0 {
            return Err(SimError::config("sa.inner_iterations", "must be >= 1"));
        }
        if !(self.latency_bound > 0.0) {
            return Err(SimError::config("sa.latency_bound", "must be > 0"));
        }
        if !(self.resource_move_scale > 0.0 && self.resource_move_scale <= 1.0) {
            return Err(SimError::config("sa.resource_move_scale", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Metropolis rule: take every improvement, take a worsening `delta` with
/// probability `exp(delta / temperature)`.
pub fn metropolis_accept<R: Rng + ?Sized>(delta: f64, temperature: f64, rng: &mut R) -> bool {
    if delta > 0.0 {
        return true;
    }
    let p: f64 = rng.random();
    p < (delta / temperature).exp()
}

/// Temperatures at which the outer loop runs, under per-outer cooling.
pub fn cooling_schedule(params: &SaParams) -> impl Iterator<Item = f64> + '_ {
    std::iter::successors(Some(params.initial_temperature), move |t| {
        Some(t * params.cooling_coefficient)
    })
    .take_while(move |t| *t > params.min_temperature)
}

#[derive(Clone)]
struct State {
    step_idx: Vec<usize>,
    gamma: Vec<f64>,
}

impl State {
    fn steps(&self, inst: &Instance) -> Vec<u32> {
        self.step_idx
            .iter()
            .enumerate()
            .map(|(i, &k)| inst.model(i).steps()[k])
            .collect()
    }
}

/// Resource shares of loaded models proportional to `weight(i)`, summing to the total.
fn proportional(inst: &Instance, weight: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut gamma = vec![0.0; inst.counts.len()];
    let total: f64 = inst.loaded.iter().map(|&i| weight(i)).sum();
    for &i in &inst.loaded {
        gamma[i] = inst.weights.total_resource * weight(i) / total;
    }
    fit_budget(&mut gamma, inst.weights.total_resource);
    gamma
}

fn initial_state(inst: &Instance, latency_bound: f64) -> Result<State> {
    let n = inst.counts.len();
    let mid = State {
        step_idx: (0..n).map(|i| (inst.model(i).steps().len() - 1) / 2).collect(),
        gamma: proportional(inst, |i| inst.counts[i] as f64 * inst.model(i).latency_curve.slope),
    };
    let min_steps = |gamma: Vec<f64>| State {
        step_idx: vec![0; n],
        gamma,
    };
    let candidates = [
        mid.clone(),
        min_steps(mid.gamma.clone()),
        // equalizes per-task delays, minimizing the largest one
        min_steps(proportional(inst, |i| inst.full_latency(i, inst.model(i).min_steps()))),
    ];
    let mut best_delay = f64::INFINITY;
    for s in candidates {
        let d = inst.max_delay(&s.steps(inst), &s.gamma);
        if within_bound(d, latency_bound) {
            return Ok(s);
        }
        best_delay = best_delay.min(d);
    }
    Err(SimError::Infeasible {
        binding: format!(
            "latency bound {latency_bound} s cannot be met; minimum steps with delay-equalizing shares still give {best_delay:.4} s per task"
        ),
        slot: None,
    })
}

fn neighbor<R: Rng + ?Sized>(inst: &Instance, state: &State, scale: f64, rng: &mut R) -> Option<State> {
    let step_movable: Vec<usize> = inst
        .loaded
        .iter()
        .copied()
        .filter(|&i| inst.model(i).steps().len() > 1)
        .collect();
    let can_shift = inst.loaded.len() >= 2;
    let step_move = match (step_movable.is_empty(), can_shift) {
        (true, false) => return None,
        (false, false) => true,
        (true, true) => false,
        (false, true) => rng.random_bool(0.5),
    };
    let mut next = state.clone();
    if step_move {
        let i = step_movable[rng.random_range(0..step_movable.len())];
        let len = inst.model(i).steps().len();
        let k = next.step_idx[i];
        let up = rng.random_bool(0.5);
        next.step_idx[i] = match (up, k) {
            (true, k) if k + 1 < len => k + 1,
            (true, k) => k - 1,
            (false, 0) => 1,
            (false, k) => k - 1,
        };
    } else {
        let a = rng.random_range(0..inst.loaded.len());
        let mut b = rng.random_range(0..inst.loaded.len() - 1);
        if b >= a {
            b += 1;
        }
        let (from, to) = (inst.loaded[a], inst.loaded[b]);
        let total = inst.weights.total_resource;
        // (0, 1] so a move is never empty
        let u = 1.0 - rng.random::<f64>();
        let floor = total * 1e-9;
        let amount = (u * scale * total).min(next.gamma[from] - floor).max(0.0);
        next.gamma[from] -= amount;
        next.gamma[to] += amount;
        let sum: f64 = inst.loaded.iter().map(|&i| next.gamma[i]).sum();
        for &i in &inst.loaded {
            next.gamma[i] *= total / sum;
        }
        fit_budget(&mut next.gamma, total);
    }
    Some(next)
}

/// Searches steps and shares by simulated annealing.
///
/// Returns the best feasible plan visited and its expected utility. Models
/// without tasks get no resource and their smallest step.
pub fn anneal(
    loads: &Loads,
    profiles: &ProfileSet,
    weights: &UtilityWeights,
    params: &SaParams,
) -> Result<(AllocationPlan, f64)> {
    params.validate()?;
    let inst = Instance::new(loads, profiles, *weights)?;
    let mut rng = rng::stream(params.seed, Stream::Anneal, &[]);

    let mut current = initial_state(&inst, params.latency_bound)?;
    let mut current_u = inst.utility(&current.steps(&inst), &current.gamma);
    let mut best = current.clone();
    let mut best_u = current_u;

    let mut temperature = params.initial_temperature;
    while temperature > params.min_temperature {
        for _ in 0..params.inner_iterations {
            let Some(candidate) = neighbor(&inst, &current, params.resource_move_scale, &mut rng)
            else {
                break;
            };
            let steps = candidate.steps(&inst);
            if within_bound(inst.max_delay(&steps, &candidate.gamma), params.latency_bound) {
                let u = inst.utility(&steps, &candidate.gamma);
                if metropolis_accept(u - current_u, temperature, &mut rng) {
                    current = candidate;
                    current_u = u;
                    if current_u > best_u {
                        best = current.clone();
                        best_u = current_u;
                    }
                }
            }
            if params.cooling == CoolingMode::PerInner {
                temperature *= params.cooling_coefficient;
            }
        }
        if params.cooling == CoolingMode::PerOuter {
            temperature *= params.cooling_coefficient;
        }
    }

    Ok((inst.plan(&best.steps(&inst), &best.gamma), best_u))
}
