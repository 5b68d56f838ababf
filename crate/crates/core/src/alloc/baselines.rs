//! Equal-allocation and optimal-step baselines.

use super::{fit_budget, within_bound, AllocationPlan, Instance, Loads, UtilityWeights};
use crate::error::{Result, SimError};
use crate::profiles::ProfileSet;

/// Continuous optimal shares for fixed full-resource latencies.
///
/// Minimizes `sum_i loads[i] * latency[i] / share_i` subject to the shares
/// summing to `total` and every per-task delay `total * latency[i] / share_i`
/// staying within `bound`. The solution is `max(lower_i, lambda * sqrt(loads[i] * latency[i]))`
/// with `lambda` set by water-filling. Returns `None` when the bound cannot be met.
pub fn water_fill(loads: &[f64], latency: &[f64], total: f64, bound: f64) -> Option<Vec<f64>> {
    let lower: Vec<f64> = latency.iter().map(|d| total * d / bound).collect();
    let lower_sum: f64 = lower.iter().sum();
    if !within_bound(lower_sum, total) {
        return None;
    }
    let weight: Vec<f64> = loads.iter().zip(latency).map(|(n, d)| (n * d).sqrt()).collect();
    let mut pinned = vec![false; loads.len()];
    let mut shares = loop {
        let pinned_sum: f64 = (0..loads.len()).filter(|&i| pinned[i]).map(|i| lower[i]).sum();
        let free_weight: f64 = (0..loads.len()).filter(|&i| !pinned[i]).map(|i| weight[i]).sum();
        if free_weight <= 0.0 {
            // every model sits on its latency floor; hand out the slack pro rata
            let scale = total / pinned_sum;
            break lower.iter().map(|l| l * scale).collect::<Vec<f64>>();
        }
        let lambda = (total - pinned_sum) / free_weight;
        let newly: Vec<usize> = (0..loads.len())
            .filter(|&i| !pinned[i] && lambda * weight[i] < lower[i])
            .collect();
        if newly.is_empty() {
            break (0..loads.len())
                .map(|i| if pinned[i] { lower[i] } else { lambda * weight[i] })
                .collect();
        }
        for i in newly {
            pinned[i] = true;
        }
    };
    fit_budget(&mut shares, total);
    Some(shares)
}

/// Splits the budget equally over every deployed model and picks, per
/// loaded model, the step that maximizes that model's own utility term.
pub fn equal_allocation(
    loads: &Loads,
    profiles: &ProfileSet,
    weights: &UtilityWeights,
    latency_bound: f64,
) -> Result<AllocationPlan> {
    let inst = Instance::new(loads, profiles, *weights)?;
    let mut gamma = vec![weights.total_resource / profiles.len() as f64; profiles.len()];
    fit_budget(&mut gamma, weights.total_resource);
    let share = gamma[0];
    let mut steps: Vec<u32> = profiles.models().iter().map(|m| m.min_steps()).collect();
    for &i in &inst.loaded {
        let mut best: Option<(u32, f64)> = None;
        for &s in inst.model(i).steps() {
            let delay = weights.total_resource / share * inst.full_latency(i, s);
            if !within_bound(delay, latency_bound) {
                continue;
            }
            let term = inst.term(i, s, share);
            if best.is_none_or(|(_, b)| term > b) {
                best = Some((s, term));
            }
        }
        steps[i] = best
            .ok_or_else(|| SimError::Infeasible {
                binding: format!(
                    "model {} cannot meet the {latency_bound} s latency bound with an equal share",
                    inst.model(i).model_id
                ),
                slot: None,
            })?
            .0;
    }
    Ok(inst.plan(&steps, &gamma))
}

/// Runs every loaded model at its largest step and allocates shares optimally for those steps.
pub fn optimal_step(
    loads: &Loads,
    profiles: &ProfileSet,
    weights: &UtilityWeights,
    latency_bound: f64,
) -> Result<AllocationPlan> {
    let inst = Instance::new(loads, profiles, *weights)?;
    let steps: Vec<u32> = profiles
        .models()
        .iter()
        .enumerate()
        .map(|(i, m)| if inst.counts[i] > 0 { m.max_steps() } else { m.min_steps() })
        .collect();
    let counts: Vec<f64> = inst.loaded.iter().map(|&i| inst.counts[i] as f64).collect();
    let latency: Vec<f64> = inst
        .loaded
        .iter()
        .map(|&i| inst.full_latency(i, steps[i]))
        .collect();
    let shares = water_fill(&counts, &latency, weights.total_resource, latency_bound).ok_or_else(|| {
        SimError::Infeasible {
            binding: format!(
                "maximum steps cannot meet the {latency_bound} s latency bound under any resource split"
            ),
            slot: None,
        }
    })?;
    let mut gamma = vec![0.0; profiles.len()];
    for (k, &i) in inst.loaded.iter().enumerate() {
        gamma[i] = shares[k];
    }
    Ok(inst.plan(&steps, &gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::{exhaustive_search, slot_utility};
    use crate::profiles::default_profiles;

    fn objective(n: &[f64], d: &[f64], g: &[f64]) -> f64 {
        n.iter().zip(d).zip(g).map(|((n, d), g)| n * d / g).sum()
    }

    #[test]
    fn water_fill_matches_sqrt_rule_when_unbounded() {
        let n = [20.0, 50.0, 30.0];
        let d = [0.35, 6.02, 24.2];
        let g = water_fill(&n, &d, 100.0, f64::INFINITY).unwrap();
        let w: Vec<f64> = n.iter().zip(&d).map(|(a, b)| (a * b).sqrt()).collect();
        let ws: f64 = w.iter().sum();
        for (gi, wi) in g.iter().zip(&w) {
            assert!((gi - 100.0 * wi / ws).abs() < 1e-10);
        }
    }

    #[test]
    fn water_fill_beats_perturbations_under_bound() {
        let n = [30.0, 59.0, 11.0];
        let d = [0.35, 9.54, 38.6];
        let bound = 60.0;
        let g = water_fill(&n, &d, 100.0, bound).unwrap();
        assert!((g.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        for (gi, di) in g.iter().zip(&d) {
            assert!(100.0 * di / gi <= bound * (1.0 + 1e-9));
        }
        let base = objective(&n, &d, &g);
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let mut h = g.clone();
                h[i] -= 0.01;
                h[j] += 0.01;
                let feasible = h.iter().zip(&d).all(|(hi, di)| 100.0 * di / hi <= bound);
                if feasible {
                    assert!(objective(&n, &d, &h) >= base - 1e-9);
                }
            }
        }
        assert!(water_fill(&n, &d, 100.0, 40.0).is_none());
    }

    #[test]
    fn equal_split_over_all_models() {
        let profiles = ProfileSet::new(default_profiles()).unwrap();
        let loads = Loads::uniform_quality(&[(0, 20), (1, 50), (2, 30)], 31.0);
        let w = UtilityWeights::default();
        let plan = equal_allocation(&loads, &profiles, &w, 60.0).unwrap();
        for e in &plan.entries {
            assert!((e.gamma - 100.0 / 3.0).abs() < 1e-12);
        }
        let (_, oracle) = exhaustive_search(&loads, &profiles, &w, 20, 60.0).unwrap();
        assert!(slot_utility(&plan, &loads, &profiles, &w).unwrap() <= oracle);
    }

    #[test]
    fn optimal_step_uses_max_steps() {
        let profiles = ProfileSet::new(default_profiles()).unwrap();
        let loads = Loads::uniform_quality(&[(0, 20), (1, 50), (2, 30)], 31.0);
        let w = UtilityWeights::default();
        let plan = optimal_step(&loads, &profiles, &w, 60.0).unwrap();
        for (e, p) in plan.entries.iter().zip(profiles.models()) {
            assert_eq!(e.steps, p.max_steps());
        }
        let (_, oracle) = exhaustive_search(&loads, &profiles, &w, 20, 60.0).unwrap();
        assert!(slot_utility(&plan, &loads, &profiles, &w).unwrap() <= oracle);
        let err = optimal_step(&loads, &profiles, &w, 30.0).unwrap_err();
        assert!(matches!(err, SimError::Infeasible { .. }));
    }
}
