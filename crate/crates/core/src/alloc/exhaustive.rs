//! Brute-force optimum over a discretized plan space.
//!
//! Loaded models split the budget into `grid_points * L` equal quanta (L is
//! the number of loaded models), each model holding at least one quantum.
//! With `grid_points = 1` the only composition is the equal split.

use super::{fit_budget, within_bound, AllocationPlan, Instance, Loads, UtilityWeights};
use crate::error::{Result, SimError};
use crate::profiles::ProfileSet;

/// Largest number of (steps, composition) candidates the search will visit.
pub const SEARCH_SPACE_LIMIT: u128 = 10_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of candidates `exhaustive_search` would enumerate.
pub fn search_space_size(loads: &Loads, profiles: &ProfileSet, grid_points: usize) -> u128 {
    let loaded: Vec<_> = profiles
        .models()
        .iter()
        .filter(|m| loads.get(m.model_id).count > 0)
        .collect();
    if loaded.is_empty() || grid_points == 0 {
        return 0;
    }
    let steps: u128 = loaded.iter().map(|m| m.steps().len() as u128).product();
    let l = loaded.len() as u128;
    let quanta = grid_points as u128 * l;
    steps.saturating_mul(binomial(quanta - 1, l - 1))
}

/// Calls `visit` with every composition of `total` into `parts` positive
/// integers, in lexicographic order.
fn for_each_composition(total: usize, parts: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(remaining: usize, parts_left: usize, buf: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if parts_left == 1 {
            buf.push(remaining);
            visit(buf);
            buf.pop();
            return;
        }
        for k in 1..=remaining - (parts_left - 1) {
            buf.push(k);
            rec(remaining - k, parts_left - 1, buf, visit);
            buf.pop();
        }
    }
    let mut buf = Vec::with_capacity(parts);
    rec(total, parts, &mut buf, visit);
}

/// Globally optimal plan over the step sets and the resource grid.
///
/// The utility is a sum of per-model terms and the latency bound is a
/// per-model condition, so for each composition the best step of every model
/// can be chosen on its own. This visits the same candidate set as a plain
/// product enumeration at a fraction of the cost.
///
/// Ties go to the lexicographically smallest `(steps, shares)` plan.
pub fn exhaustive_search(
    loads: &Loads,
    profiles: &ProfileSet,
    weights: &UtilityWeights,
    grid_points: usize,
    latency_bound: f64,
) -> Result<(AllocationPlan, f64)> {
    if grid_points == 0 {
        return Err(SimError::Usage("resource grid needs at least one point".into()));
    }
    let inst = Instance::new(loads, profiles, *weights)?;
    let size = search_space_size(loads, profiles, grid_points);
    if size > SEARCH_SPACE_LIMIT {
        return Err(SimError::SearchSpaceTooLarge {
            size,
            limit: SEARCH_SPACE_LIMIT,
        });
    }

    let n = inst.counts.len();
    let loaded = inst.loaded.clone();
    let quanta = grid_points * loaded.len();
    let quantum = weights.total_resource / quanta as f64;

    let mut steps: Vec<u32> = (0..n).map(|i| inst.model(i).min_steps()).collect();
    let mut gamma = vec![0.0; n];
    // (steps, composition, shares, utility) of the best plan so far
    type Candidate = (Vec<u32>, Vec<usize>, Vec<f64>, f64);
    let mut best: Option<Candidate> = None;

    for_each_composition(quanta, loaded.len(), &mut |parts| {
        gamma.iter_mut().for_each(|g| *g = 0.0);
        for (&i, &k) in loaded.iter().zip(parts) {
            gamma[i] = k as f64 * quantum;
        }
        fit_budget(&mut gamma, weights.total_resource);
        for &i in &loaded {
            let mut pick: Option<(u32, f64)> = None;
            for &s in inst.model(i).steps() {
                let delay = weights.total_resource / gamma[i] * inst.full_latency(i, s);
                if !within_bound(delay, latency_bound) {
                    continue;
                }
                let term = inst.term(i, s, gamma[i]);
                if pick.is_none_or(|(_, t)| term > t) {
                    pick = Some((s, term));
                }
            }
            match pick {
                Some((s, _)) => steps[i] = s,
                None => return,
            }
        }
        let u = inst.utility(&steps, &gamma);
        let better = match &best {
            None => true,
            Some((bs, bp, _, bu)) => u > *bu || (u == *bu && (steps.as_slice(), parts) < (bs.as_slice(), bp.as_slice())),
        };
        if better {
            best = Some((steps.clone(), parts.to_vec(), gamma.clone(), u));
        }
    });

    match best {
        Some((s, _, g, u)) => Ok((inst.plan(&s, &g), u)),
        None => Err(SimError::Infeasible {
            binding: format!("no grid plan keeps every task under the {latency_bound} s latency bound"),
            slot: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::tests::flat_model;
    use crate::profiles::default_profiles;

    #[test]
    fn compositions_enumerated_in_order() {
        let mut seen = Vec::new();
        for_each_composition(4, 2, &mut |c| seen.push(c.to_vec()));
        assert_eq!(seen, vec![vec![1, 3], vec![2, 2], vec![3, 1]]);
        let mut count = 0;
        for_each_composition(60, 3, &mut |_| count += 1);
        assert_eq!(count as u128, binomial(59, 2));
    }

    #[test]
    fn one_model_gets_everything() {
        let profiles = ProfileSet::new(vec![default_profiles().remove(1)]).unwrap();
        let loads = Loads::uniform_quality(&[(1, 10)], 31.0);
        let w = UtilityWeights::default();
        let (plan, u) = exhaustive_search(&loads, &profiles, &w, 20, 60.0).unwrap();
        assert_eq!(plan.entries[0].gamma, 100.0);
        let p = profiles.get(1).unwrap();
        let best_step = p
            .steps()
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let f = |s: u32| p.score_curve.expected(31.0, s) - 0.2 * p.latency_curve.full_resource(s);
                f(a).partial_cmp(&f(b)).unwrap()
            })
            .unwrap();
        assert_eq!(plan.entries[0].steps, best_step);
        assert!(u.is_finite());
    }

    #[test]
    fn identical_models_split_symmetrically() {
        let profiles = ProfileSet::new(vec![flat_model(0, vec![1, 2]), flat_model(1, vec![1, 2])]).unwrap();
        let loads = Loads::uniform_quality(&[(0, 10), (1, 10)], 30.0);
        let (plan, _) =
            exhaustive_search(&loads, &profiles, &UtilityWeights::default(), 20, 1e9).unwrap();
        let quantum = 100.0 / 40.0;
        assert!((plan.entries[0].gamma - plan.entries[1].gamma).abs() <= quantum + 1e-9);
    }

    /// Plain product enumeration over steps and compositions.
    fn naive(loads: &Loads, profiles: &ProfileSet, w: &UtilityWeights, grid: usize, bound: f64) -> Option<f64> {
        let inst = Instance::new(loads, profiles, *w).unwrap();
        let quanta = grid * inst.loaded.len();
        let mut best: Option<f64> = None;
        let step_sets: Vec<&[u32]> = inst.loaded.iter().map(|&i| inst.model(i).steps()).collect();
        let mut combos: Vec<Vec<u32>> = vec![vec![]];
        for set in &step_sets {
            combos = combos
                .iter()
                .flat_map(|c| set.iter().map(move |&s| [c.clone(), vec![s]].concat()))
                .collect();
        }
        for_each_composition(quanta, inst.loaded.len(), &mut |parts| {
            let mut gamma = vec![0.0; inst.counts.len()];
            for (&i, &k) in inst.loaded.iter().zip(parts) {
                gamma[i] = k as f64 * w.total_resource / quanta as f64;
            }
            fit_budget(&mut gamma, w.total_resource);
            for combo in &combos {
                let mut steps: Vec<u32> = (0..inst.counts.len()).map(|i| inst.model(i).min_steps()).collect();
                for (&i, &s) in inst.loaded.iter().zip(combo) {
                    steps[i] = s;
                }
                if within_bound(inst.max_delay(&steps, &gamma), bound) {
                    let u = inst.utility(&steps, &gamma);
                    best = Some(best.map_or(u, |b: f64| b.max(u)));
                }
            }
        });
        best
    }

    #[test]
    fn matches_product_enumeration() {
        let profiles = ProfileSet::new(default_profiles()).unwrap();
        let w = UtilityWeights::default();
        let cases = [
            (vec![(0, 30), (1, 50), (2, 20)], 6, 60.0),
            (vec![(0, 0), (1, 70), (2, 30)], 8, 60.0),
            (vec![(0, 10), (1, 10), (2, 80)], 5, 40.0),
            (vec![(0, 5), (1, 60), (2, 35)], 4, 1e9),
        ];
        for (counts, grid, bound) in cases {
            let loads = Loads::uniform_quality(&counts, 31.0);
            let (_, u) = exhaustive_search(&loads, &profiles, &w, grid, bound).unwrap();
            let reference = naive(&loads, &profiles, &w, grid, bound).unwrap();
            assert!((u - reference).abs() <= 1e-12 * reference.abs(), "{counts:?}: {u} vs {reference}");
        }
    }

    #[test]
    fn guard_rejects_huge_grids() {
        let profiles = ProfileSet::new(default_profiles()).unwrap();
        let loads = Loads::uniform_quality(&[(0, 1), (1, 1), (2, 1)], 31.0);
        let err = exhaustive_search(&loads, &profiles, &UtilityWeights::default(), 2000, 60.0)
            .unwrap_err();
        assert!(matches!(err, SimError::SearchSpaceTooLarge { .. }));
    }

    #[test]
    fn single_grid_point_is_equal_split() {
        let profiles = ProfileSet::new(default_profiles()).unwrap();
        let loads = Loads::uniform_quality(&[(0, 3), (1, 3), (2, 3)], 31.0);
        let (plan, _) =
            exhaustive_search(&loads, &profiles, &UtilityWeights::default(), 1, 1e9).unwrap();
        for e in &plan.entries {
            assert!((e.gamma - 100.0 / 3.0).abs() < 1e-12);
        }
    }
}
