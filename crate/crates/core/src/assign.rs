//! Model assignment: the probabilistic interval-mass rule and the direct and
//! random baselines.
//!
//! Under the probabilistic rule a category is sent to the small, medium or
//! large model with the probability that its medium-model score law falls
//! below `x1`, between `x1` and `x2`, or above `x2`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Constraint, Result, SimError};
use crate::gaussian::interval_mass;
use crate::profiles::{CategoryProfile, CategorySet, ProfileSet, Tier};
use crate::workload::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentKind {
    Probabilistic,
    Direct,
    Random,
}

impl AssignmentKind {
    pub const ALL: [AssignmentKind; 3] = [
        AssignmentKind::Probabilistic,
        AssignmentKind::Direct,
        AssignmentKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AssignmentKind::Probabilistic => "probabilistic",
            AssignmentKind::Direct => "direct",
            AssignmentKind::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Score thresholds splitting the medium-model score axis into three levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub x1: f64,
    pub x2: f64,
}

impl Thresholds {
    pub fn new(x1: f64, x2: f64) -> Result<Self> {
        let t = Thresholds { x1, x2 };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<()> {
        if self.x1 < self.x2 && self.x1.is_finite() && self.x2.is_finite() {
            Ok(())
        } else {
            Err(SimError::ThresholdOrder {
                x1: self.x1,
                x2: self.x2,
            })
        }
    }

    /// Score intervals `[lo, hi)` for the small, medium and large tiers.
    pub fn intervals(&self) -> [(f64, f64); 3] {
        [(0.0, self.x1), (self.x1, self.x2), (self.x2, f64::INFINITY)]
    }

    /// Tier whose interval contains `score`.
    pub fn level_of(&self, score: f64) -> Tier {
        if score < self.x1 {
            Tier::Small
        } else if score < self.x2 {
            Tier::Medium
        } else {
            Tier::Large
        }
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { x1: 29.5, x2: 33.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentPolicy {
    pub kind: AssignmentKind,
    pub thresholds: Thresholds,
    /// Category label to model id, used by the direct kind.
    #[serde(default)]
    pub direct_map: BTreeMap<String, u32>,
}

impl AssignmentPolicy {
    pub fn validate(&self, categories: &CategorySet, profiles: &ProfileSet) -> Result<()> {
        self.thresholds.check().map_err(|e| {
            SimError::config("assignment.thresholds", e.to_string())
        })?;
        for (label, model) in &self.direct_map {
            if categories.by_label(label).is_none() {
                return Err(SimError::config(
                    format!("assignment.direct_map.{label}"),
                    "unknown category label",
                ));
            }
            if profiles.get(*model).is_none() {
                return Err(SimError::config(
                    format!("assignment.direct_map.{label}"),
                    format!("unknown model_id {model}"),
                ));
            }
        }
        match self.kind {
            AssignmentKind::Direct => {
                if let Some(c) = categories
                    .categories()
                    .iter()
                    .find(|c| !self.direct_map.contains_key(&c.label))
                {
                    return Err(SimError::config(
                        "assignment.direct_map",
                        format!("no model for category {}", c.label),
                    ));
                }
            }
            AssignmentKind::Probabilistic => {
                tier_models(profiles).map_err(|_| {
                    SimError::config(
                        "assignment.kind",
                        "probabilistic assignment needs exactly one small, medium and large profile",
                    )
                })?;
            }
            AssignmentKind::Random => {}
        }
        Ok(())
    }

    /// Maps each category to the tier whose interval contains its mean.
    pub fn default_direct_map(
        categories: &CategorySet,
        profiles: &ProfileSet,
        thresholds: Thresholds,
    ) -> Result<BTreeMap<String, u32>> {
        let tiers = tier_models(profiles)?;
        Ok(categories
            .categories()
            .iter()
            .map(|c| {
                let tier = thresholds.level_of(c.mu);
                (c.label.clone(), tiers[tier as usize])
            })
            .collect())
    }
}

/// Model ids of the small, medium and large tiers, in that order.
pub fn tier_models(profiles: &ProfileSet) -> Result<[u32; 3]> {
    let mut out = [0; 3];
    for (slot, tier) in out.iter_mut().zip(Tier::ALL) {
        *slot = profiles
            .by_tier(tier)
            .ok_or_else(|| {
                SimError::config("profiles", format!("need exactly one {} model", tier.as_str()))
            })?
            .model_id;
    }
    Ok(out)
}

/// Un-normalized Gaussian masses on the small, medium and large intervals.
pub fn raw_interval_masses(category: &CategoryProfile, thresholds: Thresholds) -> Result<[f64; 3]> {
    thresholds.check()?;
    Ok(thresholds
        .intervals()
        .map(|(lo, hi)| interval_mass(category.mu, category.sigma, lo, hi)))
}

/// Probability of assigning `category` to the small, medium and large model.
pub fn assignment_probabilities(
    category: &CategoryProfile,
    thresholds: Thresholds,
) -> Result<[f64; 3]> {
    let raw = raw_interval_masses(category, thresholds)?;
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(SimError::Invariant(format!(
            "category {} has no mass above zero",
            category.label
        )));
    }
    Ok(raw.map(|p| p / total))
}

/// Per-category probability rows over the three tiers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryAssignmentTable {
    rows: BTreeMap<u32, [f64; 3]>,
}

impl CategoryAssignmentTable {
    pub fn build(categories: &CategorySet, thresholds: Thresholds) -> Result<Self> {
        let rows = categories
            .categories()
            .iter()
            .map(|c| Ok((c.category_id, assignment_probabilities(c, thresholds)?)))
            .collect::<Result<_>>()?;
        Ok(CategoryAssignmentTable { rows })
    }

    pub fn from_rows(rows: BTreeMap<u32, [f64; 3]>) -> Self {
        CategoryAssignmentTable { rows }
    }

    pub fn row(&self, category_id: u32) -> Option<&[f64; 3]> {
        self.rows.get(&category_id)
    }

    pub fn rows(&self) -> &BTreeMap<u32, [f64; 3]> {
        &self.rows
    }
}

/// Chosen model per task, in task order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    entries: Vec<(u64, u32)>,
}

impl Assignment {
    pub fn from_entries(entries: Vec<(u64, u32)>) -> Self {
        Assignment { entries }
    }

    pub fn entries(&self) -> &[(u64, u32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn model_of(&self, index: usize) -> u32 {
        self.entries[index].1
    }

    /// Checks that every task is mapped exactly once, to a known model.
    pub fn verify(&self, tasks: &[Task], profiles: &ProfileSet) -> Result<()> {
        let violation = |detail: String| SimError::ConstraintViolation {
            constraint: Constraint::UniqueAssignment,
            detail,
        };
        if self.entries.len() != tasks.len() {
            return Err(violation(format!(
                "{} assignments for {} tasks",
                self.entries.len(),
                tasks.len()
            )));
        }
        for (t, (task_id, model)) in tasks.iter().zip(&self.entries) {
            if t.task_id != *task_id {
                return Err(violation(format!("task {} missing or duplicated", t.task_id)));
            }
            if profiles.get(*model).is_none() {
                return Err(violation(format!("task {task_id} mapped to unknown model {model}")));
            }
        }
        Ok(())
    }
}

fn draw_index<R: Rng + ?Sized>(row: &[f64; 3], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the last cumulative sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(2)
}

/// Maps every task to exactly one model.
pub fn assign<R: Rng + ?Sized>(
    tasks: &[Task],
    policy: &AssignmentPolicy,
    table: &CategoryAssignmentTable,
    categories: &CategorySet,
    profiles: &ProfileSet,
    rng: &mut R,
) -> Result<Assignment> {
    let entries = match policy.kind {
        AssignmentKind::Probabilistic => {
            let tiers = tier_models(profiles)?;
            tasks
                .iter()
                .map(|t| {
                    let row = table.row(t.category_id).ok_or_else(|| {
                        SimError::config(
                            "assignment",
                            format!("no probability row for category {}", t.category_id),
                        )
                    })?;
                    Ok((t.task_id, tiers[draw_index(row, rng)]))
                })
                .collect::<Result<Vec<_>>>()?
        }
        AssignmentKind::Direct => tasks
            .iter()
            .map(|t| {
                let label = categories
                    .get(t.category_id)
                    .map(|c| c.label.as_str())
                    .unwrap_or("?");
                let model = policy.direct_map.get(label).ok_or_else(|| {
                    SimError::config(
                        "assignment.direct_map",
                        format!("no model for category {label}"),
                    )
                })?;
                Ok((t.task_id, *model))
            })
            .collect::<Result<Vec<_>>>()?,
        AssignmentKind::Random => {
            let models = profiles.models();
            tasks
                .iter()
                .map(|t| (t.task_id, models[rng.random_range(0..models.len())].model_id))
                .collect()
        }
    };
    Ok(Assignment { entries })
}

/// Number of tasks on each model; models without tasks report 0.
pub fn per_model_counts(assignment: &Assignment, profiles: &ProfileSet) -> BTreeMap<u32, usize> {
    let mut counts: BTreeMap<u32, usize> =
        profiles.models().iter().map(|m| (m.model_id, 0)).collect();
    for &(_, m) in &assignment.entries {
        *counts.entry(m).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{default_categories, default_profiles};
    use crate::rng::{self, Stream};

    fn cat(mu: f64, sigma: f64) -> CategoryProfile {
        CategoryProfile {
            category_id: 0,
            label: "X".into(),
            mu,
            sigma,
        }
    }

    fn profiles() -> ProfileSet {
        ProfileSet::new(default_profiles()).unwrap()
    }

    fn categories() -> CategorySet {
        CategorySet::new(default_categories()).unwrap()
    }

    fn tasks_of(cat: u32, n: usize) -> Vec<Task> {
        (0..n)
            .map(|i| Task {
                task_id: i as u64,
                category_id: cat,
                latent_quality: 31.0,
                arrival_slot: 0,
            })
            .collect()
    }

    #[test]
    fn threshold_order_error() {
        assert!(matches!(
            assignment_probabilities(&cat(31.0, 2.0), Thresholds { x1: 33.8, x2: 29.5 }),
            Err(SimError::ThresholdOrder { .. })
        ));
        assert!(Thresholds::new(30.0, 30.0).is_err());
    }

    #[test]
    fn far_above_top_threshold_goes_large() {
        let p = assignment_probabilities(&cat(50.0, 1.0), Thresholds::default()).unwrap();
        assert!(p[2] > 1.0 - 1e-9);
    }

    #[test]
    fn small_probability_rises_as_mean_falls() {
        let t = Thresholds::default();
        let mut prev: Option<[f64; 3]> = None;
        for i in 0..60 {
            let mu = 36.0 - 0.15 * i as f64;
            let p = assignment_probabilities(&cat(mu, 2.0), t).unwrap();
            if let Some(q) = prev {
                assert!(p[0] > q[0], "small not increasing at mu={mu}");
                assert!(p[2] < q[2], "large not decreasing at mu={mu}");
            }
            prev = Some(p);
        }
    }

    #[test]
    fn default_direct_map_follows_category_means() {
        let map =
            AssignmentPolicy::default_direct_map(&categories(), &profiles(), Thresholds::default())
                .unwrap();
        assert_eq!(map["Basic"], 1);
        assert_eq!(map["Detail"], 1);
        assert_eq!(map["Imagination"], 1);
        assert_eq!(map["Complex"], 0);
    }

    #[test]
    fn direct_kind_uses_map() {
        let policy = AssignmentPolicy {
            kind: AssignmentKind::Direct,
            thresholds: Thresholds::default(),
            direct_map: [("Basic".to_string(), 1)].into_iter().collect(),
        };
        let tasks = tasks_of(0, 20);
        let table = CategoryAssignmentTable::build(&categories(), policy.thresholds).unwrap();
        let mut rng = rng::stream(0, Stream::Assignment, &[]);
        let a = assign(&tasks, &policy, &table, &categories(), &profiles(), &mut rng).unwrap();
        assert!(a.entries().iter().all(|&(_, m)| m == 1));
        a.verify(&tasks, &profiles()).unwrap();
    }

    #[test]
    fn degenerate_row_is_deterministic() {
        let policy = AssignmentPolicy {
            kind: AssignmentKind::Probabilistic,
            thresholds: Thresholds::default(),
            direct_map: BTreeMap::new(),
        };
        let table = CategoryAssignmentTable::from_rows([(2, [0.0, 1.0, 0.0])].into_iter().collect());
        let tasks = tasks_of(2, 500);
        let mut rng = rng::stream(3, Stream::Assignment, &[]);
        let a = assign(&tasks, &policy, &table, &categories(), &profiles(), &mut rng).unwrap();
        assert!(a.entries().iter().all(|&(_, m)| m == 1));
    }

    #[test]
    fn missing_row_is_config_error() {
        let policy = AssignmentPolicy {
            kind: AssignmentKind::Probabilistic,
            thresholds: Thresholds::default(),
            direct_map: BTreeMap::new(),
        };
        let table = CategoryAssignmentTable::from_rows(BTreeMap::new());
        let mut rng = rng::stream(3, Stream::Assignment, &[]);
        let err = assign(&tasks_of(1, 3), &policy, &table, &categories(), &profiles(), &mut rng);
        assert!(matches!(err, Err(SimError::Config { .. })));
    }

    #[test]
    fn random_kind_is_roughly_uniform() {
        let policy = AssignmentPolicy {
            kind: AssignmentKind::Random,
            thresholds: Thresholds::default(),
            direct_map: BTreeMap::new(),
        };
        let tasks = tasks_of(0, 30_000);
        let table = CategoryAssignmentTable::build(&categories(), policy.thresholds).unwrap();
        let mut rng = rng::stream(11, Stream::Assignment, &[]);
        let a = assign(&tasks, &policy, &table, &categories(), &profiles(), &mut rng).unwrap();
        let counts = per_model_counts(&a, &profiles());
        for (_, n) in counts {
            assert!((n as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn counts_partition_tasks() {
        let empty = Assignment::from_entries(vec![]);
        let c = per_model_counts(&empty, &profiles());
        assert_eq!(c.values().sum::<usize>(), 0);
        assert_eq!(c.len(), 3);

        let all_two = Assignment::from_entries((0..10).map(|i| (i, 2)).collect());
        let c = per_model_counts(&all_two, &profiles());
        assert_eq!(c[&2], 10);
        assert_eq!(c[&0], 0);
        assert_eq!(c[&1], 0);
    }

    #[test]
    fn verify_catches_gaps() {
        let tasks = tasks_of(0, 3);
        let short = Assignment::from_entries(vec![(0, 1), (1, 1)]);
        assert!(short.verify(&tasks, &profiles()).is_err());
        let dup = Assignment::from_entries(vec![(0, 1), (0, 1), (2, 1)]);
        assert!(dup.verify(&tasks, &profiles()).is_err());
        let unknown = Assignment::from_entries(vec![(0, 1), (1, 9), (2, 1)]);
        assert!(unknown.verify(&tasks, &profiles()).is_err());
    }
}
