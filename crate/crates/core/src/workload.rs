//! Seeded synthetic task batches.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::profiles::CategorySet;
use crate::rng::{self, Stream};

/// One prompt request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: u64,
    pub category_id: u32,
    /// The score this prompt would reach on the medium model at reference steps.
    pub latent_quality: f64,
    pub arrival_slot: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub tasks_per_slot: usize,
    pub num_slots: u64,
    /// Category label to probability weight.
    pub category_mix: BTreeMap<String, f64>,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn validate(&self, categories: &CategorySet) -> Result<()> {
        if self.tasks_per_slot == 0 {
            return Err(SimError::config("workload.tasks_per_slot", "must be positive"));
        }
        if self.num_slots == 0 {
            return Err(SimError::config("workload.num_slots", "must be positive"));
        }
        self.resolved_mix(categories).map(|_| ())
    }

    /// Mix weights keyed by category id, in id order.
    pub fn resolved_mix(&self, categories: &CategorySet) -> Result<Vec<(u32, f64)>> {
        if self.category_mix.is_empty() {
            return Err(SimError::config("workload.category_mix", "must not be empty"));
        }
        let mut mix = Vec::with_capacity(self.category_mix.len());
        for (label, &w) in &self.category_mix {
            let cat = categories.by_label(label).ok_or_else(|| {
                SimError::config(
                    format!("workload.category_mix.{label}"),
                    "unknown category label",
                )
            })?;
            if !(w >= 0.0 && w.is_finite()) {
                return Err(SimError::config(
                    format!("workload.category_mix.{label}"),
                    "weight must be finite and >= 0",
                ));
            }
            mix.push((cat.category_id, w));
        }
        let total: f64 = mix.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SimError::config(
                "workload.category_mix",
                format!("weights must sum to 1, got {total}"),
            ));
        }
        mix.sort_by_key(|(id, _)| *id);
        Ok(mix)
    }

    /// Uniform mix over every category.
    pub fn uniform_mix(categories: &CategorySet) -> BTreeMap<String, f64> {
        let w = 1.0 / categories.len() as f64;
        categories
            .categories()
            .iter()
            .map(|c| (c.label.clone(), w))
            .collect()
    }
}

/// Tasks arriving at the start of slot `slot_index`.
///
/// The slot's draws depend only on `(spec.seed, slot_index)`.
pub fn generate_slot(spec: &WorkloadSpec, categories: &CategorySet, slot_index: u64) -> Result<Vec<Task>> {
    if slot_index >= spec.num_slots {
        return Err(SimError::Usage(format!(
            "slot {slot_index} out of range (num_slots = {})",
            spec.num_slots
        )));
    }
    let mix = spec.resolved_mix(categories)?;
    let picker = WeightedIndex::new(mix.iter().map(|(_, w)| *w))
        .map_err(|e| SimError::config("workload.category_mix", e.to_string()))?;
    let laws: Vec<Normal<f64>> = mix
        .iter()
        .map(|(id, _)| {
            let c = categories.get(*id).expect("resolved above");
            Normal::new(c.mu, c.sigma).expect("sigma validated positive")
        })
        .collect();

    let mut rng = rng::stream(spec.seed, Stream::Workload, &[slot_index]);
    let base = slot_index * spec.tasks_per_slot as u64;
    let tasks = (0..spec.tasks_per_slot)
        .map(|i| {
            let k = picker.sample(&mut rng);
            Task {
                task_id: base + i as u64,
                category_id: mix[k].0,
                latent_quality: laws[k].sample(&mut rng),
                arrival_slot: slot_index,
            }
        })
        .collect();
    Ok(tasks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CategoryStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub stddev: f64,
}

/// Per-category sample mean and standard deviation of latent quality.
///
/// Categories with fewer than two tasks are omitted.
pub fn empirical_category_stats(tasks: &[Task]) -> BTreeMap<u32, CategoryStats> {
    // Welford accumulators: (count, mean, m2)
    let mut acc: BTreeMap<u32, (usize, f64, f64)> = BTreeMap::new();
    for t in tasks {
        let (n, mean, m2) = acc.entry(t.category_id).or_insert((0, 0.0, 0.0));
        *n += 1;
        let delta = t.latent_quality - *mean;
        *mean += delta / *n as f64;
        *m2 += delta * (t.latent_quality - *mean);
    }
    acc.into_iter()
        .filter(|(_, (n, _, _))| *n >= 2)
        .map(|(id, (n, mean, m2))| {
            (
                id,
                CategoryStats {
                    count: n,
                    mean,
                    stddev: (m2 / (n - 1) as f64).sqrt(),
                },
            )
        })
        .collect()
}
