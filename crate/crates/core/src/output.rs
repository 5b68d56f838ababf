//! Artifact serialization.
//!
//! Floats in CSV files are written in scientific notation with 17 significant
//! digits so that every value round-trips exactly and files are byte-stable
//! for a given seed. Every directory gets a `manifest.json` listing the
//! configuration fingerprint and a SHA-256 digest of each file written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::engine::{OmegaPoint, RunReport};
use crate::error::{Result, SimError};
use crate::profiles::CategorySet;

pub const SLOTS_HEADER: [&str; 6] = ["slot", "strategy", "mean_score", "mean_delay_s", "utility", "n_tasks"];
pub const TASKS_HEADER: [&str; 8] = [
    "task_id",
    "slot",
    "category",
    "latent_quality",
    "model_id",
    "steps",
    "score",
    "delay_s",
];
pub const PLANS_HEADER: [&str; 6] = ["slot", "strategy", "model_id", "steps", "gamma_tflops", "n_m"];
pub const COMPARE_HEADER: [&str; 3] = ["strategy", "metric", "value"];
pub const SWEEP_HEADER: [&str; 4] = ["omega", "mean_score", "mean_delay_s", "utility"];

/// Fixed-width float rendering used in every CSV.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let invariant = |e: csv::Error| SimError::Invariant(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(invariant)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(invariant)?;
    }
    w.into_inner()
        .map_err(|e| SimError::Invariant(format!("csv encoding failed: {e}")))
}

pub fn slots_csv(report: &RunReport) -> Result<Vec<u8>> {
    csv_bytes(
        &SLOTS_HEADER,
        report.slots.iter().map(|s| {
            [
                s.slot.to_string(),
                s.strategy.clone(),
                fmt_f64(s.mean_score),
                fmt_f64(s.mean_delay_s),
                fmt_f64(s.utility),
                s.n_tasks.to_string(),
            ]
        }),
    )
}

pub fn tasks_csv(report: &RunReport, categories: &CategorySet) -> Result<Vec<u8>> {
    let rows = report.slots.iter().flat_map(|s| {
        s.records.iter().map(move |r| {
            let label = categories
                .get(r.category_id)
                .map_or_else(|| r.category_id.to_string(), |c| c.label.clone());
            [
                r.task_id.to_string(),
                s.slot.to_string(),
                label,
                fmt_f64(r.latent_quality),
                r.model_id.to_string(),
                r.steps.to_string(),
                fmt_f64(r.score),
                fmt_f64(r.delay_s),
            ]
        })
    });
    csv_bytes(&TASKS_HEADER, rows)
}

pub fn plans_csv(report: &RunReport) -> Result<Vec<u8>> {
    let rows = report.slots.iter().flat_map(|s| {
        s.plan.entries.iter().map(move |e| {
            let n_m = s.per_model.get(&e.model_id).map_or(0, |m| m.count);
            [
                s.slot.to_string(),
                s.strategy.clone(),
                e.model_id.to_string(),
                e.steps.to_string(),
                fmt_f64(e.gamma),
                n_m.to_string(),
            ]
        })
    });
    csv_bytes(&PLANS_HEADER, rows)
}

/// Metric rows of one strategy, in a fixed order.
///
/// Per-model rows are named `model_<id>.<metric>` and are left out for models
/// that received no task.
pub fn compare_rows(report: &RunReport) -> Vec<(String, f64)> {
    let a = &report.aggregate;
    let mut rows = vec![
        ("mean_score".to_string(), a.mean_score),
        ("mean_delay_s".to_string(), a.mean_delay_s),
        ("utility".to_string(), a.utility),
        ("expected_utility".to_string(), a.expected_utility),
    ];
    for (id, m) in &a.per_model {
        rows.push((format!("model_{id}.count"), m.count as f64));
        if let Some(v) = m.mean_score {
            rows.push((format!("model_{id}.mean_score"), v));
        }
        if let Some(v) = m.mean_delay_s {
            rows.push((format!("model_{id}.mean_delay_s"), v));
        }
    }
    rows
}

pub fn compare_csv(reports: &[RunReport]) -> Result<Vec<u8>> {
    let rows = reports.iter().flat_map(|r| {
        compare_rows(r)
            .into_iter()
            .map(move |(metric, value)| [r.strategy.clone(), metric, fmt_f64(value)])
    });
    csv_bytes(&COMPARE_HEADER, rows)
}

pub fn sweep_csv(points: &[OmegaPoint]) -> Result<Vec<u8>> {
    csv_bytes(
        &SWEEP_HEADER,
        points.iter().map(|p| {
            [
                fmt_f64(p.omega),
                fmt_f64(p.mean_score),
                fmt_f64(p.mean_delay_s),
                fmt_f64(p.utility),
            ]
        }),
    )
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| SimError::Invariant(format!("json encoding failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_fingerprint: &'a str,
    seed: u64,
    files: &'a BTreeMap<String, String>,
}

/// An output directory that remembers what it wrote.
pub struct ArtifactDir {
    root: PathBuf,
    digests: BTreeMap<String, String>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|source| SimError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(ArtifactDir {
            root: root.to_path_buf(),
            digests: BTreeMap::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|source| SimError::Io { path, source })?;
        self.digests.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    /// Writes `manifest.json` covering every file written so far.
    pub fn finish(mut self, fingerprint: &str, seed: u64) -> Result<()> {
        let manifest = json_bytes(&Manifest {
            config_fingerprint: fingerprint,
            seed,
            files: &self.digests,
        })?;
        self.write("manifest.json", &manifest)
    }
}
