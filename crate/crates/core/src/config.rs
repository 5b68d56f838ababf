//! Run configuration: a TOML document with one section per subsystem.
//!
//! Every section is optional; omitted sections and fields take the shipped
//! defaults. Field names are documented in `docs/config.md`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alloc::{SaParams, UtilityWeights};
use crate::assign::{AssignmentKind, AssignmentPolicy, Thresholds};
use crate::engine::Scenario;
use crate::error::{Result, SimError};
use crate::profiles::{
    default_categories, default_profiles, CategoryProfile, CategorySet, ModelProfile, ProfileSet,
};
use crate::workload::WorkloadSpec;

pub const DEFAULT_GRID_POINTS: usize = 20;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    profiles: Option<Vec<ModelProfile>>,
    categories: Option<Vec<CategoryProfile>>,
    workload: Option<RawWorkload>,
    weights: Option<RawWeights>,
    assignment: Option<RawAssignment>,
    sa: Option<SaParams>,
    oracle: Option<RawOracle>,
    output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkload {
    tasks_per_slot: Option<usize>,
    num_slots: Option<u64>,
    category_mix: Option<BTreeMap<String, f64>>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    omega: Option<f64>,
    total_resource: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssignment {
    kind: Option<AssignmentKind>,
    thresholds: Option<Thresholds>,
    direct_map: Option<BTreeMap<String, u32>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    grid_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// A fully validated configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub assignment: AssignmentPolicy,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_raw(RawConfig::default()).expect("shipped defaults are valid")
    }
}

impl RunConfig {
    fn from_raw(raw: RawConfig) -> Result<Self> {
        let profiles = ProfileSet::new(raw.profiles.unwrap_or_else(default_profiles))?;
        let categories = CategorySet::new(raw.categories.unwrap_or_else(default_categories))?;

        let w = raw.workload.unwrap_or_default();
        let workload = WorkloadSpec {
            tasks_per_slot: w.tasks_per_slot.unwrap_or(100),
            num_slots: w.num_slots.unwrap_or(10),
            category_mix: w
                .category_mix
                .unwrap_or_else(|| WorkloadSpec::uniform_mix(&categories)),
            seed: w.seed.unwrap_or(42),
        };
        workload.validate(&categories)?;

        let defaults = UtilityWeights::default();
        let w = raw.weights.unwrap_or_default();
        let weights = UtilityWeights {
            omega: w.omega.unwrap_or(defaults.omega),
            total_resource: w.total_resource.unwrap_or(defaults.total_resource),
        };
        weights.validate()?;

        let a = raw.assignment.unwrap_or_default();
        let thresholds = a.thresholds.unwrap_or_default();
        thresholds
            .check()
            .map_err(|e| SimError::config("assignment.thresholds", e.to_string()))?;
        let kind = a.kind.unwrap_or(AssignmentKind::Probabilistic);
        let direct_map = match a.direct_map {
            Some(m) => m,
            // without all three tiers there is no natural default; direct then needs an explicit map
            None => AssignmentPolicy::default_direct_map(&categories, &profiles, thresholds)
                .unwrap_or_default(),
        };
        let assignment = AssignmentPolicy {
            kind,
            thresholds,
            direct_map,
        };
        assignment.validate(&categories, &profiles)?;

        let sa = raw.sa.unwrap_or_default();
        sa.validate()?;

        let grid_points = raw
            .oracle
            .and_then(|o| o.grid_points)
            .unwrap_or(DEFAULT_GRID_POINTS);
        if grid_points == 0 {
            return Err(SimError::config("oracle.grid_points", "must be >= 1"));
        }

        let output = raw.output.unwrap_or_default();
        if output.formats.is_empty() {
            return Err(SimError::config("output.formats", "must list at least one format"));
        }

        Ok(RunConfig {
            scenario: Scenario {
                profiles,
                categories,
                workload,
                weights,
                sa,
                grid_points,
            },
            assignment,
            output,
        })
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|span| line_col(text, span.start))
                .unwrap_or((0, 0));
            SimError::Parse {
                path: origin.to_path_buf(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        RunConfig::from_raw(raw)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.workload.seed = seed;
        self
    }

    /// Content hash of the configuration, ignoring the seed and output location.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            scenario: &'a Scenario,
            assignment: &'a AssignmentPolicy,
        }
        let unseeded = self.scenario.with_seed(0);
        let bytes = serde_json::to_vec(&View {
            scenario: &unseeded,
            assignment: &self.assignment,
        })
        .expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::from_toml_str(&text, path)
}
