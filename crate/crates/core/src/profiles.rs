//! Model and prompt-category profiles.
//!
//! A [`ModelProfile`] stands in for one deployed diffusion model through two
//! surrogate curves: a saturating score curve and an affine latency curve.
//! A [`CategoryProfile`] carries the Gaussian score law of one prompt
//! category as measured on the medium (reference) model.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Capability tier of a deployed model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Small,
    Medium,
    Large,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Small, Tier::Medium, Tier::Large];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Small => "small",
            Tier::Medium => "medium",
            Tier::Large => "large",
        }
    }
}

/// Saturating score response to the number of denoising steps.
///
/// The step term is `gain * (exp(-(ref_steps - 1)/tau) - exp(-(steps - 1)/tau))`,
/// which vanishes at `ref_steps` and is non-decreasing with diminishing
/// increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreCurve {
    pub base_offset: f64,
    pub gain: f64,
    pub tau: f64,
    pub ref_steps: u32,
    pub noise_sigma: f64,
}

impl ScoreCurve {
    pub fn step_term(&self, steps: u32) -> f64 {
        let at = |s: u32| (-(f64::from(s) - 1.0) / self.tau).exp();
        self.gain * (at(self.ref_steps) - at(steps))
    }

    /// Noise-free score for a task of the given latent quality.
    pub fn expected(&self, latent_quality: f64, steps: u32) -> f64 {
        latent_quality + self.base_offset + self.step_term(steps)
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return Err(SimError::config(format!("{path}.gain"), "must be finite and >= 0"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(SimError::config(format!("{path}.tau"), "must be finite and > 0"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SimError::config(
                format!("{path}.noise_sigma"),
                "must be finite and >= 0",
            ));
        }
        if !self.base_offset.is_finite() {
            return Err(SimError::config(format!("{path}.base_offset"), "must be finite"));
        }
        if self.ref_steps < 1 {
            return Err(SimError::config(format!("{path}.ref_steps"), "must be >= 1"));
        }
        Ok(())
    }
}

/// Inference latency at the full edge resource, affine in the step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyCurve {
    pub intercept: f64,
    pub slope: f64,
}

impl LatencyCurve {
    /// Seconds for `steps` denoising steps when the model holds the whole budget.
    pub fn full_resource(&self, steps: u32) -> f64 {
        self.intercept + self.slope * f64::from(steps)
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !(self.intercept >= 0.0 && self.intercept.is_finite()) {
            return Err(SimError::config(format!("{path}.intercept"), "must be finite and >= 0"));
        }
        if !(self.slope > 0.0 && self.slope.is_finite()) {
            return Err(SimError::config(format!("{path}.slope"), "must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelProfile {
    pub model_id: u32,
    pub name: String,
    pub tier: Tier,
    pub step_options: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_fixed: Option<u32>,
    pub score_curve: ScoreCurve,
    pub latency_curve: LatencyCurve,
    /// Billions of parameters. Informational only.
    #[serde(default)]
    pub param_count: f64,
    /// TFLOPs per image at reference steps. Informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops_per_image: Option<f64>,
}

impl ModelProfile {
    /// Admissible step values: the fixed step alone when set, otherwise the options.
    pub fn steps(&self) -> &[u32] {
        match &self.step_fixed {
            Some(s) => std::slice::from_ref(s),
            None => &self.step_options,
        }
    }

    pub fn min_steps(&self) -> u32 {
        self.steps()[0]
    }

    pub fn max_steps(&self) -> u32 {
        *self.steps().last().expect("validated non-empty")
    }

    pub fn admits(&self, steps: u32) -> bool {
        self.steps().binary_search(&steps).is_ok()
    }

    pub fn check_steps(&self, steps: u32) -> Result<()> {
        if self.admits(steps) {
            Ok(())
        } else {
            Err(SimError::StepDomain {
                model_id: self.model_id,
                steps,
                allowed: self.steps().to_vec(),
            })
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if self.step_options.is_empty() {
            return Err(SimError::config(format!("{path}.step_options"), "must not be empty"));
        }
        if self.step_options[0] < 1 {
            return Err(SimError::config(format!("{path}.step_options"), "steps must be >= 1"));
        }
        if self.step_options.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::config(
                format!("{path}.step_options"),
                "must be strictly increasing",
            ));
        }
        if self.step_fixed == Some(0) {
            return Err(SimError::config(format!("{path}.step_fixed"), "must be >= 1"));
        }
        self.score_curve.validate(&format!("{path}.score_curve"))?;
        self.latency_curve.validate(&format!("{path}.latency_curve"))?;
        Ok(())
    }
}

/// Realized score of one generation: the expected curve plus scaled noise.
pub fn eval_score(
    profile: &ModelProfile,
    latent_quality: f64,
    steps: u32,
    noise_draw: f64,
) -> Result<f64> {
    profile.check_steps(steps)?;
    if !latent_quality.is_finite() {
        return Err(SimError::Invariant(format!(
            "latent quality must be finite, got {latent_quality}"
        )));
    }
    let curve = &profile.score_curve;
    Ok(curve.expected(latent_quality, steps) + curve.noise_sigma * noise_draw)
}

/// Noise-free score, i.e. the mean of [`eval_score`] over the noise law.
pub fn eval_expected_score(profile: &ModelProfile, latent_quality: f64, steps: u32) -> Result<f64> {
    eval_score(profile, latent_quality, steps, 0.0)
}

/// Inference delay when the model holds `resource_share` of `total_resource`.
///
/// The delay scales the full-resource latency by `total_resource / resource_share`.
pub fn eval_latency(
    profile: &ModelProfile,
    steps: u32,
    resource_share: f64,
    total_resource: f64,
) -> Result<f64> {
    profile.check_steps(steps)?;
    if resource_share.is_nan() || resource_share <= 0.0 {
        return Err(SimError::NonPositiveShare {
            share: resource_share,
        });
    }
    if resource_share > total_resource {
        return Err(SimError::InfeasibleShare {
            share: resource_share,
            total: total_resource,
        });
    }
    Ok(total_resource / resource_share * profile.latency_curve.full_resource(steps))
}

/// A prompt category's score law on the medium model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryProfile {
    pub category_id: u32,
    pub label: String,
    pub mu: f64,
    pub sigma: f64,
}

/// Validated collection of model profiles, ordered by model id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSet {
    models: Vec<ModelProfile>,
}

impl ProfileSet {
    pub fn new(mut models: Vec<ModelProfile>) -> Result<Self> {
        if models.is_empty() {
            return Err(SimError::config("profiles", "at least one model profile is required"));
        }
        for (i, m) in models.iter().enumerate() {
            m.validate(&format!("profiles[{i}]"))?;
        }
        models.sort_by_key(|m| m.model_id);
        if let Some(w) = models.windows(2).find(|w| w[0].model_id == w[1].model_id) {
            return Err(SimError::config(
                "profiles",
                format!("duplicate model_id {}", w[0].model_id),
            ));
        }
        Ok(ProfileSet { models })
    }

    pub fn models(&self) -> &[ModelProfile] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn get(&self, model_id: u32) -> Option<&ModelProfile> {
        self.models
            .binary_search_by_key(&model_id, |m| m.model_id)
            .ok()
            .map(|i| &self.models[i])
    }

    /// Position of `model_id` in [`Self::models`].
    pub fn index_of(&self, model_id: u32) -> Option<usize> {
        self.models.binary_search_by_key(&model_id, |m| m.model_id).ok()
    }

    /// The unique model of a tier, if exactly one exists.
    pub fn by_tier(&self, tier: Tier) -> Option<&ModelProfile> {
        let mut it = self.models.iter().filter(|m| m.tier == tier);
        match (it.next(), it.next()) {
            (Some(m), None) => Some(m),
            _ => None,
        }
    }
}

/// Validated collection of category profiles, ordered by category id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySet {
    categories: Vec<CategoryProfile>,
}

impl CategorySet {
    pub fn new(mut categories: Vec<CategoryProfile>) -> Result<Self> {
        if categories.is_empty() {
            return Err(SimError::config("categories", "at least one category is required"));
        }
        for (i, c) in categories.iter().enumerate() {
            if !(c.sigma > 0.0 && c.sigma.is_finite()) {
                return Err(SimError::config(
                    format!("categories[{i}].sigma"),
                    "must be finite and > 0",
                ));
            }
            if !c.mu.is_finite() {
                return Err(SimError::config(format!("categories[{i}].mu"), "must be finite"));
            }
        }
        categories.sort_by_key(|c| c.category_id);
        if let Some(w) = categories.windows(2).find(|w| w[0].category_id == w[1].category_id) {
            return Err(SimError::config(
                "categories",
                format!("duplicate category_id {}", w[0].category_id),
            ));
        }
        let mut labels: Vec<&str> = categories.iter().map(|c| c.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(SimError::config("categories", format!("duplicate label {}", w[0])));
        }
        Ok(CategorySet { categories })
    }

    pub fn categories(&self) -> &[CategoryProfile] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn get(&self, category_id: u32) -> Option<&CategoryProfile> {
        self.categories.iter().find(|c| c.category_id == category_id)
    }

    pub fn by_label(&self, label: &str) -> Option<&CategoryProfile> {
        self.categories.iter().find(|c| c.label == label)
    }
}

/// Denoising step set shared by the medium and large default models.
pub const DEFAULT_STEP_SET: [u32; 9] = [10, 14, 18, 22, 26, 30, 34, 38, 42];

/// Default noise on every generated score, in score points.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.8;

/// Three-tier surrogate calibration: a one-step turbo model, an SD1.5-like
/// medium model and an SDXL-like large model.
pub fn default_profiles() -> Vec<ModelProfile> {
    vec![
        ModelProfile {
            model_id: 0,
            name: "sdxl-turbo".into(),
            tier: Tier::Small,
            step_options: vec![1],
            step_fixed: Some(1),
            score_curve: ScoreCurve {
                base_offset: -1.5,
                gain: 0.0,
                tau: 1.0,
                ref_steps: 1,
                noise_sigma: DEFAULT_NOISE_SIGMA,
            },
            latency_curve: LatencyCurve {
                intercept: 0.2,
                slope: 0.15,
            },
            param_count: 3.5,
            flops_per_image: None,
        },
        ModelProfile {
            model_id: 1,
            name: "sd1.5".into(),
            tier: Tier::Medium,
            step_options: DEFAULT_STEP_SET.to_vec(),
            step_fixed: None,
            score_curve: ScoreCurve {
                base_offset: 0.0,
                gain: 3.0,
                tau: 8.0,
                ref_steps: 26,
                noise_sigma: DEFAULT_NOISE_SIGMA,
            },
            latency_curve: LatencyCurve {
                intercept: 0.3,
                slope: 0.22,
            },
            param_count: 1.06,
            flops_per_image: None,
        },
        ModelProfile {
            model_id: 2,
            name: "sdxl".into(),
            tier: Tier::Large,
            step_options: DEFAULT_STEP_SET.to_vec(),
            step_fixed: None,
            score_curve: ScoreCurve {
                base_offset: 2.5,
                gain: 4.0,
                tau: 10.0,
                ref_steps: 26,
                noise_sigma: DEFAULT_NOISE_SIGMA,
            },
            latency_curve: LatencyCurve {
                intercept: 0.8,
                slope: 0.9,
            },
            param_count: 3.5,
            flops_per_image: Some(338.0),
        },
    ]
}

pub fn default_categories() -> Vec<CategoryProfile> {
    [
        ("Basic", 32.5, 1.8),
        ("Detail", 31.5, 2.0),
        ("Imagination", 30.0, 2.2),
        ("Complex", 29.0, 2.4),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, (label, mu, sigma))| CategoryProfile {
        category_id: i as u32,
        label: label.into(),
        mu,
        sigma,
    })
    .collect()
}
