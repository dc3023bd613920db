//! Parameter records for each idiom kind. Every optional data field becomes
//! a built-in observation when present.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{Evidence, NodeSpec};

fn default_max_demands() -> f64 {
    1e9
}

fn default_one() -> f64 {
    1.0
}

fn default_latent_variance() -> f64 {
    0.001
}

fn default_indicator_variance() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfdParams {
    #[serde(default)]
    pub observed: Option<f64>,
    #[serde(default)]
    pub demands: Option<f64>,
    #[serde(default = "default_max_demands")]
    pub max_demands: f64,
}

impl Default for PfdParams {
    fn default() -> Self {
        PfdParams { observed: None, demands: None, max_demands: default_max_demands() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfdLimitedDataParams {
    pub previous_failures: f64,
    pub previous_demands: f64,
    /// One of "Similar", "Minor differences", "Major differences".
    #[serde(default)]
    pub similarity: Option<String>,
    #[serde(default)]
    pub failures: Option<f64>,
    #[serde(default)]
    pub demands: Option<f64>,
    /// Multiplier on the previous system's pfd for each similarity state.
    #[serde(default = "PfdLimitedDataParams::default_multipliers")]
    pub multipliers: [f64; 3],
    #[serde(default = "PfdLimitedDataParams::default_variance")]
    pub variance: f64,
    #[serde(default = "default_max_demands")]
    pub max_demands: f64,
}

impl PfdLimitedDataParams {
    fn default_multipliers() -> [f64; 3] {
        [1.0, 1.25, 2.0]
    }

    fn default_variance() -> f64 {
        1e-4
    }

    pub fn new(previous_failures: f64, previous_demands: f64) -> Self {
        PfdLimitedDataParams {
            previous_failures,
            previous_demands,
            similarity: None,
            failures: None,
            demands: None,
            multipliers: Self::default_multipliers(),
            variance: Self::default_variance(),
            max_demands: default_max_demands(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainAccuracyParams {
    #[serde(default)]
    pub observed: Option<f64>,
    #[serde(default)]
    pub demands: Option<f64>,
    /// One of "Overestimated", "Accurate", "Underestimated".
    #[serde(default)]
    pub accuracy: Option<String>,
    #[serde(default = "UncertainAccuracyParams::default_over")]
    pub overestimate_factor: f64,
    #[serde(default = "UncertainAccuracyParams::default_under")]
    pub underestimate_factor: f64,
    /// Reported-count variance per true event.
    #[serde(default = "UncertainAccuracyParams::default_variance_factor")]
    pub variance_factor: f64,
    #[serde(default = "default_max_demands")]
    pub max_demands: f64,
}

impl UncertainAccuracyParams {
    fn default_over() -> f64 {
        1.2
    }

    fn default_under() -> f64 {
        0.8
    }

    fn default_variance_factor() -> f64 {
        1e-4
    }
}

impl Default for UncertainAccuracyParams {
    fn default() -> Self {
        UncertainAccuracyParams {
            observed: None,
            demands: None,
            accuracy: None,
            overestimate_factor: Self::default_over(),
            underestimate_factor: Self::default_under(),
            variance_factor: Self::default_variance_factor(),
            max_demands: default_max_demands(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TtfParams {
    #[serde(default)]
    pub failure_times: Vec<f64>,
    /// Number of failure-time nodes when no times are given.
    #[serde(default)]
    pub count: Option<usize>,
    /// Upper end of the flat rate prior; defaults to 100 / mean time.
    #[serde(default)]
    pub rate_cap: Option<f64>,
    /// Upper bound declared on the time nodes; defaults to 1000 x the
    /// longest time.
    #[serde(default)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtfSummaryParams {
    pub mean: f64,
    pub variance: f64,
    #[serde(default)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureWithinTimeParams {
    #[serde(default)]
    pub t: Option<f64>,
    /// Mean of the placeholder exponential TTF used when nothing is bound.
    #[serde(default = "FailureWithinTimeParams::default_mean")]
    pub mean_ttf: f64,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub max_time: Option<f64>,
}

impl FailureWithinTimeParams {
    fn default_mean() -> f64 {
        100.0
    }
}

impl Default for FailureWithinTimeParams {
    fn default() -> Self {
        FailureWithinTimeParams { t: None, mean_ttf: Self::default_mean(), horizon: None, max_time: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReworkParams {
    #[serde(default)]
    pub process_quality: Option<String>,
    #[serde(default)]
    pub effort: Option<String>,
    #[serde(default = "default_latent_variance")]
    pub variance: f64,
    /// Mean fixing probability for each effectiveness state, lowest first.
    #[serde(default = "ReworkParams::default_means")]
    pub fixing_means: [f64; 5],
}

impl ReworkParams {
    fn default_means() -> [f64; 5] {
        [0.01, 0.15, 0.4, 0.6, 0.8]
    }
}

impl Default for ReworkParams {
    fn default() -> Self {
        ReworkParams {
            process_quality: None,
            effort: None,
            variance: default_latent_variance(),
            fixing_means: Self::default_means(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementParams {
    #[serde(default)]
    pub requirement: Option<f64>,
    #[serde(default = "default_one")]
    pub max_value: f64,
    /// Assessed attribute as TNormal(mean, variance, 0, max_value); a flat
    /// prior when absent.
    #[serde(default)]
    pub attribute_mean: Option<f64>,
    #[serde(default = "RequirementParams::default_attribute_variance")]
    pub attribute_variance: f64,
}

impl RequirementParams {
    fn default_attribute_variance() -> f64 {
        4e-4
    }
}

impl Default for RequirementParams {
    fn default() -> Self {
        RequirementParams {
            requirement: None,
            max_value: 1.0,
            attribute_mean: None,
            attribute_variance: Self::default_attribute_variance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentFactor {
    pub name: String,
    #[serde(default = "default_one")]
    pub weight: f64,
    /// Enters the weighted mean as 1 - x.
    #[serde(default)]
    pub invert: bool,
    #[serde(default)]
    pub state: Option<String>,
}

impl LatentFactor {
    pub fn new(name: impl Into<String>) -> Self {
        LatentFactor { name: name.into(), weight: 1.0, invert: false, state: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentIndicator {
    pub name: String,
    #[serde(default)]
    pub invert: bool,
    #[serde(default)]
    pub state: Option<String>,
}

impl LatentIndicator {
    pub fn new(name: impl Into<String>) -> Self {
        LatentIndicator { name: name.into(), invert: false, state: None }
    }
}

/// Shared by the quality and risk-perception idioms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentParams {
    pub factors: Vec<LatentFactor>,
    #[serde(default)]
    pub indicators: Vec<LatentIndicator>,
    #[serde(default = "default_latent_variance")]
    pub variance: f64,
    #[serde(default = "default_indicator_variance")]
    pub indicator_variance: f64,
}

impl LatentParams {
    pub fn new(factors: Vec<LatentFactor>, indicators: Vec<LatentIndicator>) -> Self {
        LatentParams {
            factors,
            indicators,
            variance: default_latent_variance(),
            indicator_variance: default_indicator_variance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierFactor {
    pub name: String,
    pub states: Vec<String>,
    pub multipliers: Vec<f64>,
    #[serde(default)]
    pub state: Option<String>,
}

impl MultiplierFactor {
    /// The default use-deviation factor.
    pub fn use_deviation() -> Self {
        MultiplierFactor {
            name: "use_deviation".into(),
            states: vec![
                "intended use".into(),
                "minor deviations from intended use".into(),
                "major deviations from intended use".into(),
            ],
            multipliers: vec![1.0, 1.2, 1.5],
            state: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HazardOccurrenceParams {
    #[serde(default)]
    pub base: Option<f64>,
    /// Empty means the single default use-deviation factor.
    #[serde(default)]
    pub factors: Vec<MultiplierFactor>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InjuryEventParams {
    #[serde(default)]
    pub p_hazard: Option<f64>,
    #[serde(default)]
    pub p_injury_given_hazard: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductInjuryParams {
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub instances: Option<f64>,
    #[serde(default = "default_max_demands")]
    pub max_instances: f64,
}

impl Default for ProductInjuryParams {
    fn default() -> Self {
        ProductInjuryParams { p: None, instances: None, max_instances: default_max_demands() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskControlParams {
    #[serde(default)]
    pub control: Option<f64>,
    #[serde(default)]
    pub event: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScoreParams {
    #[serde(default)]
    pub major: Option<f64>,
    #[serde(default)]
    pub minor: Option<f64>,
    #[serde(default = "RiskScoreParams::default_scale")]
    pub scale: f64,
    #[serde(default = "RiskScoreParams::default_minor_weight")]
    pub minor_weight: f64,
    #[serde(default = "default_latent_variance")]
    pub variance: f64,
}

impl RiskScoreParams {
    fn default_scale() -> f64 {
        100.0
    }

    fn default_minor_weight() -> f64 {
        0.5
    }
}

impl Default for RiskScoreParams {
    fn default() -> Self {
        RiskScoreParams {
            major: None,
            minor: None,
            scale: Self::default_scale(),
            minor_weight: Self::default_minor_weight(),
            variance: default_latent_variance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTolerabilityParams {
    #[serde(default)]
    pub benefit: Option<String>,
    #[serde(default)]
    pub risk: Option<String>,
    #[serde(default = "default_latent_variance")]
    pub variance: f64,
}

impl Default for RiskTolerabilityParams {
    fn default() -> Self {
        RiskTolerabilityParams { benefit: None, risk: None, variance: default_latent_variance() }
    }
}

/// A user-supplied fragment. Node ids are local and get namespaced by the
/// instance name; references to ids outside the fragment are left alone.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CustomParams {
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub observations: Evidence,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
}
