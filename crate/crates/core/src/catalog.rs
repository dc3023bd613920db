//! Bundled example corpus. Each example has a model document, an evidence
//! file and a manifest of expected values with tolerances.

use serde::{Deserialize, Serialize};

use crate::graph::{build_model, Evidence, ModelSpec};
use crate::inference::{infer, DiscretizationConfig, PosteriorSet};
use crate::io::{parse_evidence, parse_model, IoError, LoadOptions};

macro_rules! bundled {
    ($($id:literal),* $(,)?) => {
        &[$(RawExample {
            id: $id,
            model: include_str!(concat!("../bundled/", $id, "/model.json")),
            evidence: include_str!(concat!("../bundled/", $id, "/evidence.json")),
            expected: include_str!(concat!("../bundled/", $id, "/expected.json")),
        }),*]
    };
}

struct RawExample {
    id: &'static str,
    model: &'static str,
    evidence: &'static str,
    expected: &'static str,
}

static EXAMPLES: &[RawExample] = bundled![
    "fig4b_hammer_pfd",
    "fig5b_pfd_limited_data",
    "fig5c_pfd_limited_data_current",
    "fig6b_uncertain_accuracy",
    "fig7b_ttf",
    "fig8b_ttf_summary",
    "fig9b_failure_within_time",
    "fig10b_rework",
    "fig11a_requirement",
    "fig12b_manufacturing_quality",
    "fig12c_organisation_quality",
    "fig13_hammer_reliability",
    "fig14b_hazard_occurrence",
    "fig15b_injury_event",
    "fig16b_product_injury",
    "fig17b_risk_control",
    "fig18b_risk_score",
    "fig19b_risk_tolerability",
    "fig20b_risk_perception",
    "fig20c_risk_perception_media",
    "fig22b_aircraft",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Provenance {
    Paper,
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Mean,
    Variance,
    /// Total posterior mass of `states`.
    Probability,
    /// Passes when the most probable state is `state`.
    Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub key: String,
    pub node: String,
    pub quantity: Quantity,
    /// Inclusive acceptance band.
    pub range: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub provenance: Provenance,
    pub source: String,
    /// Extra evidence on top of the example's own.
    #[serde(default, skip_serializing_if = "Evidence::is_empty")]
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub key: String,
    pub provenance: Provenance,
    pub value: Option<f64>,
    pub range: [f64; 2],
    pub target: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Expectation {
    /// Reads the checked quantity out of a posterior set.
    pub fn measure(&self, posteriors: &PosteriorSet) -> Result<f64, String> {
        let p = posteriors.get(&self.node).ok_or_else(|| format!("no posterior for '{}'", self.node))?;
        match self.quantity {
            Quantity::Mean => Ok(p.mean),
            Quantity::Variance => Ok(p.variance),
            Quantity::Probability => self
                .states
                .iter()
                .map(|s| p.state_probability(s).ok_or_else(|| format!("'{}' has no state '{s}'", self.node)))
                .sum(),
            Quantity::Mode => {
                let want = self.state.as_deref().ok_or("mode expectation without a state")?;
                Ok(if p.mode() == Some(want) { 1.0 } else { 0.0 })
            }
        }
    }

    pub fn accepts(&self, value: f64) -> bool {
        match self.quantity {
            Quantity::Mode => value == 1.0,
            _ => value >= self.range[0] && value <= self.range[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleInfo {
    pub id: &'static str,
    pub title: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundledExample {
    pub id: &'static str,
    pub model_text: &'static str,
    pub spec: ModelSpec,
    pub evidence: Evidence,
    pub expected: Vec<Expectation>,
}

impl BundledExample {
    fn load(raw: &RawExample) -> Result<Self, IoError> {
        let spec = parse_model(raw.model, LoadOptions::default())?.spec;
        let evidence = parse_evidence(raw.evidence)?;
        let expected = serde_json::from_str(raw.expected)?;
        Ok(BundledExample { id: raw.id, model_text: raw.model, spec, evidence, expected })
    }

    pub fn title(&self) -> &str {
        &self.spec.title
    }

    pub fn description(&self) -> String {
        self.spec.metadata.get("description").and_then(|v| v.as_str()).unwrap_or_default().to_string()
    }

    /// Evidence sets the manifest needs: the example's own plus each
    /// distinct override, in first-use order.
    pub fn evidence_sets(&self) -> Vec<Evidence> {
        let mut sets = vec![self.evidence.clone()];
        for e in &self.expected {
            let mut ev = self.evidence.clone();
            ev.extend(e.evidence.clone());
            if !sets.contains(&ev) {
                sets.push(ev);
            }
        }
        sets
    }

    /// Runs the engine and checks every expectation.
    pub fn check(&self, config: &DiscretizationConfig) -> Vec<Outcome> {
        let model = match build_model(self.spec.clone()) {
            Ok(m) => m,
            Err(e) => return self.fail_all(&e.to_string()),
        };
        let mut cache: Vec<(Evidence, Result<PosteriorSet, String>)> = Vec::new();
        self.expected
            .iter()
            .map(|x| {
                let mut ev = self.evidence.clone();
                ev.extend(x.evidence.clone());
                let run = match cache.iter().find(|(e, _)| *e == ev) {
                    Some((_, r)) => r.clone(),
                    None => {
                        let r = infer(&model, &ev, config).map_err(|e| e.to_string());
                        cache.push((ev, r.clone()));
                        r
                    }
                };
                let value = run.and_then(|ps| x.measure(&ps));
                let (value, message) = match value {
                    Ok(v) => (Some(v), None),
                    Err(m) => (None, Some(m)),
                };
                Outcome {
                    key: x.key.clone(),
                    provenance: x.provenance,
                    value,
                    range: x.range,
                    target: x.target,
                    pass: value.is_some_and(|v| x.accepts(v)),
                    message,
                }
            })
            .collect()
    }

    fn fail_all(&self, message: &str) -> Vec<Outcome> {
        self.expected
            .iter()
            .map(|x| Outcome {
                key: x.key.clone(),
                provenance: x.provenance,
                value: None,
                range: x.range,
                target: x.target,
                pass: false,
                message: Some(message.to_string()),
            })
            .collect()
    }
}

pub fn example_ids() -> impl Iterator<Item = &'static str> {
    EXAMPLES.iter().map(|e| e.id)
}

pub fn list_bundled_examples() -> Vec<ExampleInfo> {
    bundled_examples()
        .into_iter()
        .map(|e| ExampleInfo { id: e.id, title: e.title().to_string(), description: e.description() })
        .collect()
}

pub fn bundled_examples() -> Vec<BundledExample> {
    EXAMPLES.iter().map(|r| BundledExample::load(r).unwrap_or_else(|e| panic!("bundled {}: {e}", r.id))).collect()
}

/// Looks an example up by full id or by its short prefix (`fig4b`).
pub fn bundled_example(name: &str) -> Option<BundledExample> {
    let raw = EXAMPLES
        .iter()
        .find(|e| e.id == name)
        .or_else(|| EXAMPLES.iter().find(|e| e.id.split('_').next() == Some(name)))?;
    BundledExample::load(raw).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_examples_load() {
        assert_eq!(bundled_examples().len(), 21);
    }

    #[test]
    fn lookup_by_prefix() {
        assert_eq!(bundled_example("fig4b").unwrap().id, "fig4b_hammer_pfd");
        assert_eq!(bundled_example("fig22b_aircraft").unwrap().id, "fig22b_aircraft");
        assert!(bundled_example("fig99").is_none());
    }
}
