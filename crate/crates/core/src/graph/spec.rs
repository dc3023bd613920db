//! Serializable model description, as written on disk or produced by
//! idiom composition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Labelled,
    Boolean,
    Ranked,
    IntegerInterval,
    ContinuousInterval,
}

impl NodeKind {
    pub fn is_discrete(self) -> bool {
        matches!(self, NodeKind::Labelled | NodeKind::Boolean | NodeKind::Ranked)
    }

    pub fn is_numeric(self) -> bool {
        !self.is_discrete()
    }
}

/// Node probability table, in source form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CpdSpec {
    /// One probability row per parent-state combination; the last parent
    /// varies fastest.
    Table(Vec<Vec<f64>>),
    Expression(String),
    /// One expression per state of `parent`, keyed by state label.
    Partitioned { parent: String, cases: BTreeMap<String, String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parents: Vec<String>,
    pub cpd: CpdSpec,
    /// Idiom instance the node came from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl NodeSpec {
    pub fn new(id: impl Into<String>, kind: NodeKind, cpd: CpdSpec) -> Self {
        Self { id: id.into(), kind, states: Vec::new(), bounds: None, parents: Vec::new(), cpd, group: None }
    }

    pub fn expression(id: impl Into<String>, kind: NodeKind, expr: impl Into<String>) -> Self {
        Self::new(id, kind, CpdSpec::Expression(expr.into()))
    }

    pub fn with_parents<S: Into<String>>(mut self, parents: impl IntoIterator<Item = S>) -> Self {
        self.parents = parents.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_states<S: Into<String>>(mut self, states: impl IntoIterator<Item = S>) -> Self {
        self.states = states.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Self {
        self.bounds = Some([lo, hi]);
        self
    }
}

/// A single observation on a node.
///
/// JSON form: a number is a value, a string a state label, and a
/// two-element array an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observation {
    Value(f64),
    State(String),
    Interval([f64; 2]),
}

pub type Evidence = BTreeMap<String, Observation>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub title: String,
    pub nodes: Vec<NodeSpec>,
    /// Observations that belong to the model itself (for instance the data
    /// an idiom was parameterized with). Query evidence overrides them.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub observations: Evidence,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl ModelSpec {
    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut NodeSpec> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    /// Built-in observations overlaid with `evidence`.
    pub fn merged_evidence(&self, evidence: &Evidence) -> Evidence {
        let mut merged = self.observations.clone();
        merged.extend(evidence.iter().map(|(k, v)| (k.clone(), v.clone())));
        merged
    }
}
