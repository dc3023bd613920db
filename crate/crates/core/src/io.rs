//! On-disk formats: model documents, evidence files, scenarios and result
//! documents.
//!
//! A model document carries either raw nodes or an idiom manifest
//! (`idioms` plus `bindings`); manifests are expanded through the idiom
//! library when loaded.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::graph::{Evidence, ModelSpec, NodeSpec, Observation};
use crate::idioms::{compose, IdiomError, IdiomParams, PortBinding};
use crate::inference::{DiscretizationConfig, Percentiles, PosteriorSet, StateProbability};

pub const FORMAT_VERSION: u64 = 1;
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

const DOCUMENT_KEYS: [&str; 7] = ["version", "title", "nodes", "observations", "idioms", "bindings", "metadata"];
const NODE_KEYS: [&str; 7] = ["id", "kind", "states", "bounds", "parents", "cpd", "group"];
const BINDING_KEYS: [&str; 4] = ["from", "to", "mode", "cpd"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported format version {found:?} (this build reads version {supported})")]
    Version { found: Option<Value>, supported: u64 },
    #[error("unknown key '{path}'")]
    StrictKey { path: String },
    #[error("a document holds either nodes or an idiom manifest, not both")]
    MixedDocument,
    #[error(transparent)]
    Idiom(#[from] IdiomError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; keep only the cause.
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        IoError::Parse { line: e.line(), column: e.column(), message }
    }
}

/// One idiom entry of a manifest: an instance name plus tagged parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdiomInstance {
    #[serde(default)]
    pub instance: String,
    #[serde(flatten)]
    pub params: IdiomParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: u64,
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub observations: Evidence,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub idioms: Vec<IdiomInstance>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bindings: Vec<PortBinding>,
    /// Free-form: description, figure tag, anything else.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, Value>,
}

impl ModelDocument {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        ModelDocument {
            version: FORMAT_VERSION,
            title: spec.title.clone(),
            nodes: spec.nodes.clone(),
            observations: spec.observations.clone(),
            idioms: Vec::new(),
            bindings: Vec::new(),
            metadata: spec.metadata.clone(),
        }
    }

    pub fn is_manifest(&self) -> bool {
        !self.idioms.is_empty()
    }

    /// Expands a manifest, or copies raw nodes, into a model spec.
    pub fn to_spec(&self) -> Result<ModelSpec, IoError> {
        if self.is_manifest() && !self.nodes.is_empty() {
            return Err(IoError::MixedDocument);
        }
        let mut spec = if self.is_manifest() {
            let fragments = self
                .idioms
                .iter()
                .map(|i| crate::idioms::instantiate(&i.instance, &i.params))
                .collect::<Result<Vec<_>, _>>()?;
            compose(&self.title, &fragments, &self.bindings)?
        } else {
            ModelSpec { title: self.title.clone(), nodes: self.nodes.clone(), ..Default::default() }
        };
        spec.observations.extend(self.observations.clone());
        spec.metadata.extend(self.metadata.clone());
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadOptions {
    /// Unknown keys become warnings instead of errors.
    pub lax: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub document: ModelDocument,
    pub spec: ModelSpec,
    pub warnings: Vec<String>,
}

pub fn parse_model(text: &str, options: LoadOptions) -> Result<LoadedModel, IoError> {
    let value: Value = serde_json::from_str(text)?;
    match value.get("version") {
        Some(v) if v.as_u64() == Some(FORMAT_VERSION) => {}
        found => return Err(IoError::Version { found: found.cloned(), supported: FORMAT_VERSION }),
    }
    let document: ModelDocument = serde_json::from_str(text)?;
    let unknown = unknown_keys(&value, &document);
    let mut warnings = Vec::new();
    if let Some(first) = unknown.first() {
        if !options.lax {
            return Err(IoError::StrictKey { path: first.clone() });
        }
        warnings.extend(unknown.iter().map(|k| format!("ignored unknown key '{k}'")));
    }
    let spec = document.to_spec()?;
    Ok(LoadedModel { document, spec, warnings })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSpec, IoError> {
    load_model_with(path, LoadOptions::default()).map(|m| m.spec)
}

pub fn load_model_with(path: impl AsRef<Path>, options: LoadOptions) -> Result<LoadedModel, IoError> {
    parse_model(&read(path.as_ref())?, options)
}

/// Canonical document text for a spec.
pub fn model_to_string(spec: &ModelSpec) -> String {
    let mut text = serde_json::to_string_pretty(&ModelDocument::from_spec(spec)).expect("model serializes");
    text.push('\n');
    text
}

pub fn save_model(spec: &ModelSpec, path: impl AsRef<Path>) -> Result<(), IoError> {
    write(path.as_ref(), &model_to_string(spec))
}

pub fn parse_evidence(text: &str) -> Result<Evidence, IoError> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_evidence(path: impl AsRef<Path>) -> Result<Evidence, IoError> {
    parse_evidence(&read(path.as_ref())?)
}

/// A named what-if configuration over a model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub evidence: Evidence,
    /// Node id to forced value.
    #[serde(default)]
    pub interventions: BTreeMap<String, Observation>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, IoError> {
    Ok(serde_json::from_str(&read(path.as_ref())?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub mean: f64,
    pub variance: f64,
    pub percentiles: Percentiles,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<StateProbability>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub engine_version: String,
    pub config: DiscretizationConfig,
    pub evidence: Evidence,
    pub nodes: BTreeMap<String, NodeSummary>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Left out by default so identical inputs give identical files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl ResultDocument {
    pub fn new(posteriors: &PosteriorSet, evidence: &Evidence, config: &DiscretizationConfig) -> Self {
        ResultDocument {
            engine_version: ENGINE_VERSION.to_string(),
            config: config.clone(),
            evidence: evidence.clone(),
            nodes: posteriors
                .nodes
                .iter()
                .map(|(id, p)| {
                    let s = NodeSummary { mean: p.mean, variance: p.variance, percentiles: p.percentiles, states: p.states.clone() };
                    (id.clone(), s)
                })
                .collect(),
            iterations: posteriors.iterations,
            converged: posteriors.converged,
            warnings: posteriors.warnings.iter().map(|w| w.message.clone()).collect(),
            wall_time_ms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultFormat {
    Json,
    Csv,
}

pub const CSV_HEADER: &str = "node,mean,variance,p05,p25,p50,p75,p95";

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_numbers),
        Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

pub fn render_results(doc: &ResultDocument, format: ResultFormat) -> String {
    match format {
        ResultFormat::Json => {
            let mut v = serde_json::to_value(doc).expect("results serialize");
            round_numbers(&mut v);
            let mut text = serde_json::to_string_pretty(&v).expect("results serialize");
            text.push('\n');
            text
        }
        ResultFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for (id, s) in &doc.nodes {
                let _ = write!(out, "{id},{},{}", round_sig(s.mean), round_sig(s.variance));
                for p in s.percentiles.as_array() {
                    let _ = write!(out, ",{}", round_sig(p));
                }
                out.push('\n');
            }
            out
        }
    }
}

pub fn write_results(doc: &ResultDocument, path: impl AsRef<Path>, format: ResultFormat) -> Result<(), IoError> {
    write(path.as_ref(), &render_results(doc, format))
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

/// Keys in `raw` that the parsed document does not account for.
fn unknown_keys(raw: &Value, doc: &ModelDocument) -> Vec<String> {
    let mut out = Vec::new();
    let extra = |obj: &Value, allowed: &BTreeSet<String>, prefix: &str, out: &mut Vec<String>| {
        if let Some(o) = obj.as_object() {
            out.extend(o.keys().filter(|k| !allowed.contains(*k)).map(|k| format!("{prefix}{k}")));
        }
    };
    let set = |keys: &[&str]| keys.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    extra(raw, &set(&DOCUMENT_KEYS), "", &mut out);
    let check_nodes = |nodes: Option<&Value>, prefix: &str, out: &mut Vec<String>| {
        for (i, n) in nodes.and_then(Value::as_array).into_iter().flatten().enumerate() {
            extra(n, &set(&NODE_KEYS), &format!("{prefix}nodes[{i}]."), out);
        }
    };
    check_nodes(raw.get("nodes"), "", &mut out);
    for (i, b) in raw.get("bindings").and_then(Value::as_array).into_iter().flatten().enumerate() {
        extra(b, &set(&BINDING_KEYS), &format!("bindings[{i}]."), &mut out);
    }
    for (i, (r, parsed)) in raw.get("idioms").and_then(Value::as_array).into_iter().flatten().zip(&doc.idioms).enumerate() {
        // Parameter records serialize every field, so their keys are
        // exactly the accepted ones.
        let mut allowed: BTreeSet<String> = serde_json::to_value(parsed)
            .ok()
            .and_then(|v| v.as_object().map(|o| o.keys().cloned().collect()))
            .unwrap_or_default();
        allowed.insert("instance".into());
        let prefix = format!("idioms[{i}].");
        extra(r, &allowed, &prefix, &mut out);
        check_nodes(r.get("nodes"), &prefix, &mut out);
    }
    out
}
