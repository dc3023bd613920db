//! Product-safety idiom library: parameterized network fragments with named
//! ports, and composition of fragments into whole models.
//!
//! Node ids are `{instance}_{local}`; an empty instance name leaves local
//! ids unprefixed. Data an idiom is parameterized with (counts, observed
//! times, requirement levels) is stored as built-in observations on the
//! resulting model, so query evidence can override it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expression, ParseError};
use crate::graph::{CpdSpec, Evidence, ModelSpec, NodeKind, NodeSpec};

mod params;
mod templates;

pub use params::*;
pub use templates::{ACCURACY_STATES, RANKED_SCALE, SIMILARITY_STATES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdiomKind {
    Pfd,
    PfdLimitedData,
    UncertainAccuracy,
    Ttf,
    TtfSummary,
    FailureWithinTime,
    Rework,
    Requirement,
    Quality,
    HazardOccurrence,
    InjuryEvent,
    ProductInjury,
    RiskControl,
    RiskScore,
    RiskTolerability,
    RiskPerception,
    Custom,
}

impl IdiomKind {
    pub const ALL: [IdiomKind; 17] = [
        IdiomKind::Pfd,
        IdiomKind::PfdLimitedData,
        IdiomKind::UncertainAccuracy,
        IdiomKind::Ttf,
        IdiomKind::TtfSummary,
        IdiomKind::FailureWithinTime,
        IdiomKind::Rework,
        IdiomKind::Requirement,
        IdiomKind::Quality,
        IdiomKind::HazardOccurrence,
        IdiomKind::InjuryEvent,
        IdiomKind::ProductInjury,
        IdiomKind::RiskControl,
        IdiomKind::RiskScore,
        IdiomKind::RiskTolerability,
        IdiomKind::RiskPerception,
        IdiomKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdiomKind::Pfd => "pfd",
            IdiomKind::PfdLimitedData => "pfd_limited_data",
            IdiomKind::UncertainAccuracy => "uncertain_accuracy",
            IdiomKind::Ttf => "ttf",
            IdiomKind::TtfSummary => "ttf_summary",
            IdiomKind::FailureWithinTime => "failure_within_time",
            IdiomKind::Rework => "rework",
            IdiomKind::Requirement => "requirement",
            IdiomKind::Quality => "quality",
            IdiomKind::HazardOccurrence => "hazard_occurrence",
            IdiomKind::InjuryEvent => "injury_event",
            IdiomKind::ProductInjury => "product_injury",
            IdiomKind::RiskControl => "risk_control",
            IdiomKind::RiskScore => "risk_score",
            IdiomKind::RiskTolerability => "risk_tolerability",
            IdiomKind::RiskPerception => "risk_perception",
            IdiomKind::Custom => "custom",
        }
    }

    pub fn category(self) -> &'static str {
        use IdiomKind::*;
        match self {
            Pfd | PfdLimitedData | UncertainAccuracy | Ttf | TtfSummary | FailureWithinTime => "reliability",
            Rework | Requirement | Quality => "process",
            HazardOccurrence | InjuryEvent | ProductInjury => "occurrence",
            RiskControl | RiskScore | RiskTolerability | RiskPerception => "risk",
            Custom => "custom",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            IdiomKind::Pfd => "Probability of failure on demand learned from failures in a number of demands.",
            IdiomKind::PfdLimitedData => {
                "Probability of failure on demand borrowed from a previous system, scaled by how similar the systems are."
            }
            IdiomKind::UncertainAccuracy => "Event counts whose reporting may be over- or under-estimated.",
            IdiomKind::Ttf => "Exponential failure rate learned from observed failure times.",
            IdiomKind::TtfSummary => "Time to failure from a summary mean and variance of observed failure times.",
            IdiomKind::FailureWithinTime => "Probability that failure happens within a given operating time.",
            IdiomKind::Rework => "Probability of fixing a fault, driven by rework process quality and effort.",
            IdiomKind::Requirement => "Whether a product attribute meets a requirement threshold.",
            IdiomKind::Quality => "Latent quality with causal factors and observable indicators.",
            IdiomKind::HazardOccurrence => "Baseline hazard probability scaled by multiplicative factors.",
            IdiomKind::InjuryEvent => "Probability of injury as hazard probability times injury given hazard.",
            IdiomKind::ProductInjury => "Number of injuries among product instances in use.",
            IdiomKind::RiskControl => "Residual event probability after a control: (1 - control) x event.",
            IdiomKind::RiskScore => "Ranked risk level from major and minor injury probabilities.",
            IdiomKind::RiskTolerability => "Tolerability from ranked benefit and risk.",
            IdiomKind::RiskPerception => "Perceived risk with causal factors and observable indicators.",
            IdiomKind::Custom => "A user-supplied fragment with explicit ports.",
        }
    }
}

impl fmt::Display for IdiomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Idiom parameters, tagged by kind in JSON: `{"kind": "pfd", "observed": 10}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IdiomParams {
    Pfd(PfdParams),
    PfdLimitedData(PfdLimitedDataParams),
    UncertainAccuracy(UncertainAccuracyParams),
    Ttf(TtfParams),
    TtfSummary(TtfSummaryParams),
    FailureWithinTime(FailureWithinTimeParams),
    Rework(ReworkParams),
    Requirement(RequirementParams),
    Quality(LatentParams),
    HazardOccurrence(HazardOccurrenceParams),
    InjuryEvent(InjuryEventParams),
    ProductInjury(ProductInjuryParams),
    RiskControl(RiskControlParams),
    RiskScore(RiskScoreParams),
    RiskTolerability(RiskTolerabilityParams),
    RiskPerception(LatentParams),
    Custom(CustomParams),
}

impl IdiomParams {
    pub fn kind(&self) -> IdiomKind {
        match self {
            IdiomParams::Pfd(_) => IdiomKind::Pfd,
            IdiomParams::PfdLimitedData(_) => IdiomKind::PfdLimitedData,
            IdiomParams::UncertainAccuracy(_) => IdiomKind::UncertainAccuracy,
            IdiomParams::Ttf(_) => IdiomKind::Ttf,
            IdiomParams::TtfSummary(_) => IdiomKind::TtfSummary,
            IdiomParams::FailureWithinTime(_) => IdiomKind::FailureWithinTime,
            IdiomParams::Rework(_) => IdiomKind::Rework,
            IdiomParams::Requirement(_) => IdiomKind::Requirement,
            IdiomParams::Quality(_) => IdiomKind::Quality,
            IdiomParams::HazardOccurrence(_) => IdiomKind::HazardOccurrence,
            IdiomParams::InjuryEvent(_) => IdiomKind::InjuryEvent,
            IdiomParams::ProductInjury(_) => IdiomKind::ProductInjury,
            IdiomParams::RiskControl(_) => IdiomKind::RiskControl,
            IdiomParams::RiskScore(_) => IdiomKind::RiskScore,
            IdiomParams::RiskTolerability(_) => IdiomKind::RiskTolerability,
            IdiomParams::RiskPerception(_) => IdiomKind::RiskPerception,
            IdiomParams::Custom(_) => IdiomKind::Custom,
        }
    }

    /// Representative parameters used by the catalog.
    pub fn example(kind: IdiomKind) -> IdiomParams {
        let ranked = |n: &str| LatentFactor::new(n);
        match kind {
            IdiomKind::Pfd => IdiomParams::Pfd(PfdParams { observed: Some(10.0), demands: Some(1000.0), ..Default::default() }),
            IdiomKind::PfdLimitedData => IdiomParams::PfdLimitedData(PfdLimitedDataParams::new(10.0, 1000.0)),
            IdiomKind::UncertainAccuracy => IdiomParams::UncertainAccuracy(UncertainAccuracyParams::default()),
            IdiomKind::Ttf => IdiomParams::Ttf(TtfParams { failure_times: vec![100.0, 120.0], ..Default::default() }),
            IdiomKind::TtfSummary => IdiomParams::TtfSummary(TtfSummaryParams { mean: 100.0, variance: 250.0, horizon: None }),
            IdiomKind::FailureWithinTime => IdiomParams::FailureWithinTime(FailureWithinTimeParams::default()),
            IdiomKind::Rework => IdiomParams::Rework(ReworkParams::default()),
            IdiomKind::Requirement => IdiomParams::Requirement(RequirementParams::default()),
            IdiomKind::Quality => IdiomParams::Quality(LatentParams::new(
                vec![ranked("process")],
                vec![LatentIndicator::new("defects")],
            )),
            IdiomKind::HazardOccurrence => IdiomParams::HazardOccurrence(HazardOccurrenceParams::default()),
            IdiomKind::InjuryEvent => IdiomParams::InjuryEvent(InjuryEventParams::default()),
            IdiomKind::ProductInjury => IdiomParams::ProductInjury(ProductInjuryParams::default()),
            IdiomKind::RiskControl => IdiomParams::RiskControl(RiskControlParams::default()),
            IdiomKind::RiskScore => IdiomParams::RiskScore(RiskScoreParams::default()),
            IdiomKind::RiskTolerability => IdiomParams::RiskTolerability(RiskTolerabilityParams::default()),
            IdiomKind::RiskPerception => IdiomParams::RiskPerception(LatentParams::new(
                vec![ranked("severity")],
                vec![LatentIndicator::new("feedback")],
            )),
            IdiomKind::Custom => IdiomParams::Custom(CustomParams {
                nodes: vec![NodeSpec::expression("x", NodeKind::ContinuousInterval, "Uniform(0, 1)").with_bounds(0.0, 1.0)],
                outputs: BTreeMap::from([("x".to_string(), "x".to_string())]),
                inputs: BTreeMap::from([("x".to_string(), "x".to_string())]),
                ..Default::default()
            }),
        }
    }
}

#[derive(Debug, Error)]
pub enum IdiomError {
    #[error("invalid {kind} parameter: {message}")]
    BadParameter { kind: IdiomKind, message: String },
    #[error("malformed port reference '{0}' (expected instance.port)")]
    BadPortRef(String),
    #[error("no fragment instance named '{0}'")]
    UnknownInstance(String),
    #[error("instance '{instance}' has no port '{port}'")]
    UnknownPort { instance: String, port: String },
    #[error("cannot merge '{from}' ({from_kind:?}) into '{to}' ({to_kind:?})")]
    PortKindMismatch { from: String, to: String, from_kind: NodeKind, to_kind: NodeKind },
    #[error("duplicate binding onto '{0}'")]
    DuplicateBinding(String),
    #[error("instance name '{0}' is used twice")]
    DuplicateInstance(String),
    #[error("node id '{0}' is defined by two fragments")]
    DuplicateNode(String),
    #[error("composition creates a cycle through {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("expression in '{node}': {source}")]
    Expression { node: String, source: ParseError },
}

/// An instantiated idiom: nodes plus named input and output ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdiomFragment {
    pub kind: IdiomKind,
    pub instance: String,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub observations: Evidence,
    /// Port name to node id.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl IdiomFragment {
    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Node behind a port; outputs are searched before inputs.
    pub fn port(&self, port: &str) -> Option<&str> {
        self.outputs.get(port).or_else(|| self.inputs.get(port)).map(String::as_str)
    }

    pub fn into_model(self, title: impl Into<String>) -> ModelSpec {
        let mut metadata = BTreeMap::new();
        metadata.insert("idiom".to_string(), serde_json::json!({ "kind": self.kind, "instance": self.instance }));
        ModelSpec { title: title.into(), nodes: self.nodes, observations: self.observations, metadata }
    }
}

pub fn instantiate(instance: &str, params: &IdiomParams) -> Result<IdiomFragment, IdiomError> {
    templates::expand(instance, params)
}

pub fn instantiate_reliability_idiom(instance: &str, params: &IdiomParams) -> Result<IdiomFragment, IdiomError> {
    expect_category(params, "reliability")?;
    instantiate(instance, params)
}

pub fn instantiate_process_idiom(instance: &str, params: &IdiomParams) -> Result<IdiomFragment, IdiomError> {
    expect_category(params, "process")?;
    instantiate(instance, params)
}

pub fn instantiate_occurrence_idiom(instance: &str, params: &IdiomParams) -> Result<IdiomFragment, IdiomError> {
    expect_category(params, "occurrence")?;
    instantiate(instance, params)
}

pub fn instantiate_risk_idiom(instance: &str, params: &IdiomParams) -> Result<IdiomFragment, IdiomError> {
    expect_category(params, "risk")?;
    instantiate(instance, params)
}

fn expect_category(params: &IdiomParams, category: &str) -> Result<(), IdiomError> {
    let kind = params.kind();
    if kind.category() == category {
        Ok(())
    } else {
        Err(IdiomError::BadParameter { kind, message: format!("not a {category} idiom") })
    }
}

/// Catalog entry describing one idiom kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdiomInfo {
    pub kind: IdiomKind,
    pub category: &'static str,
    pub description: &'static str,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub example: IdiomParams,
}

pub fn catalog() -> Vec<IdiomInfo> {
    IdiomKind::ALL
        .iter()
        .map(|&kind| {
            let example = IdiomParams::example(kind);
            let frag = instantiate("", &example).expect("catalog examples instantiate");
            IdiomInfo {
                kind,
                category: kind.category(),
                description: kind.description(),
                inputs: frag.inputs.keys().cloned().collect(),
                outputs: frag.outputs.keys().cloned().collect(),
                example,
            }
        })
        .collect()
}

/// How a binding joins two ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BindingMode {
    /// The downstream port node is replaced by the upstream node, which keeps
    /// its own probability table.
    Merge,
    /// The upstream node becomes an extra parent of the downstream node,
    /// optionally with a new table written against namespaced ids.
    Link {
        #[serde(default)]
        cpd: Option<CpdSpec>,
    },
}

/// Connects `from` (an output, `instance.port`) to `to` (an input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortBinding {
    pub from: String,
    pub to: String,
    #[serde(flatten)]
    pub mode: BindingMode,
}

impl PortBinding {
    pub fn merge(from: impl Into<String>, to: impl Into<String>) -> Self {
        PortBinding { from: from.into(), to: to.into(), mode: BindingMode::Merge }
    }

    pub fn link(from: impl Into<String>, to: impl Into<String>, cpd: Option<CpdSpec>) -> Self {
        PortBinding { from: from.into(), to: to.into(), mode: BindingMode::Link { cpd } }
    }
}

/// Rewrites every node reference inside a table.
pub fn rename_cpd(cpd: &CpdSpec, f: &dyn Fn(&str) -> String) -> Result<CpdSpec, ParseError> {
    let rename = |text: &str| -> Result<String, ParseError> {
        let e = parse_expression(text)?;
        let e = e.try_map_refs(&mut |r: &String| Ok::<_, ParseError>(f(r)))?;
        Ok(e.to_string())
    };
    Ok(match cpd {
        CpdSpec::Table(rows) => CpdSpec::Table(rows.clone()),
        CpdSpec::Expression(t) => CpdSpec::Expression(rename(t)?),
        CpdSpec::Partitioned { parent, cases } => CpdSpec::Partitioned {
            parent: f(parent),
            cases: cases.iter().map(|(k, v)| Ok((k.clone(), rename(v)?))).collect::<Result<_, ParseError>>()?,
        },
    })
}

/// Composes fragments into one composite fragment. Its ports are the ports
/// of the parts, named `part.port`.
pub fn compose_fragments(
    instance: &str,
    fragments: &[IdiomFragment],
    bindings: &[PortBinding],
) -> Result<IdiomFragment, IdiomError> {
    let mut by_instance = BTreeMap::new();
    let mut owner = BTreeMap::new();
    for (i, frag) in fragments.iter().enumerate() {
        if by_instance.insert(frag.instance.as_str(), i).is_some() {
            return Err(IdiomError::DuplicateInstance(frag.instance.clone()));
        }
        for n in &frag.nodes {
            if owner.insert(n.id.as_str(), i).is_some() {
                return Err(IdiomError::DuplicateNode(n.id.clone()));
            }
        }
    }
    let resolve = |r: &str| -> Result<(usize, &str), IdiomError> {
        let (inst, port) = r.split_once('.').ok_or_else(|| IdiomError::BadPortRef(r.to_string()))?;
        let &i = by_instance.get(inst).ok_or_else(|| IdiomError::UnknownInstance(inst.to_string()))?;
        let node = fragments[i]
            .port(port)
            .ok_or_else(|| IdiomError::UnknownPort { instance: inst.to_string(), port: port.to_string() })?;
        Ok((i, node))
    };

    let mut merged: BTreeMap<String, String> = BTreeMap::new();
    let mut links: Vec<(String, String, Option<CpdSpec>)> = Vec::new();
    let mut bound = BTreeSet::new();
    for b in bindings {
        let (fi, from) = resolve(&b.from)?;
        let (ti, to) = resolve(&b.to)?;
        if from == to || !bound.insert((to.to_string(), from.to_string())) {
            return Err(IdiomError::DuplicateBinding(b.to.clone()));
        }
        match &b.mode {
            BindingMode::Merge => {
                if merged.contains_key(to) {
                    return Err(IdiomError::DuplicateBinding(b.to.clone()));
                }
                let (a, z) = (fragments[fi].node(from).unwrap(), fragments[ti].node(to).unwrap());
                if a.kind != z.kind || (a.kind.is_discrete() && a.states != z.states) {
                    return Err(IdiomError::PortKindMismatch {
                        from: b.from.clone(),
                        to: b.to.clone(),
                        from_kind: a.kind,
                        to_kind: z.kind,
                    });
                }
                merged.insert(to.to_string(), from.to_string());
            }
            BindingMode::Link { cpd } => links.push((from.to_string(), to.to_string(), cpd.clone())),
        }
    }
    // Follow merge chains to the surviving node.
    let target = |id: &str| -> String {
        let mut cur = id;
        let mut hops = 0;
        while let Some(next) = merged.get(cur) {
            cur = next;
            hops += 1;
            if hops > merged.len() {
                break;
            }
        }
        cur.to_string()
    };

    let mut nodes: Vec<NodeSpec> = Vec::new();
    let mut observations = Evidence::new();
    for frag in fragments {
        for n in &frag.nodes {
            if merged.contains_key(&n.id) {
                continue;
            }
            let mut n = n.clone();
            let mut parents = Vec::new();
            for p in &n.parents {
                let p = target(p);
                if !parents.contains(&p) {
                    parents.push(p);
                }
            }
            n.parents = parents;
            n.cpd = rename_cpd(&n.cpd, &|r: &str| target(r))
                .map_err(|source| IdiomError::Expression { node: n.id.clone(), source })?;
            nodes.push(n);
        }
        for (k, v) in &frag.observations {
            if !merged.contains_key(k) {
                observations.insert(k.clone(), v.clone());
            }
        }
    }
    for (from, to, cpd) in links {
        let (from, to) = (target(&from), target(&to));
        let node = nodes.iter_mut().find(|n| n.id == to).expect("linked node survives");
        if !node.parents.contains(&from) {
            node.parents.push(from);
        }
        if let Some(c) = cpd {
            node.cpd = rename_cpd(&c, &|r: &str| target(r))
                .map_err(|source| IdiomError::Expression { node: to.clone(), source })?;
        }
    }
    check_acyclic(&nodes)?;

    let mut inputs = BTreeMap::new();
    let mut outputs = BTreeMap::new();
    for frag in fragments {
        for (p, id) in &frag.inputs {
            inputs.insert(format!("{}.{p}", frag.instance), target(id));
        }
        for (p, id) in &frag.outputs {
            outputs.insert(format!("{}.{p}", frag.instance), target(id));
        }
    }
    let params = serde_json::json!({
        "parts": fragments.iter().map(|f| serde_json::json!({"kind": f.kind, "instance": f.instance})).collect::<Vec<_>>(),
        "bindings": bindings,
    });
    Ok(IdiomFragment { kind: IdiomKind::Custom, instance: instance.to_string(), nodes, observations, inputs, outputs, params })
}

/// Composes fragments straight into a model.
pub fn compose(title: &str, fragments: &[IdiomFragment], bindings: &[PortBinding]) -> Result<ModelSpec, IdiomError> {
    let frag = compose_fragments("", fragments, bindings)?;
    let params = frag.params.clone();
    let mut spec = frag.into_model(title);
    spec.metadata.insert("composition".to_string(), params);
    spec.metadata.remove("idiom");
    Ok(spec)
}

fn check_acyclic(nodes: &[NodeSpec]) -> Result<(), IdiomError> {
    let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    // 0 unvisited, 1 on stack, 2 done
    let mut state = vec![0u8; nodes.len()];
    let mut stack: Vec<usize> = Vec::new();
    fn visit(
        i: usize,
        nodes: &[NodeSpec],
        index: &BTreeMap<&str, usize>,
        state: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Result<(), Vec<String>> {
        state[i] = 1;
        stack.push(i);
        for p in &nodes[i].parents {
            let Some(&j) = index.get(p.as_str()) else { continue };
            match state[j] {
                0 => visit(j, nodes, index, state, stack)?,
                1 => {
                    let start = stack.iter().position(|&k| k == j).unwrap();
                    let mut cycle: Vec<String> = stack[start..].iter().rev().map(|&k| nodes[k].id.clone()).collect();
                    cycle.push(nodes[j].id.clone());
                    return Err(cycle);
                }
                _ => {}
            }
        }
        stack.pop();
        state[i] = 2;
        Ok(())
    }
    for i in 0..nodes.len() {
        if state[i] == 0 {
            visit(i, nodes, &index, &mut state, &mut stack).map_err(IdiomError::Cycle)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_model;

    #[test]
    fn every_catalog_example_builds() {
        for info in catalog() {
            let frag = instantiate("x", &info.example).unwrap();
            let spec = frag.into_model(info.kind.name());
            build_model(spec).unwrap_or_else(|e| panic!("{}: {e}", info.kind));
        }
    }

    #[test]
    fn params_round_trip_through_json() {
        for kind in IdiomKind::ALL {
            let p = IdiomParams::example(kind);
            let text = serde_json::to_string(&p).unwrap();
            assert!(text.contains(&format!("\"kind\":\"{}\"", kind.name())), "{text}");
            let back: IdiomParams = serde_json::from_str(&text).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn node_ids_are_namespaced() {
        let f = instantiate("brakes", &IdiomParams::example(IdiomKind::Pfd)).unwrap();
        assert!(f.nodes.iter().all(|n| n.id.starts_with("brakes_")));
        assert_eq!(f.outputs["p"], "brakes_p");
        assert_eq!(f.nodes[0].group.as_deref(), Some("brakes"));
    }

    #[test]
    fn empty_ttf_is_rejected() {
        let e = instantiate("t", &IdiomParams::Ttf(TtfParams::default())).unwrap_err();
        assert!(matches!(e, IdiomError::BadParameter { kind: IdiomKind::Ttf, .. }));
    }

    #[test]
    fn category_mismatch() {
        let p = IdiomParams::example(IdiomKind::Rework);
        assert!(instantiate_reliability_idiom("r", &p).is_err());
        assert!(instantiate_process_idiom("r", &p).is_ok());
    }

    #[test]
    fn rename_keeps_structure() {
        let c = CpdSpec::Expression("Binomial(n, p) ".into());
        let r = rename_cpd(&c, &|s: &str| format!("a_{s}")).unwrap();
        assert_eq!(r, CpdSpec::Expression("Binomial(a_n, a_p)".into()));
    }
}
