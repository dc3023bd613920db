//! Typed DAG models: node kinds, state spaces, parents and their CPDs.

mod diagnostics;
mod spec;
pub mod support;

use std::collections::HashMap;

use thiserror::Error;

use crate::expr::{parse_expression, Expr, ParseError};

pub use diagnostics::{validate_model, validate_with_evidence, Diagnostic, DiagnosticCode, DiagnosticsReport, Severity};
pub use spec::{CpdSpec, Evidence, ModelSpec, NodeKind, NodeSpec, Observation};
use support::Range;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("node '{node}' lists unknown parent '{parent}'")]
    UnknownParent { node: String, parent: String },
    #[error("expression of node '{node}' references '{reference}', which is not a declared parent")]
    Arity { node: String, reference: String },
    #[error("node '{node}' has no finite support; declare bounds")]
    UnboundedSupport { node: String },
    #[error("duplicate node id '{0}'")]
    DuplicateNode(String),
    #[error("node '{node}': {message}")]
    InvalidNode { node: String, message: String },
    #[error("node '{node}': {source}")]
    Parse { node: String, source: ParseError },
}

fn invalid(node: &str, message: impl Into<String>) -> BuildError {
    BuildError::InvalidNode { node: node.to_string(), message: message.into() }
}

/// Compiled CPD. Expression references are parent slot indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Cpd {
    Table(Vec<Vec<f64>>),
    Expr(Expr<usize>),
    /// `cases[s]` applies when the parent in `slot` is in state `s`;
    /// `None` marks a gap, reported by validation.
    Partitioned { slot: usize, cases: Vec<Option<Expr<usize>>> },
}

impl Cpd {
    pub fn expressions(&self) -> impl Iterator<Item = &Expr<usize>> {
        let v: Vec<&Expr<usize>> = match self {
            Cpd::Table(_) => Vec::new(),
            Cpd::Expr(e) => vec![e],
            Cpd::Partitioned { cases, .. } => cases.iter().flatten().collect(),
        };
        v.into_iter()
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            Cpd::Table(rows) => rows.iter().all(|r| r.iter().all(|&p| p == 0.0 || p == 1.0)),
            _ => self.expressions().all(Expr::is_deterministic),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub states: Vec<String>,
    pub parents: Vec<usize>,
    pub cpd: Cpd,
    /// Numeric range: resolved bounds for interval nodes, the range of
    /// state values for discrete nodes.
    pub support: Range,
    pub group: Option<String>,
}

impl Node {
    pub fn is_discrete(&self) -> bool {
        self.kind.is_discrete()
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label).or_else(|| {
            let lower = label.to_ascii_lowercase();
            self.states.iter().position(|s| s.to_ascii_lowercase() == lower)
        })
    }

    /// Numeric value a discrete state takes when used as a parent:
    /// ranked midpoints, otherwise the state index.
    pub fn state_value(&self, i: usize) -> f64 {
        match self.kind {
            NodeKind::Ranked => (i as f64 + 0.5) / self.states.len() as f64,
            _ => i as f64,
        }
    }

    /// Interval of the 0..1 scale covered by ranked state `i`.
    pub fn ranked_interval(&self, i: usize) -> Range {
        let k = self.states.len() as f64;
        [i as f64 / k, (i as f64 + 1.0) / k]
    }

    /// Maps a numeric value onto a discrete state: ranked nodes use the
    /// interval containing it, other kinds round to the nearest index.
    pub fn state_for_value(&self, v: f64) -> usize {
        let k = self.states.len();
        match self.kind {
            NodeKind::Ranked => ((v * k as f64).floor().max(0.0) as usize).min(k - 1),
            _ => (v.round().max(0.0) as usize).min(k - 1),
        }
    }
}

/// Immutable compiled model; safe to share between concurrent queries.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledModel {
    spec: ModelSpec,
    nodes: Vec<Node>,
    order: Vec<usize>,
    index: HashMap<String, usize>,
}

impl CompiledModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Nodes in declaration order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node_by_id(&self, id: &str) -> Option<&Node> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    /// Topological order as declaration indices.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        self.nodes.iter().enumerate().filter(|(_, n)| n.parents.contains(&i)).map(|(j, _)| j).collect()
    }
}

/// Node ids in topological order. Ties go to declaration order.
pub fn topological_order(model: &CompiledModel) -> Vec<String> {
    model.order.iter().map(|&i| model.nodes[i].id.clone()).collect()
}

fn stable_topo(parents: &[Vec<usize>]) -> Result<Vec<usize>, Vec<usize>> {
    let n = parents.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n).find(|&i| !placed[i] && parents[i].iter().all(|&p| placed[p]));
        match next {
            Some(i) => {
                placed[i] = true;
                order.push(i);
            }
            None => return Err(find_cycle(parents, &placed)),
        }
    }
    Ok(order)
}

/// Walks parent links among unplaced nodes until a node repeats, then
/// reports the cycle in edge direction starting from its earliest node.
fn find_cycle(parents: &[Vec<usize>], placed: &[bool]) -> Vec<usize> {
    let start = placed.iter().position(|p| !p).expect("some node unplaced");
    let mut path = vec![start];
    let mut cur = start;
    loop {
        let next = *parents[cur].iter().find(|&&p| !placed[p]).expect("unplaced node has an unplaced parent");
        if let Some(pos) = path.iter().position(|&x| x == next) {
            let mut cycle: Vec<usize> = path[pos..].to_vec();
            cycle.reverse();
            let min_pos = cycle.iter().enumerate().min_by_key(|(_, &x)| x).map(|(i, _)| i).unwrap();
            cycle.rotate_left(min_pos);
            return cycle;
        }
        path.push(next);
        cur = next;
    }
}

fn default_states(spec: &NodeSpec) -> Result<Vec<String>, BuildError> {
    match spec.kind {
        NodeKind::Boolean => {
            if spec.states.is_empty() || spec.states == ["False", "True"] {
                Ok(vec!["False".into(), "True".into()])
            } else {
                Err(invalid(&spec.id, "Boolean states must be exactly [False, True]"))
            }
        }
        NodeKind::Labelled | NodeKind::Ranked => {
            if spec.states.len() < 2 {
                return Err(invalid(&spec.id, "needs at least two states"));
            }
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = spec.states.iter().find(|s| !seen.insert(s.as_str())) {
                return Err(invalid(&spec.id, format!("duplicate state '{dup}'")));
            }
            Ok(spec.states.clone())
        }
        _ => {
            if !spec.states.is_empty() {
                return Err(invalid(&spec.id, "interval nodes take bounds, not states"));
            }
            Ok(Vec::new())
        }
    }
}

fn compile_expr(node: &NodeSpec, text: &str, parents: &[String]) -> Result<Expr<usize>, BuildError> {
    let ast = parse_expression(text).map_err(|source| BuildError::Parse { node: node.id.clone(), source })?;
    if !ast.has_valid_distribution_placement() {
        return Err(invalid(&node.id, format!("distributions may only appear at the top level or in if branches: {text}")));
    }
    ast.try_map_refs(&mut |r: &String| {
        parents
            .iter()
            .position(|p| p == r)
            .ok_or_else(|| BuildError::Arity { node: node.id.clone(), reference: r.clone() })
    })
}

/// Compiles a model: resolves parents, parses expressions, orders nodes
/// topologically and derives finite supports. Deterministic in `spec`.
pub fn build_model(spec: ModelSpec) -> Result<CompiledModel, BuildError> {
    let mut index = HashMap::new();
    for (i, n) in spec.nodes.iter().enumerate() {
        if index.insert(n.id.clone(), i).is_some() {
            return Err(BuildError::DuplicateNode(n.id.clone()));
        }
    }

    let mut parent_idx = Vec::with_capacity(spec.nodes.len());
    for n in &spec.nodes {
        let mut ps = Vec::with_capacity(n.parents.len());
        for p in &n.parents {
            let j = *index
                .get(p)
                .ok_or_else(|| BuildError::UnknownParent { node: n.id.clone(), parent: p.clone() })?;
            if ps.contains(&j) {
                return Err(invalid(&n.id, format!("parent '{p}' listed twice")));
            }
            ps.push(j);
        }
        parent_idx.push(ps);
    }

    let order = stable_topo(&parent_idx).map_err(|cycle| {
        BuildError::Cycle(cycle.into_iter().map(|i| spec.nodes[i].id.clone()).collect())
    })?;

    let mut nodes: Vec<Option<Node>> = vec![None; spec.nodes.len()];
    for &i in &order {
        let ns = &spec.nodes[i];
        let states = default_states(ns)?;
        let cpd = match &ns.cpd {
            CpdSpec::Table(rows) => {
                if !ns.kind.is_discrete() {
                    return Err(invalid(&ns.id, "table CPDs require a discrete node"));
                }
                let mut combos = 1usize;
                for &p in &parent_idx[i] {
                    let pn = nodes[p].as_ref().unwrap();
                    if !pn.is_discrete() {
                        return Err(invalid(&ns.id, format!("table CPD with numeric parent '{}'", pn.id)));
                    }
                    combos *= pn.state_count();
                }
                if rows.len() != combos {
                    return Err(invalid(&ns.id, format!("table has {} rows, expected {combos}", rows.len())));
                }
                if let Some(r) = rows.iter().find(|r| r.len() != states.len()) {
                    return Err(invalid(&ns.id, format!("table row has {} entries, expected {}", r.len(), states.len())));
                }
                Cpd::Table(rows.clone())
            }
            CpdSpec::Expression(text) => Cpd::Expr(compile_expr(ns, text, &ns.parents)?),
            CpdSpec::Partitioned { parent, cases } => {
                let slot = ns
                    .parents
                    .iter()
                    .position(|p| p == parent)
                    .ok_or_else(|| BuildError::Arity { node: ns.id.clone(), reference: parent.clone() })?;
                let pn = nodes[parent_idx[i][slot]].as_ref().unwrap();
                if !pn.is_discrete() {
                    return Err(invalid(&ns.id, format!("partition parent '{parent}' must be discrete")));
                }
                let mut compiled = vec![None; pn.state_count()];
                for (label, text) in cases {
                    let s = pn
                        .state_index(label)
                        .ok_or_else(|| invalid(&ns.id, format!("partition parent '{parent}' has no state '{label}'")))?;
                    compiled[s] = Some(compile_expr(ns, text, &ns.parents)?);
                }
                Cpd::Partitioned { slot, cases: compiled }
            }
        };

        let support = if ns.kind.is_discrete() {
            let k = states.len() as f64;
            if ns.kind == NodeKind::Ranked {
                [0.5 / k, 1.0 - 0.5 / k]
            } else {
                [0.0, k - 1.0]
            }
        } else {
            let parent_ranges: Vec<Range> = parent_idx[i].iter().map(|&p| nodes[p].as_ref().unwrap().support).collect();
            let derived = cpd
                .expressions()
                .map(|e| support::support_range(e, &parent_ranges))
                .reduce(|a, b| [a[0].min(b[0]), a[1].max(b[1])])
                .unwrap_or([f64::NEG_INFINITY, f64::INFINITY]);
            resolve_bounds(ns, derived)?
        };

        nodes[i] = Some(Node {
            id: ns.id.clone(),
            kind: ns.kind,
            states,
            parents: parent_idx[i].clone(),
            cpd,
            support,
            group: ns.group.clone(),
        });
    }

    Ok(CompiledModel { spec, nodes: nodes.into_iter().map(Option::unwrap).collect(), order, index })
}

fn resolve_bounds(ns: &NodeSpec, derived: Range) -> Result<Range, BuildError> {
    let mut r = match ns.bounds {
        Some([lo, hi]) => {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(invalid(&ns.id, format!("bounds must be finite with lo < hi, got [{lo}, {hi}]")));
            }
            let r = [derived[0].max(lo), derived[1].min(hi)];
            if r[0] > r[1] {
                return Err(invalid(&ns.id, format!("declared bounds [{lo}, {hi}] exclude the derived support")));
            }
            r
        }
        None => derived,
    };
    if !(r[0].is_finite() && r[1].is_finite()) {
        return Err(BuildError::UnboundedSupport { node: ns.id.clone() });
    }
    if ns.kind == NodeKind::IntegerInterval {
        r = [r[0].ceil(), r[1].floor()];
        if r[0] > r[1] {
            return Err(invalid(&ns.id, "support contains no integer"));
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterventionError {
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("value {value} is outside the domain of '{node}'")]
    ValueOutOfDomain { node: String, value: String },
    #[error(transparent)]
    Build(#[from] BuildError),
}

impl CompiledModel {
    /// Copy of the model with `node` cut from its parents and fixed at
    /// `value`. Built-in observations on the node are dropped.
    pub fn intervene(&self, node: &str, value: &Observation) -> Result<CompiledModel, InterventionError> {
        let n = self.node_by_id(node).ok_or_else(|| InterventionError::UnknownNode(node.to_string()))?;
        let out_of_domain = || InterventionError::ValueOutOfDomain { node: node.to_string(), value: format!("{value:?}") };
        let cpd = if n.is_discrete() {
            let s = match value {
                Observation::State(label) => n.state_index(label).ok_or_else(out_of_domain)?,
                Observation::Value(v) if v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < n.state_count() => *v as usize,
                _ => return Err(out_of_domain()),
            };
            let mut row = vec![0.0; n.state_count()];
            row[s] = 1.0;
            CpdSpec::Table(vec![row])
        } else {
            let v = match value {
                Observation::Value(v) => *v,
                _ => return Err(out_of_domain()),
            };
            let [lo, hi] = n.support;
            let integral_ok = n.kind != NodeKind::IntegerInterval || v.fract() == 0.0;
            if !(v >= lo - 1e-12 && v <= hi + 1e-12) || !integral_ok {
                return Err(out_of_domain());
            }
            CpdSpec::Expression(format!("Arithmetic({})", Expr::<String>::Const(v)))
        };
        let mut spec = self.spec.clone();
        let ns = spec.node_mut(node).unwrap();
        ns.parents.clear();
        ns.cpd = cpd;
        if let (Some(b), Observation::Value(v)) = (ns.bounds.as_mut(), value) {
            b[0] = b[0].min(*v);
            b[1] = b[1].max(*v);
        }
        spec.observations.remove(node);
        Ok(build_model(spec)?)
    }
}
