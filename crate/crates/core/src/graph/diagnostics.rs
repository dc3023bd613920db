//! Model validation. Findings are data, never errors.

use serde::{Deserialize, Serialize};

use super::{CompiledModel, Cpd, Evidence, NodeKind, Observation};
use crate::expr::{DistKind, Expr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticCode {
    NormalizationError,
    PartitionGap,
    UnboundedIntegerWarning,
    NonIntegerBinomialN,
    UnknownEvidenceNode,
    InvalidObservation,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl DiagnosticsReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.diagnostics.is_empty()
    }

    fn push(&mut self, severity: Severity, code: DiagnosticCode, node: Option<&str>, message: String) {
        self.diagnostics.push(Diagnostic { severity, code, node: node.map(str::to_string), message });
    }
}

/// Integer nodes wider than this must be observed or bounded.
pub const WIDE_INTEGER_RANGE: f64 = 1e6;

/// Validates a model against its built-in observations.
pub fn validate_model(model: &CompiledModel) -> DiagnosticsReport {
    validate_with_evidence(model, &Evidence::new())
}

/// Validates a model with `evidence` overlaid on its built-in observations.
pub fn validate_with_evidence(model: &CompiledModel, evidence: &Evidence) -> DiagnosticsReport {
    let evidence = model.spec().merged_evidence(evidence);
    let mut report = DiagnosticsReport::default();
    for node in model.nodes() {
        let id = Some(node.id.as_str());
        match &node.cpd {
            Cpd::Table(rows) => {
                for (r, row) in rows.iter().enumerate() {
                    let sum: f64 = row.iter().sum();
                    if row.iter().any(|&p| p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > 1e-9 {
                        report.push(
                            Severity::Error,
                            DiagnosticCode::NormalizationError,
                            id,
                            format!("table row {r} sums to {sum}"),
                        );
                    }
                }
            }
            Cpd::Partitioned { slot, cases } => {
                let parent = model.node(node.parents[*slot]);
                for (s, c) in cases.iter().enumerate() {
                    if c.is_none() {
                        report.push(
                            Severity::Error,
                            DiagnosticCode::PartitionGap,
                            id,
                            format!("no expression for {} = '{}'", parent.id, parent.states[s]),
                        );
                    }
                }
            }
            Cpd::Expr(_) => {}
        }
        for e in node.cpd.expressions() {
            if let Expr::Dist(DistKind::Binomial, args) = e {
                if let Expr::Const(n) = args[0] {
                    if n.fract() != 0.0 {
                        report.push(
                            Severity::Warning,
                            DiagnosticCode::NonIntegerBinomialN,
                            id,
                            format!("Binomial n = {n} is not an integer; it is floored"),
                        );
                    }
                }
            }
        }
        if node.kind == NodeKind::IntegerInterval
            && node.support[1] - node.support[0] > WIDE_INTEGER_RANGE
            && !matches!(evidence.get(&node.id), Some(Observation::Value(_)))
        {
            report.push(
                Severity::Warning,
                DiagnosticCode::UnboundedIntegerWarning,
                id,
                format!(
                    "integer range [{}, {}] is unobserved; inference uses a coarse binned range",
                    node.support[0], node.support[1]
                ),
            );
        }
    }
    for (name, obs) in &evidence {
        let Some(node) = model.node_by_id(name) else {
            report.push(Severity::Error, DiagnosticCode::UnknownEvidenceNode, Some(name), format!("unknown node '{name}'"));
            continue;
        };
        if let Err(message) = check_observation(node, obs) {
            report.push(Severity::Error, DiagnosticCode::InvalidObservation, Some(name), message);
        }
    }
    report
}

pub(crate) fn check_observation(node: &super::Node, obs: &Observation) -> Result<(), String> {
    match (node.is_discrete(), obs) {
        (true, Observation::State(s)) => {
            node.state_index(s).map(|_| ()).ok_or_else(|| format!("'{}' has no state '{s}'", node.id))
        }
        (true, Observation::Value(v)) => {
            if v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < node.state_count() {
                Ok(())
            } else {
                Err(format!("value {v} is not a state index of '{}'", node.id))
            }
        }
        (true, Observation::Interval(_)) => Err(format!("interval evidence on discrete node '{}'", node.id)),
        (false, Observation::State(s)) => Err(format!("state '{s}' given for numeric node '{}'", node.id)),
        (false, Observation::Value(v)) => {
            let [lo, hi] = node.support;
            let tol = 1e-9 * v.abs().max(1.0);
            if *v < lo - tol || *v > hi + tol {
                Err(format!("value {v} outside support [{lo}, {hi}] of '{}'", node.id))
            } else {
                Ok(())
            }
        }
        (false, Observation::Interval([a, b])) => {
            let [lo, hi] = node.support;
            if !(a <= b) || *b < lo || *a > hi {
                Err(format!("interval [{a}, {b}] does not meet support [{lo}, {hi}] of '{}'", node.id))
            } else {
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_model, CpdSpec, ModelSpec, NodeSpec};

    #[test]
    fn row_summing_to_point_nine() {
        let spec = ModelSpec {
            nodes: vec![NodeSpec::new("b", NodeKind::Boolean, CpdSpec::Table(vec![vec![0.4, 0.5]]))],
            ..Default::default()
        };
        let r = validate_model(&build_model(spec).unwrap());
        assert_eq!(r.errors().next().unwrap().code, DiagnosticCode::NormalizationError);
    }

    #[test]
    fn wide_unobserved_demands() {
        let spec = ModelSpec {
            nodes: vec![NodeSpec::expression("demands", NodeKind::IntegerInterval, "Uniform(0, 1E9)")],
            ..Default::default()
        };
        let m = build_model(spec).unwrap();
        let r = validate_model(&m);
        assert!(!r.has_errors());
        assert_eq!(r.warnings().next().unwrap().code, DiagnosticCode::UnboundedIntegerWarning);
        let ev = Evidence::from([("demands".to_string(), Observation::Value(1000.0))]);
        assert!(validate_with_evidence(&m, &ev).is_empty());
    }

    #[test]
    fn partition_gap() {
        let spec = ModelSpec {
            nodes: vec![
                NodeSpec::new("s", NodeKind::Labelled, CpdSpec::Table(vec![vec![0.5, 0.5]])).with_states(["a", "b"]),
                NodeSpec::new(
                    "x",
                    NodeKind::ContinuousInterval,
                    CpdSpec::Partitioned {
                        parent: "s".into(),
                        cases: [("a".to_string(), "Uniform(0, 1)".to_string())].into(),
                    },
                )
                .with_parents(["s"])
                .with_bounds(0.0, 1.0),
            ],
            ..Default::default()
        };
        let r = validate_model(&build_model(spec).unwrap());
        assert_eq!(r.errors().next().unwrap().code, DiagnosticCode::PartitionGap);
    }
}
