//! Node-level expansion of each idiom kind.

use std::collections::BTreeMap;

use super::params::*;
use super::{IdiomError, IdiomFragment, IdiomKind, IdiomParams};
use crate::graph::{CpdSpec, Evidence, NodeKind, NodeSpec, Observation};

/// Labels of the five-point ranked scale used throughout the library.
pub const RANKED_SCALE: [&str; 5] = ["very low", "low", "medium", "high", "very high"];

pub const SIMILARITY_STATES: [&str; 3] = ["Similar", "Minor differences", "Major differences"];
pub const ACCURACY_STATES: [&str; 3] = ["Overestimated", "Accurate", "Underestimated"];

struct Builder {
    instance: String,
    nodes: Vec<NodeSpec>,
    observations: Evidence,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Builder {
    fn new(instance: &str) -> Self {
        Builder {
            instance: instance.to_string(),
            nodes: Vec::new(),
            observations: Evidence::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    fn id(&self, local: &str) -> String {
        if self.instance.is_empty() {
            local.to_string()
        } else {
            format!("{}_{local}", self.instance)
        }
    }

    fn add(&mut self, local: &str, kind: NodeKind, cpd: CpdSpec, parents: &[&str]) -> &mut NodeSpec {
        let id = self.id(local);
        let parents: Vec<String> = parents.iter().map(|p| self.id(p)).collect();
        let mut n = NodeSpec::new(id, kind, cpd).with_parents(parents);
        if !self.instance.is_empty() {
            n.group = Some(self.instance.clone());
        }
        self.nodes.push(n);
        self.nodes.last_mut().unwrap()
    }

    fn expr(&mut self, local: &str, kind: NodeKind, text: String, parents: &[&str]) -> &mut NodeSpec {
        self.add(local, kind, CpdSpec::Expression(text), parents)
    }

    fn ranked_root(&mut self, local: &str) {
        let k = RANKED_SCALE.len();
        self.add(local, NodeKind::Ranked, CpdSpec::Table(vec![vec![1.0 / k as f64; k]]), &[])
            .states = RANKED_SCALE.iter().map(|s| s.to_string()).collect();
    }

    fn ranked_expr(&mut self, local: &str, text: String, parents: &[&str]) {
        self.expr(local, NodeKind::Ranked, text, parents).states = RANKED_SCALE.iter().map(|s| s.to_string()).collect();
    }

    fn labelled_root(&mut self, local: &str, states: &[&str]) {
        let k = states.len();
        self.add(local, NodeKind::Labelled, CpdSpec::Table(vec![vec![1.0 / k as f64; k]]), &[]).states =
            states.iter().map(|s| s.to_string()).collect();
    }

    /// Probability-valued root with a flat prior.
    fn probability(&mut self, local: &str) {
        self.expr(local, NodeKind::ContinuousInterval, "Uniform(0, 1)".into(), &[]).bounds = Some([0.0, 1.0]);
    }

    fn observe_value(&mut self, local: &str, v: Option<f64>) {
        if let Some(v) = v {
            self.observations.insert(self.id(local), Observation::Value(v));
        }
    }

    fn observe_state(&mut self, local: &str, s: &Option<String>) {
        if let Some(s) = s {
            self.observations.insert(self.id(local), Observation::State(s.clone()));
        }
    }

    fn input(&mut self, port: &str, local: &str) {
        self.inputs.insert(port.to_string(), self.id(local));
    }

    fn output(&mut self, port: &str, local: &str) {
        self.outputs.insert(port.to_string(), self.id(local));
    }

    fn finish(self, kind: IdiomKind, params: &IdiomParams) -> IdiomFragment {
        IdiomFragment {
            kind,
            instance: self.instance,
            nodes: self.nodes,
            observations: self.observations,
            inputs: self.inputs,
            outputs: self.outputs,
            params: serde_json::to_value(params).unwrap_or_default(),
        }
    }
}

fn bad(kind: IdiomKind, message: impl Into<String>) -> IdiomError {
    IdiomError::BadParameter { kind, message: message.into() }
}

fn num(x: f64) -> String {
    // Debug formatting keeps full precision and always parses back.
    format!("{x:?}")
}

fn check_count(kind: IdiomKind, name: &str, v: Option<f64>) -> Result<(), IdiomError> {
    match v {
        Some(x) if !(x >= 0.0 && x.fract() == 0.0) => Err(bad(kind, format!("{name} must be a nonnegative integer, got {x}"))),
        _ => Ok(()),
    }
}

fn check_probability(kind: IdiomKind, name: &str, v: Option<f64>) -> Result<(), IdiomError> {
    match v {
        Some(x) if !(0.0..=1.0).contains(&x) => Err(bad(kind, format!("{name} must lie in [0, 1], got {x}"))),
        _ => Ok(()),
    }
}

/// Binomial evidence block shared by the demand-based idioms.
fn demand_block(b: &mut Builder, p: &str, demands: &str, observed: &str, max_demands: f64) {
    b.expr(demands, NodeKind::IntegerInterval, format!("Uniform(0, {})", num(max_demands)), &[]);
    let text = format!("Binomial({}, {})", b.id(demands), b.id(p));
    b.expr(observed, NodeKind::IntegerInterval, text, &[demands, p]);
}

pub(super) fn expand(instance: &str, params: &IdiomParams) -> Result<IdiomFragment, IdiomError> {
    let kind = params.kind();
    let mut b = Builder::new(instance);
    match params {
        IdiomParams::Pfd(q) => {
            check_count(kind, "observed", q.observed)?;
            check_count(kind, "demands", q.demands)?;
            b.probability("p");
            demand_block(&mut b, "p", "demands", "observed", q.max_demands);
            b.observe_value("observed", q.observed);
            b.observe_value("demands", q.demands);
            b.input("p", "p");
            b.output("p", "p");
            b.output("observed", "observed");
        }
        IdiomParams::PfdLimitedData(q) => {
            check_count(kind, "previous_failures", Some(q.previous_failures))?;
            check_count(kind, "previous_demands", Some(q.previous_demands))?;
            check_count(kind, "failures", q.failures)?;
            check_count(kind, "demands", q.demands)?;
            if q.multipliers.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
                return Err(bad(kind, "similarity multipliers must be nonnegative"));
            }
            if !(q.variance > 0.0) {
                return Err(bad(kind, "variance must be positive"));
            }
            b.probability("previous_p");
            demand_block(&mut b, "previous_p", "previous_demands", "previous_failures", q.max_demands);
            b.labelled_root("similarity", &SIMILARITY_STATES);
            let prev = b.id("previous_p");
            let cases = SIMILARITY_STATES
                .iter()
                .zip(q.multipliers)
                .map(|(s, m)| {
                    let mean = if m == 1.0 { prev.clone() } else { format!("{prev} * {}", num(m)) };
                    (s.to_string(), format!("Normal({mean}, {})", num(q.variance)))
                })
                .collect();
            let parent = b.id("similarity");
            b.add("p", NodeKind::ContinuousInterval, CpdSpec::Partitioned { parent, cases }, &["previous_p", "similarity"])
                .bounds = Some([0.0, 1.0]);
            demand_block(&mut b, "p", "demands", "observed", q.max_demands);
            b.observe_value("previous_failures", Some(q.previous_failures));
            b.observe_value("previous_demands", Some(q.previous_demands));
            b.observe_state("similarity", &q.similarity);
            b.observe_value("observed", q.failures);
            b.observe_value("demands", q.demands);
            b.output("p", "p");
        }
        IdiomParams::UncertainAccuracy(q) => {
            check_count(kind, "observed", q.observed)?;
            check_count(kind, "demands", q.demands)?;
            if !(q.overestimate_factor >= 0.0 && q.underestimate_factor >= 0.0 && q.variance_factor > 0.0) {
                return Err(bad(kind, "accuracy factors must be nonnegative and the variance factor positive"));
            }
            b.probability("p");
            demand_block(&mut b, "p", "demands", "true_events", q.max_demands);
            b.labelled_root("accuracy", &ACCURACY_STATES);
            let tne = b.id("true_events");
            let var = format!("{} * {tne}", num(q.variance_factor));
            let cases = BTreeMap::from([
                (
                    ACCURACY_STATES[0].to_string(),
                    format!("Normal({tne} * {}, {var})", num(q.overestimate_factor)),
                ),
                (ACCURACY_STATES[1].to_string(), format!("Arithmetic({tne})")),
                (
                    ACCURACY_STATES[2].to_string(),
                    format!("Normal(max(0, {tne} * {}), {var})", num(q.underestimate_factor)),
                ),
            ]);
            let parent = b.id("accuracy");
            b.add("observed", NodeKind::IntegerInterval, CpdSpec::Partitioned { parent, cases }, &["true_events", "accuracy"]);
            b.observe_value("observed", q.observed);
            b.observe_value("demands", q.demands);
            b.observe_state("accuracy", &q.accuracy);
            b.output("true_number_of_events", "true_events");
            b.output("p", "p");
        }
        IdiomParams::Ttf(q) => {
            let m = if q.failure_times.is_empty() { q.count.unwrap_or(0) } else { q.failure_times.len() };
            if m == 0 {
                return Err(bad(kind, "at least one observed failure time is required"));
            }
            if q.failure_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                return Err(bad(kind, "failure times must be nonnegative"));
            }
            let mean = if q.failure_times.is_empty() {
                None
            } else {
                Some(q.failure_times.iter().sum::<f64>() / m as f64)
            };
            let cap = match (q.rate_cap, mean) {
                (Some(c), _) if c > 0.0 => c,
                (Some(c), _) => return Err(bad(kind, format!("rate cap must be positive, got {c}"))),
                (None, Some(t)) if t > 0.0 => 100.0 / t,
                _ => 1.0,
            };
            let horizon = q.horizon.unwrap_or_else(|| 1000.0 * q.failure_times.iter().copied().fold(100.0 / cap, f64::max));
            b.expr("rate", NodeKind::ContinuousInterval, format!("Uniform(0, {})", num(cap)), &[]).bounds = Some([0.0, cap]);
            let exp = format!("Exponential({})", b.id("rate"));
            for k in 1..=m {
                let local = format!("observed_time_{k}");
                b.expr(&local, NodeKind::ContinuousInterval, exp.clone(), &["rate"]).bounds = Some([0.0, horizon]);
                b.observe_value(&local, q.failure_times.get(k - 1).copied());
            }
            b.expr("time_to_next_failure", NodeKind::ContinuousInterval, exp, &["rate"]).bounds = Some([0.0, horizon]);
            b.output("rate", "rate");
            b.output("time_to_next_failure", "time_to_next_failure");
        }
        IdiomParams::TtfSummary(q) => {
            if !(q.mean > 0.0) {
                return Err(bad(kind, "mean failure time must be positive"));
            }
            if !(q.variance > 0.0) {
                return Err(bad(kind, "variance must be positive"));
            }
            let horizon = q.horizon.unwrap_or(1000.0 * q.mean);
            let text = format!("TNormal({}, {}, 0, {})", num(q.mean), num(q.variance), num(horizon));
            b.expr("observed_time", NodeKind::ContinuousInterval, text, &[]);
            let obs = b.id("observed_time");
            b.expr("rate", NodeKind::ContinuousInterval, format!("Arithmetic(1 / {obs})"), &["observed_time"]).bounds =
                Some([0.0, 1e3 / q.mean]);
            let rate = b.id("rate");
            b.expr("time_to_next_failure", NodeKind::ContinuousInterval, format!("Exponential({rate})"), &["rate"]).bounds =
                Some([0.0, horizon]);
            b.output("rate", "rate");
            b.output("time_to_next_failure", "time_to_next_failure");
        }
        IdiomParams::FailureWithinTime(q) => {
            if !(q.mean_ttf > 0.0) {
                return Err(bad(kind, "mean time to failure must be positive"));
            }
            if matches!(q.t, Some(t) if !(t >= 0.0)) {
                return Err(bad(kind, "t must be nonnegative"));
            }
            let horizon = q.horizon.unwrap_or(1000.0 * q.mean_ttf);
            let max_time = q.max_time.unwrap_or(horizon);
            b.expr("ttf", NodeKind::ContinuousInterval, format!("Exponential({})", num(1.0 / q.mean_ttf)), &[]).bounds =
                Some([0.0, horizon]);
            b.expr("t", NodeKind::ContinuousInterval, format!("Uniform(0, {})", num(max_time)), &[]).bounds = Some([0.0, max_time]);
            let text = format!("{} <= {}", b.id("ttf"), b.id("t"));
            b.expr("failure", NodeKind::Boolean, text, &["ttf", "t"]);
            b.observe_value("t", q.t);
            b.input("ttf_distribution", "ttf");
            b.input("t", "t");
            b.output("probability_of_failure", "failure");
        }
        IdiomParams::Rework(q) => {
            if !(q.variance > 0.0) || q.fixing_means.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(bad(kind, "variance must be positive and fixing means must lie in [0, 1]"));
            }
            b.ranked_root("process_quality");
            b.ranked_root("effort");
            let text = format!(
                "TNormal(wmean(1.0, {}, 1.0, {}), {}, 0, 1)",
                b.id("process_quality"),
                b.id("effort"),
                num(q.variance)
            );
            b.ranked_expr("effectiveness", text, &["process_quality", "effort"]);
            let cases = RANKED_SCALE
                .iter()
                .zip(q.fixing_means)
                .map(|(s, m)| (s.to_string(), format!("TNormal({}, {}, 0.0, 1.0)", num(m), num(q.variance))))
                .collect();
            let parent = b.id("effectiveness");
            b.add("fixing_probability", NodeKind::ContinuousInterval, CpdSpec::Partitioned { parent, cases }, &["effectiveness"])
                .bounds = Some([0.0, 1.0]);
            b.observe_state("process_quality", &q.process_quality);
            b.observe_state("effort", &q.effort);
            b.input("process_quality", "process_quality");
            b.input("effort", "effort");
            b.output("probability_of_fixing_fault", "fixing_probability");
        }
        IdiomParams::Requirement(q) => {
            if !(q.max_value > 0.0) || matches!(q.requirement, Some(r) if !(0.0..=q.max_value).contains(&r)) {
                return Err(bad(kind, "requirement must lie in [0, max_value]"));
            }
            if !(q.attribute_variance > 0.0) {
                return Err(bad(kind, "attribute variance must be positive"));
            }
            let prior = format!("Uniform(0, {})", num(q.max_value));
            let assessed = match q.attribute_mean {
                Some(m) => format!("TNormal({}, {}, 0, {})", num(m), num(q.attribute_variance), num(q.max_value)),
                None => prior.clone(),
            };
            b.expr("attribute", NodeKind::ContinuousInterval, assessed, &[]).bounds = Some([0.0, q.max_value]);
            b.expr("requirement", NodeKind::ContinuousInterval, prior, &[]).bounds = Some([0.0, q.max_value]);
            let text = format!("{} <= {}", b.id("attribute"), b.id("requirement"));
            b.expr("compliant", NodeKind::Boolean, text, &["attribute", "requirement"]);
            b.observe_value("requirement", q.requirement);
            b.input("attribute", "attribute");
            b.input("requirement", "requirement");
            b.output("compliant", "compliant");
        }
        IdiomParams::Quality(q) => {
            latent_block(&mut b, kind, q, "latent_quality")?;
            b.output("latent_quality_value", "latent_quality");
        }
        IdiomParams::RiskPerception(q) => {
            latent_block(&mut b, kind, q, "perceived_risk")?;
            b.output("perceived_risk", "perceived_risk");
        }
        IdiomParams::HazardOccurrence(q) => {
            check_probability(kind, "base", q.base)?;
            let factors = if q.factors.is_empty() { vec![MultiplierFactor::use_deviation()] } else { q.factors.clone() };
            b.probability("base_probability");
            let mut product = b.id("base_probability");
            let mut parents = vec!["base_probability".to_string()];
            for f in &factors {
                if f.states.len() < 2 || f.states.len() != f.multipliers.len() {
                    return Err(bad(kind, format!("factor '{}' needs one multiplier per state (at least two)", f.name)));
                }
                if f.multipliers.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
                    return Err(bad(kind, format!("factor '{}' has a negative multiplier", f.name)));
                }
                let states: Vec<&str> = f.states.iter().map(String::as_str).collect();
                b.labelled_root(&f.name, &states);
                let cases = f.states.iter().zip(&f.multipliers).map(|(s, m)| (s.clone(), format!("Arithmetic({})", num(*m)))).collect();
                let local = format!("{}_multiplier", f.name);
                let parent = b.id(&f.name);
                b.add(&local, NodeKind::ContinuousInterval, CpdSpec::Partitioned { parent, cases }, &[f.name.as_str()]);
                product = format!("{product} * {}", b.id(&local));
                parents.push(local);
                b.observe_state(&f.name, &f.state);
                b.input(&f.name, &f.name);
            }
            let parents: Vec<&str> = parents.iter().map(String::as_str).collect();
            b.expr("adjusted_probability", NodeKind::ContinuousInterval, format!("Arithmetic(min(1, {product}))"), &parents)
                .bounds = Some([0.0, 1.0]);
            b.observe_value("base_probability", q.base);
            b.input("base_probability", "base_probability");
            b.output("adjusted_probability", "adjusted_probability");
        }
        IdiomParams::InjuryEvent(q) => {
            check_probability(kind, "p_hazard", q.p_hazard)?;
            check_probability(kind, "p_injury_given_hazard", q.p_injury_given_hazard)?;
            b.probability("p_hazard");
            b.probability("p_injury_given_hazard");
            let text = format!("Arithmetic({} * {})", b.id("p_hazard"), b.id("p_injury_given_hazard"));
            b.expr("p_injury", NodeKind::ContinuousInterval, text, &["p_hazard", "p_injury_given_hazard"]).bounds =
                Some([0.0, 1.0]);
            b.observe_value("p_hazard", q.p_hazard);
            b.observe_value("p_injury_given_hazard", q.p_injury_given_hazard);
            b.input("p_hazard", "p_hazard");
            b.input("p_injury_given_hazard", "p_injury_given_hazard");
            b.output("p_injury", "p_injury");
        }
        IdiomParams::ProductInjury(q) => {
            check_probability(kind, "p", q.p)?;
            check_count(kind, "instances", q.instances)?;
            b.probability("p");
            demand_block(&mut b, "p", "instances", "injury_count", q.max_instances);
            b.observe_value("p", q.p);
            b.observe_value("instances", q.instances);
            b.input("p", "p");
            b.input("instances", "instances");
            b.output("injury_count", "injury_count");
        }
        IdiomParams::RiskControl(q) => {
            check_probability(kind, "control", q.control)?;
            check_probability(kind, "event", q.event)?;
            b.probability("control");
            b.probability("event");
            let text = format!("Arithmetic((1 - {}) * {})", b.id("control"), b.id("event"));
            b.expr("residual", NodeKind::ContinuousInterval, text, &["control", "event"]).bounds = Some([0.0, 1.0]);
            b.observe_value("control", q.control);
            b.observe_value("event", q.event);
            b.input("control", "control");
            b.input("event", "event");
            b.output("residual_probability", "residual");
        }
        IdiomParams::RiskScore(q) => {
            check_probability(kind, "major", q.major)?;
            check_probability(kind, "minor", q.minor)?;
            if !(q.variance > 0.0 && q.scale > 0.0 && q.minor_weight >= 0.0) {
                return Err(bad(kind, "variance and scale must be positive, minor weight nonnegative"));
            }
            b.probability("major");
            b.probability("minor");
            let text = format!(
                "TNormal(min(1.0, {} * ({} + {} * {})), {}, 0, 1)",
                num(q.scale),
                b.id("major"),
                num(q.minor_weight),
                b.id("minor"),
                num(q.variance)
            );
            b.ranked_expr("risk_level", text, &["major", "minor"]);
            b.observe_value("major", q.major);
            b.observe_value("minor", q.minor);
            b.input("major", "major");
            b.input("minor", "minor");
            b.output("risk_level", "risk_level");
        }
        IdiomParams::RiskTolerability(q) => {
            if !(q.variance > 0.0) {
                return Err(bad(kind, "variance must be positive"));
            }
            b.ranked_root("benefit");
            b.ranked_root("risk");
            let text = format!("TNormal(wmean(1.0, {}, 1.0, 1 - {}), {}, 0, 1)", b.id("benefit"), b.id("risk"), num(q.variance));
            b.ranked_expr("tolerability", text, &["benefit", "risk"]);
            b.observe_state("benefit", &q.benefit);
            b.observe_state("risk", &q.risk);
            b.input("benefit", "benefit");
            b.input("risk", "risk");
            b.output("tolerability", "tolerability");
        }
        IdiomParams::Custom(q) => {
            let local: Vec<&str> = q.nodes.iter().map(|n| n.id.as_str()).collect();
            for n in &q.nodes {
                let mut n = n.clone();
                n.id = b.id(&n.id);
                n.parents = n.parents.iter().map(|p| if local.contains(&p.as_str()) { b.id(p) } else { p.clone() }).collect();
                n.cpd = super::rename_cpd(&n.cpd, &|r: &str| if local.contains(&r) { b.id(r) } else { r.to_string() })
                    .map_err(|e| bad(kind, e.to_string()))?;
                if n.group.is_none() && !b.instance.is_empty() {
                    n.group = Some(b.instance.clone());
                }
                b.nodes.push(n);
            }
            for (k, v) in &q.observations {
                b.observations.insert(b.id(k), v.clone());
            }
            for (port, node) in &q.inputs {
                b.input(port, node);
            }
            for (port, node) in &q.outputs {
                b.output(port, node);
            }
            for node in q.inputs.values().chain(q.outputs.values()) {
                if !local.contains(&node.as_str()) {
                    return Err(bad(kind, format!("port refers to unknown node '{node}'")));
                }
            }
        }
    }
    Ok(b.finish(kind, params))
}

/// Ranked latent variable with causal factors (parents) and indicators
/// (children), the shape shared by the quality and risk-perception idioms.
fn latent_block(b: &mut Builder, kind: IdiomKind, q: &LatentParams, latent: &str) -> Result<(), IdiomError> {
    if q.factors.is_empty() {
        return Err(bad(kind, "at least one causal factor is required"));
    }
    if !(q.variance > 0.0 && q.indicator_variance > 0.0) {
        return Err(bad(kind, "variances must be positive"));
    }
    let mut terms = Vec::new();
    for f in &q.factors {
        if !(f.weight > 0.0) {
            return Err(bad(kind, format!("factor '{}' needs a positive weight", f.name)));
        }
        b.ranked_root(&f.name);
        let r = b.id(&f.name);
        terms.push(format!("{}, {}", num(f.weight), if f.invert { format!("1 - {r}") } else { r }));
        b.observe_state(&f.name, &f.state);
        b.input(&f.name, &f.name);
    }
    let parents: Vec<&str> = q.factors.iter().map(|f| f.name.as_str()).collect();
    let text = format!("TNormal(wmean({}), {}, 0, 1)", terms.join(", "), num(q.variance));
    b.ranked_expr(latent, text, &parents);
    let l = b.id(latent);
    for ind in &q.indicators {
        let mean = if ind.invert { format!("1 - {l}") } else { l.clone() };
        b.ranked_expr(&ind.name, format!("TNormal({mean}, {}, 0, 1)", num(q.indicator_variance)), &[latent]);
        b.observe_state(&ind.name, &ind.state);
        b.input(&ind.name, &ind.name);
    }
    Ok(())
}
