//! Monte Carlo oracle: ancestral sampling and likelihood weighting.
//!
//! The oracle shares nothing with the discretized engine beyond the
//! compiled graph and the distribution primitives, so agreement between
//! the two is a meaningful check.
//!
//! Samples are drawn in fixed-size chunks, each with its own ChaCha stream
//! derived from `(seed, round, chunk)`, and reduced in chunk order. Results
//! are therefore identical for a given seed regardless of thread count.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Distribution, EvalError};
use crate::graph::{validate_with_evidence, CompiledModel, Cpd, DiagnosticCode, Evidence, Node, NodeKind, Observation};
use crate::inference::{PosteriorSet, StateProbability};

const CHUNK: usize = 8192;
/// Below this effective sample size an estimate is refused.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 100.0;
const MAX_ADAPT_ROUNDS: usize = 8;
const PILOT_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("node '{node}': {source}")]
    Domain { node: String, source: EvalError },
    #[error("effective sample size {ess:.1} is below {MIN_EFFECTIVE_SAMPLES}; draw more samples or reformulate the evidence")]
    DegenerateWeights { ess: f64 },
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("invalid evidence on '{node}': {message}")]
    InvalidEvidence { node: String, message: String },
    #[error("sample count must be positive")]
    NoSamples,
}

/// Joint samples, one column per node in model order. Discrete nodes hold
/// state indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub nodes: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, id: &str) -> Option<&[f64]> {
        self.nodes.iter().position(|n| n == id).map(|i| self.columns[i].as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEstimate {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<StateProbability>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub nodes: BTreeMap<String, NodeEstimate>,
    pub samples: usize,
    pub effective_sample_size: f64,
    pub seed: u64,
}

impl OracleEstimate {
    pub fn get(&self, id: &str) -> Option<&NodeEstimate> {
        self.nodes.get(id)
    }
}

/// Value used for arithmetic and moments: ranked states map to their
/// midpoint, other discrete states to their index.
fn numeric(node: &Node, raw: f64) -> f64 {
    if node.is_discrete() {
        node.state_value(raw as usize)
    } else {
        raw
    }
}

fn conditional(model: &CompiledModel, i: usize, row: &[f64]) -> Result<Choice, OracleError> {
    let node = model.node(i);
    let expr = match &node.cpd {
        Cpd::Table(rows) => {
            let mut r = 0;
            for &p in &node.parents {
                r = r * model.node(p).state_count() + row[p] as usize;
            }
            return Ok(Choice::Table(rows[r].clone()));
        }
        Cpd::Expr(e) => e,
        Cpd::Partitioned { slot, cases } => {
            let s = row[node.parents[*slot]] as usize;
            cases[s].as_ref().expect("validated partition")
        }
    };
    let dist = expr
        .concretize(&mut |s: &usize| {
            let p = node.parents[*s];
            Ok::<f64, EvalError>(numeric(model.node(p), row[p]))
        })
        .map_err(|source| OracleError::Domain { node: node.id.clone(), source })?;
    Ok(Choice::Dist(dist))
}

enum Choice {
    Table(Vec<f64>),
    Dist(Distribution),
}

/// Range a non-degenerate distribution is truncated to before it is mapped
/// onto the node's values.
fn sampling_range(node: &Node, dist: &Distribution) -> [f64; 2] {
    let [lo, hi] = node.support;
    match node.kind {
        NodeKind::ContinuousInterval => [lo, hi],
        NodeKind::IntegerInterval if dist.is_integer_valued() => [lo, hi],
        NodeKind::IntegerInterval => [lo - 0.5, hi + 0.5],
        NodeKind::Ranked => [0.0, 1.0],
        _ if dist.is_integer_valued() => [0.0, (node.state_count() - 1) as f64],
        _ => [-0.5, node.state_count() as f64 - 0.5],
    }
}

/// Maps a draw onto the node's raw storage value.
fn settle(node: &Node, v: f64) -> f64 {
    match node.kind {
        NodeKind::ContinuousInterval => v,
        NodeKind::IntegerInterval => v.round(),
        _ => node.state_for_value(v) as f64,
    }
}

fn draw(node: &Node, dist: &Distribution, rng: &mut impl Rng) -> f64 {
    if let Distribution::Point(v) = *dist {
        return settle(node, v);
    }
    let [a, b] = sampling_range(node, dist);
    let x = dist.sample(rng);
    let inside = if dist.is_integer_valued() { x >= a && x <= b } else { x >= a && x < b };
    settle(node, if inside { x } else { dist.sample_within(a, b, rng) })
}

fn draw_table(probs: &[f64], rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k as f64;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as f64
}

/// Probability (or density) of the clamped observation under `choice`.
fn weight_of(node: &Node, choice: &Choice, obs: &Observation) -> (f64, f64) {
    match (choice, obs) {
        (Choice::Table(probs), Observation::State(s)) => {
            let k = node.state_index(s).expect("validated state");
            (probs[k], k as f64)
        }
        (Choice::Table(probs), Observation::Value(v)) => (probs[*v as usize], *v),
        (Choice::Dist(d), Observation::State(_) | Observation::Value(_)) if node.is_discrete() => {
            let k = match obs {
                Observation::State(s) => node.state_index(s).expect("validated state"),
                Observation::Value(v) => *v as usize,
                Observation::Interval(_) => unreachable!(),
            };
            if let Distribution::Point(v) = *d {
                return (if node.state_for_value(v) == k { 1.0 } else { 0.0 }, k as f64);
            }
            let [a, b] = sampling_range(node, d);
            let (lo, hi) = if node.kind == NodeKind::Ranked {
                let r = node.ranked_interval(k);
                (r[0], r[1])
            } else if d.is_integer_valued() {
                (k as f64, k as f64)
            } else {
                (k as f64 - 0.5, k as f64 + 0.5)
            };
            (ratio(d.mass(lo, hi), d.mass(a, b)), k as f64)
        }
        (Choice::Dist(d), Observation::Value(v)) => {
            let v = *v;
            if let Distribution::Point(x) = *d {
                let tol = 1e-9 * x.abs().max(1.0);
                return (if (x - v).abs() <= tol { 1.0 } else { 0.0 }, v);
            }
            let [a, b] = sampling_range(node, d);
            let raw = if d.is_integer_valued() {
                d.mass(v, v)
            } else if node.kind == NodeKind::IntegerInterval {
                d.mass(v - 0.5, v + 0.5)
            } else {
                d.ln_density(v).exp()
            };
            (ratio(raw, d.mass(a, b)), v)
        }
        _ => unreachable!("interval evidence is handled by the caller"),
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

/// Gaussian proposal mixed with the prior for one root node.
#[derive(Debug, Clone, Copy)]
struct Proposal {
    centre: f64,
    sd: f64,
}

const PRIOR_SHARE: f64 = 0.1;

impl Proposal {
    /// Draws from the mixture and returns `(value, prior density / proposal density)`.
    fn draw(&self, node: &Node, prior: &Distribution, rng: &mut impl Rng) -> (f64, f64) {
        let [a, b] = node.support;
        let g = Distribution::TNormal(
            crate::expr::TruncatedNormal::new(self.centre, self.sd * self.sd, a, b)
                .unwrap_or_else(|_| crate::expr::TruncatedNormal::new((a + b) / 2.0, (b - a).powi(2), a, b).unwrap()),
        );
        let x = if rng.random::<f64>() < PRIOR_SHARE { draw(node, prior, rng) } else { g.sample(rng) };
        let f = ratio(prior.ln_density(x).exp(), prior.mass(a, b));
        let q = PRIOR_SHARE * f + (1.0 - PRIOR_SHARE) * g.ln_density(x).exp();
        (x, ratio(f, q))
    }
}

struct Plan<'a> {
    model: &'a CompiledModel,
    evidence: Vec<Option<Observation>>,
    proposals: Vec<Option<Proposal>>,
}

/// Per-chunk accumulators, all scaled by `exp(-shift)` (squares by `exp(-2 shift)`).
#[derive(Clone)]
struct Sums {
    shift: f64,
    w: f64,
    w2: f64,
    wf: Vec<f64>,
    wf2: Vec<f64>,
    w2f: Vec<f64>,
    w2f2: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl Sums {
    fn new(model: &CompiledModel) -> Self {
        let n = model.nodes().len();
        Sums {
            shift: f64::NEG_INFINITY,
            w: 0.0,
            w2: 0.0,
            wf: vec![0.0; n],
            wf2: vec![0.0; n],
            w2f: vec![0.0; n],
            w2f2: vec![0.0; n],
            states: model.nodes().iter().map(|n| vec![0.0; n.state_count()]).collect(),
        }
    }

    fn rescale(&mut self, shift: f64) {
        if self.shift == shift {
            return;
        }
        let a = if self.shift == f64::NEG_INFINITY { 0.0 } else { (self.shift - shift).exp() };
        let a2 = a * a;
        self.w *= a;
        self.w2 *= a2;
        self.wf.iter_mut().chain(self.wf2.iter_mut()).for_each(|x| *x *= a);
        self.w2f.iter_mut().chain(self.w2f2.iter_mut()).for_each(|x| *x *= a2);
        self.states.iter_mut().flatten().for_each(|x| *x *= a);
        self.shift = shift;
    }

    fn merge(&mut self, mut other: Sums) {
        if other.shift == f64::NEG_INFINITY {
            return;
        }
        let s = self.shift.max(other.shift);
        self.rescale(s);
        other.rescale(s);
        self.w += other.w;
        self.w2 += other.w2;
        for j in 0..self.wf.len() {
            self.wf[j] += other.wf[j];
            self.wf2[j] += other.wf2[j];
            self.w2f[j] += other.w2f[j];
            self.w2f2[j] += other.w2f2[j];
            for (x, y) in self.states[j].iter_mut().zip(&other.states[j]) {
                *x += y;
            }
        }
    }
}

impl<'a> Plan<'a> {
    fn new(model: &'a CompiledModel, evidence: &Evidence) -> Result<Self, OracleError> {
        let report = validate_with_evidence(model, evidence);
        if let Some(d) = report.errors().next() {
            let node = d.node.clone().unwrap_or_default();
            return Err(match d.code {
                DiagnosticCode::UnknownEvidenceNode => OracleError::UnknownNode(node),
                _ => OracleError::InvalidEvidence { node, message: d.message.clone() },
            });
        }
        let merged = model.spec().merged_evidence(evidence);
        let evidence = model.nodes().iter().map(|n| merged.get(&n.id).cloned()).collect();
        Ok(Plan { model, evidence, proposals: vec![None; model.nodes().len()] })
    }

    /// One weighted joint sample written into `row`; returns the log weight.
    fn sample(&self, row: &mut [f64], rng: &mut ChaCha8Rng) -> Result<f64, OracleError> {
        let mut ln_w = 0.0;
        for &i in self.model.order() {
            let node = self.model.node(i);
            let choice = conditional(self.model, i, row)?;
            match (&self.evidence[i], &choice) {
                (None, Choice::Table(p)) => row[i] = draw_table(p, rng),
                (None, Choice::Dist(d)) => match self.proposals[i] {
                    Some(q) => {
                        let (x, w) = q.draw(node, d, rng);
                        row[i] = x;
                        ln_w += w.ln();
                    }
                    None => row[i] = draw(node, d, rng),
                },
                (Some(Observation::Interval([lo, hi])), Choice::Dist(d)) => {
                    let [a, b] = sampling_range(node, d);
                    let (lo, hi) = if node.kind == NodeKind::IntegerInterval && !d.is_integer_valued() {
                        (lo.ceil() - 0.5, hi.floor() + 0.5)
                    } else {
                        (*lo, *hi)
                    };
                    let (lo, hi) = (lo.max(a), hi.min(b));
                    if let Distribution::Point(v) = *d {
                        row[i] = settle(node, v);
                        if !(v >= lo && v <= hi) {
                            return Ok(f64::NEG_INFINITY);
                        }
                        continue;
                    }
                    let m = if lo <= hi { ratio(d.mass(lo, hi), d.mass(a, b)) } else { 0.0 };
                    if m <= 0.0 {
                        return Ok(f64::NEG_INFINITY);
                    }
                    ln_w += m.ln();
                    row[i] = settle(node, d.sample_within(lo, hi, rng));
                }
                (Some(Observation::Interval(_)), Choice::Table(_)) => unreachable!("validated evidence"),
                (Some(obs), _) => {
                    let (w, v) = weight_of(node, &choice, obs);
                    if w <= 0.0 {
                        return Ok(f64::NEG_INFINITY);
                    }
                    ln_w += w.ln();
                    row[i] = v;
                }
            }
        }
        Ok(ln_w)
    }

    fn chunk(&self, seed: u64, round: u64, chunk: usize, count: usize) -> Result<Sums, OracleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((round << 40) | chunk as u64);
        let n = self.model.nodes().len();
        let mut rows = vec![0.0; n * count];
        let mut lw = vec![0.0; count];
        for s in 0..count {
            lw[s] = self.sample(&mut rows[s * n..(s + 1) * n], &mut rng)?;
        }
        let mut sums = Sums::new(self.model);
        let shift = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Ok(sums);
        }
        sums.shift = shift;
        for s in 0..count {
            let w = (lw[s] - shift).exp();
            if w == 0.0 {
                continue;
            }
            let w2 = w * w;
            sums.w += w;
            sums.w2 += w2;
            for (j, node) in self.model.nodes().iter().enumerate() {
                let raw = rows[s * n + j];
                let f = numeric(node, raw);
                sums.wf[j] += w * f;
                sums.wf2[j] += w * f * f;
                sums.w2f[j] += w2 * f;
                sums.w2f2[j] += w2 * f * f;
                if node.is_discrete() {
                    sums.states[j][raw as usize] += w;
                }
            }
        }
        Ok(sums)
    }

    fn run(&self, n: usize, seed: u64, round: u64) -> Result<Sums, OracleError> {
        let chunks = n.div_ceil(CHUNK);
        let parts: Vec<Result<Sums, OracleError>> = (0..chunks)
            .into_par_iter()
            .map(|c| self.chunk(seed, round, c, CHUNK.min(n - c * CHUNK)))
            .collect();
        let mut total = Sums::new(self.model);
        for p in parts {
            total.merge(p?);
        }
        Ok(total)
    }

    /// Unobserved stochastic continuous nodes whose draws are worth
    /// steering towards the evidence.
    fn adaptable(&self) -> Vec<usize> {
        self.model
            .nodes()
            .iter()
            .enumerate()
            .filter(|(i, n)| {
                n.kind == NodeKind::ContinuousInterval
                    && self.evidence[*i].is_none()
                    && !matches!(n.cpd, Cpd::Table(_))
                    && n.cpd.expressions().all(|e| !e.is_deterministic())
            })
            .map(|(i, _)| i)
            .collect()
    }
}

fn ess(s: &Sums) -> f64 {
    if s.w2 > 0.0 {
        s.w * s.w / s.w2
    } else {
        0.0
    }
}

fn estimate(model: &CompiledModel, s: &Sums, n: usize, seed: u64) -> OracleEstimate {
    let mut nodes = BTreeMap::new();
    for (j, node) in model.nodes().iter().enumerate() {
        let mean = s.wf[j] / s.w;
        let variance = (s.wf2[j] / s.w - mean * mean).max(0.0);
        let se2 = (s.w2f2[j] - 2.0 * mean * s.w2f[j] + mean * mean * s.w2) / (s.w * s.w);
        let states = if node.is_discrete() {
            node.states
                .iter()
                .zip(&s.states[j])
                .map(|(st, m)| StateProbability { state: st.clone(), probability: m / s.w })
                .collect()
        } else {
            Vec::new()
        };
        nodes.insert(node.id.clone(), NodeEstimate { mean, variance, std_error: se2.max(0.0).sqrt(), states });
    }
    OracleEstimate { nodes, samples: n, effective_sample_size: ess(s), seed }
}

/// `n` ancestral samples from the prior (built-in observations are ignored).
pub fn forward_sample(model: &CompiledModel, n: usize, seed: u64) -> Result<SampleSet, OracleError> {
    if n == 0 {
        return Err(OracleError::NoSamples);
    }
    let plan = Plan { model, evidence: vec![None; model.nodes().len()], proposals: vec![None; model.nodes().len()] };
    let k = model.nodes().len();
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<f64>, OracleError>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(n - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut rows = vec![0.0; k * count];
            for s in 0..count {
                plan.sample(&mut rows[s * k..(s + 1) * k], &mut rng)?;
            }
            Ok(rows)
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(n); k];
    for p in parts {
        for row in p?.chunks(k) {
            for (c, v) in columns.iter_mut().zip(row) {
                c.push(*v);
            }
        }
    }
    Ok(SampleSet { nodes: model.nodes().iter().map(|n| n.id.clone()).collect(), columns, seed })
}

/// Self-normalized likelihood-weighting estimate of every node's posterior.
///
/// When the evidence is strong, continuous nodes are drawn from a
/// prior/Gaussian mixture fitted on pilot runs.
pub fn likelihood_weighted_posterior(
    model: &CompiledModel,
    evidence: &Evidence,
    n: usize,
    seed: u64,
) -> Result<OracleEstimate, OracleError> {
    if n == 0 {
        return Err(OracleError::NoSamples);
    }
    let mut plan = Plan::new(model, evidence)?;
    let has_evidence = plan.evidence.iter().any(Option::is_some);
    let steered = plan.adaptable();
    if has_evidence && !steered.is_empty() {
        let pilot_n = n.min(PILOT_SAMPLES);
        for round in 0..MAX_ADAPT_ROUNDS {
            let s = plan.run(pilot_n, seed ^ 0x9e37_79b9_7f4a_7c15, round as u64 + 1)?;
            let e = ess(&s);
            if e >= 0.2 * pilot_n as f64 || s.w == 0.0 {
                break;
            }
            for &r in &steered {
                let mean = s.wf[r] / s.w;
                let var = (s.wf2[r] / s.w - mean * mean).max(0.0);
                let [a, b] = model.node(r).support;
                // A handful of effective draws says little about the spread.
                let floor = if e < 50.0 { 0.5 * (mean - a).min(b - mean) } else { 0.0 };
                let sd = (2.0 * var.sqrt()).max(floor).max(1e-12 * (b - a));
                plan.proposals[r] = Some(Proposal { centre: mean, sd });
            }
        }
    }
    let s = plan.run(n, seed, 0)?;
    let e = ess(&s);
    if !(e >= MIN_EFFECTIVE_SAMPLES) {
        return Err(OracleError::DegenerateWeights { ess: e });
    }
    Ok(estimate(model, &s, n, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComparisonPolicy {
    pub standard_errors: f64,
    pub absolute_floor: f64,
}

impl Default for ComparisonPolicy {
    fn default() -> Self {
        Self { standard_errors: 3.0, absolute_floor: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeVerdict {
    pub node: String,
    pub engine_mean: f64,
    pub oracle_mean: f64,
    pub std_error: f64,
    /// |engine − oracle| in oracle standard errors.
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub verdicts: Vec<NodeVerdict>,
    /// Failing nodes, worst first.
    pub worst: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// Compares engine and oracle means node by node.
pub fn compare(engine: &PosteriorSet, oracle: &OracleEstimate, policy: &ComparisonPolicy) -> ComparisonReport {
    let mut verdicts = Vec::new();
    for (id, p) in &engine.nodes {
        let Some(o) = oracle.get(id) else { continue };
        let diff = (p.mean - o.mean).abs();
        let allowed = (policy.standard_errors * o.std_error).max(policy.absolute_floor);
        let z = if o.std_error > 0.0 { diff / o.std_error } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
        verdicts.push(NodeVerdict {
            node: id.clone(),
            engine_mean: p.mean,
            oracle_mean: o.mean,
            std_error: o.std_error,
            z,
            pass: diff <= allowed,
        });
    }
    let mut failing: Vec<&NodeVerdict> = verdicts.iter().filter(|v| !v.pass).collect();
    failing.sort_by(|a, b| b.z.total_cmp(&a.z));
    let worst = failing.into_iter().map(|v| v.node.clone()).collect();
    let notes = if verdicts.is_empty() { vec!["no comparable nodes".to_string()] } else { Vec::new() };
    ComparisonReport { verdicts, worst, notes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_model, ModelSpec, NodeSpec};

    fn pfd() -> CompiledModel {
        build_model(ModelSpec {
            nodes: vec![
                NodeSpec::expression("p", NodeKind::ContinuousInterval, "Uniform(0, 1)"),
                NodeSpec::expression("demands", NodeKind::IntegerInterval, "Uniform(0, 1E9)"),
                NodeSpec::expression("observed", NodeKind::IntegerInterval, "Binomial(demands, p)")
                    .with_parents(["demands", "p"]),
            ],
            ..Default::default()
        })
        .unwrap()
    }

    fn ev(pairs: &[(&str, f64)]) -> Evidence {
        pairs.iter().map(|(k, v)| (k.to_string(), Observation::Value(*v))).collect()
    }

    #[test]
    fn beta_binomial_posterior() {
        let m = pfd();
        let e = likelihood_weighted_posterior(&m, &ev(&[("observed", 10.0), ("demands", 1000.0)]), 200_000, 7).unwrap();
        let p = e.get("p").unwrap();
        let exact = 11.0 / 1002.0;
        assert!((p.mean - exact).abs() < 4.0 * p.std_error, "{} vs {exact} ± {}", p.mean, p.std_error);
        assert!(p.std_error > 0.0 && e.effective_sample_size <= 200_000.0);
    }

    #[test]
    fn impossible_evidence_is_degenerate() {
        let m = pfd();
        let r = likelihood_weighted_posterior(&m, &ev(&[("observed", 2000.0), ("demands", 1000.0)]), 10_000, 1);
        assert!(matches!(r, Err(OracleError::DegenerateWeights { .. })));
    }

    #[test]
    fn reproducible_for_seed() {
        let m = pfd();
        let a = forward_sample(&m, 20_000, 3).unwrap();
        let b = forward_sample(&m, 20_000, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.column("p").unwrap().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn perturbed_engine_mean_is_flagged() {
        let m = pfd();
        let e = ev(&[("observed", 10.0), ("demands", 1000.0)]);
        let o = likelihood_weighted_posterior(&m, &e, 100_000, 11).unwrap();
        let mut post = crate::inference::infer(&m, &e, &Default::default()).unwrap();
        assert!(compare(&post, &o, &ComparisonPolicy::default()).passed());
        let se = o.get("p").unwrap().std_error;
        post.nodes.get_mut("p").unwrap().mean += 10.0 * se;
        let r = compare(&post, &o, &ComparisonPolicy::default());
        assert!(!r.passed());
        assert_eq!(r.worst, vec!["p".to_string()]);
    }
}
