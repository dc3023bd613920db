//! Posterior inference by dynamic discretization and exact variable
//! elimination.
//!
//! Numeric nodes start on coarse grids. Each pass builds discretized CPTs,
//! computes every marginal exactly on the discretized model, and splits
//! cells holding more than `split_threshold` posterior mass or whose density
//! varies too much across the cell. The loop stops
//! once means and variances settle.

mod cpt;
mod elimination;
mod factor;
pub mod grid;
mod posterior;

use std::collections::BTreeSet;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expression, CmpOp, EvalError, Expr};
use crate::graph::support::{support_range, Range};
use crate::graph::{
    validate_with_evidence, CompiledModel, Diagnostic, DiagnosticCode, Evidence, InterventionError, NodeKind,
    Observation, Severity,
};
pub use elimination::{eliminate, min_fill_order};
pub use factor::Factor;
use grid::{Entry, Grid};
pub use posterior::{
    posterior_summary, HistogramBin, NodePosterior, Percentiles, PosteriorSet, PosteriorSummary, StateProbability,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscretizationConfig {
    pub initial_intervals: usize,
    pub max_iterations: usize,
    /// Cells with more posterior mass than this are split.
    pub split_threshold: f64,
    /// Relative change in every mean and variance that counts as converged.
    pub tolerance: f64,
    pub max_intervals: usize,
    /// Gauss-Legendre points per parent cell (1 to 5).
    pub quadrature_points: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            initial_intervals: 64,
            max_iterations: 25,
            split_threshold: 0.05,
            tolerance: 1e-3,
            max_intervals: 512,
            quadrature_points: 3,
        }
    }
}

impl DiscretizationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.initial_intervals == 0 || self.max_iterations == 0 || self.max_intervals == 0 {
            return Err("interval counts and iteration cap must be positive".into());
        }
        if self.initial_intervals > self.max_intervals {
            return Err("initial_intervals exceeds max_intervals".into());
        }
        if !(self.split_threshold > 0.0 && self.split_threshold < 1.0) {
            return Err("split_threshold must lie in (0, 1)".into());
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err("tolerance must lie in (0, 1)".into());
        }
        if !(1..=5).contains(&self.quadrature_points) {
            return Err("quadrature_points must be between 1 and 5".into());
        }
        Ok(())
    }
}

/// Evidence likelihood below this counts as impossible.
pub const ZERO_EVIDENCE_THRESHOLD: f64 = 1e-300;

/// Upper limit on parent combinations enumerated for exact point grids.
const POINT_GRID_COMBINATIONS: usize = 4096;

/// Cells whose flat-density error exceeds this are halved even
/// when they hold little mass.
const ERROR_SPLIT_THRESHOLD: f64 = 1e-7;

/// Most pieces a single heavy cell is split into per refinement pass.
const MAX_SPLIT_PARTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("model has validation errors: {0}")]
    InvalidModel(String),
    #[error("invalid evidence on '{node}': {message}")]
    InvalidEvidence { node: String, message: String },
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("evidence has probability zero under the model (log likelihood {log_evidence})")]
    ZeroProbabilityEvidence { log_evidence: f64 },
    #[error("node '{node}': {source}")]
    Domain { node: String, source: EvalError },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid predicate: {0}")]
    Predicate(String),
}

/// Discretized model state for one evidence set.
struct Solver<'a> {
    model: &'a CompiledModel,
    config: &'a DiscretizationConfig,
    evidence: Evidence,
    grids: Vec<Grid>,
    cpts: Vec<Factor>,
    /// Grids each CPT was built against: the node's own, then its parents'.
    cpt_grids: Vec<Vec<Grid>>,
    observed: BTreeSet<usize>,
}

impl<'a> Solver<'a> {
    fn new(
        model: &'a CompiledModel,
        evidence: &Evidence,
        config: &'a DiscretizationConfig,
        extra_breaks: &[(usize, f64)],
    ) -> Result<Self, InferenceError> {
        config.validate().map_err(InferenceError::Config)?;
        let report = validate_with_evidence(model, evidence);
        if let Some(d) = report.errors().next() {
            let node = d.node.clone().unwrap_or_default();
            return Err(match d.code {
                DiagnosticCode::UnknownEvidenceNode => InferenceError::UnknownNode(node),
                DiagnosticCode::InvalidObservation => InferenceError::InvalidEvidence { node, message: d.message.clone() },
                _ => InferenceError::InvalidModel(d.message.clone()),
            });
        }
        let evidence = model.spec().merged_evidence(evidence);
        let observed = evidence.keys().map(|k| model.index_of(k).unwrap()).collect();
        let mut s = Solver { model, config, evidence, grids: Vec::new(), cpts: Vec::new(), cpt_grids: Vec::new(), observed };
        let mut breaks: Vec<Vec<f64>> = vec![Vec::new(); model.nodes().len()];
        for &(i, b) in extra_breaks {
            breaks[i].push(b);
        }
        s.grids = s.initial_grids(&breaks)?;
        // Thresholds of comparison nodes become grid breakpoints so that
        // cells never straddle them.
        let mut changed = false;
        for (i, node) in model.nodes().iter().enumerate() {
            let Some((_, a, b)) = cpt::comparison_operands(node) else { continue };
            let values = |side: &cpt::Side| -> Vec<f64> {
                match *side {
                    cpt::Side::Const(c) => vec![c],
                    cpt::Side::Slot(k) => {
                        let p = node.parents[k];
                        let g = &s.grids[p];
                        if g.is_point_like() && g.len() <= 64 {
                            g.entries.iter().map(|e| e.midpoint(model.node(p))).collect()
                        } else {
                            Vec::new()
                        }
                    }
                }
            };
            for (x, y) in [(&a, &b), (&b, &a)] {
                if let cpt::Side::Slot(k) = *x {
                    let p = node.parents[k];
                    if s.grids[p].is_refinable() {
                        let vs = values(y);
                        if !vs.is_empty() {
                            breaks[p].extend(vs);
                            changed = true;
                        }
                    }
                }
            }
            let _ = i;
        }
        if changed {
            s.grids = s.initial_grids(&breaks)?;
        }
        Ok(s)
    }

    fn initial_grids(&self, breaks: &[Vec<f64>]) -> Result<Vec<Grid>, InferenceError> {
        let model = self.model;
        let n0 = self.config.initial_intervals;
        let mut grids: Vec<Grid> = vec![Grid::new(Vec::new()); model.nodes().len()];
        let mut ranges: Vec<Range> = model.nodes().iter().map(|n| n.support).collect();
        for &i in model.order() {
            let node = model.node(i);
            let obs = self.evidence.get(&node.id);
            let grid = if node.is_discrete() {
                let mut g = Grid::new((0..node.state_count()).map(Entry::State).collect());
                let hit = match obs {
                    Some(Observation::State(s)) => node.state_index(s),
                    Some(Observation::Value(v)) => Some(*v as usize),
                    _ => None,
                };
                if let Some(h) = hit {
                    g.active.iter_mut().enumerate().for_each(|(k, a)| *a = k == h);
                }
                g
            } else if let Some(Observation::Value(v)) = obs {
                let mut g = Grid::new(vec![Entry::Point(*v)]);
                g.clamped = true;
                g
            } else {
                let interval = match obs {
                    Some(Observation::Interval(iv)) => Some(*iv),
                    _ => None,
                };
                let mut g = match self.point_grid(i, &grids)? {
                    Some(g) => g,
                    None => {
                        let [lo, hi] = self.initial_range(i, &grids, &ranges, interval)?;
                        let mut bk = breaks[i].clone();
                        if let Some([a, b]) = interval {
                            bk.extend([a, b]);
                        }
                        if lo == hi {
                            Grid::new(vec![Entry::Point(lo)])
                        } else if node.kind == NodeKind::IntegerInterval {
                            let mut bk2 = Vec::new();
                            if let Some([a, b]) = interval {
                                bk2.extend([a.ceil() - 0.5, b.floor() + 0.5]);
                            }
                            bk2.extend(breaks[i].iter().map(|b| b.floor() + 0.5));
                            Grid::new(grid::bins(lo, hi, n0, &bk2))
                        } else {
                            Grid::new(grid::cells(lo, hi, n0, &bk))
                        }
                    }
                };
                if let Some(iv) = interval {
                    apply_interval_mask(&mut g, iv);
                }
                g
            };
            if !node.is_discrete() {
                ranges[i] = grid_hull(&grid);
            }
            grids[i] = grid;
        }
        Ok(grids)
    }

    /// Every joint assignment of `i`'s parents as `(value, state)` pairs,
    /// when all parents take few enough values.
    fn parent_combos(&self, i: usize, grids: &[Grid]) -> Option<Vec<Vec<(f64, Option<usize>)>>> {
        let node = self.model.node(i);
        if !node.parents.iter().all(|&p| grids[p].is_point_like()) {
            return None;
        }
        let combos: usize = node.parents.iter().map(|&p| grids[p].len()).product();
        if combos > POINT_GRID_COMBINATIONS {
            return None;
        }
        let mut out = Vec::with_capacity(combos);
        let mut idx = vec![0usize; node.parents.len()];
        for _ in 0..combos {
            out.push(
                node.parents
                    .iter()
                    .zip(&idx)
                    .map(|(&p, &k)| match grids[p].entries[k] {
                        Entry::State(s) => (self.model.node(p).state_value(s), Some(s)),
                        Entry::Point(v) => (v, None),
                        _ => unreachable!("point-like grid"),
                    })
                    .collect(),
            );
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < grids[node.parents[d]].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        Some(out)
    }

    fn case_for<'e>(node: &'e crate::graph::Node, vals: &[(f64, Option<usize>)]) -> Option<&'e Expr<usize>> {
        match &node.cpd {
            crate::graph::Cpd::Expr(e) => Some(e),
            crate::graph::Cpd::Partitioned { slot, cases } => cases[vals[*slot].1?].as_ref(),
            crate::graph::Cpd::Table(_) => None,
        }
    }

    /// Exact grid of attainable values for a deterministic node whose
    /// parents all take finitely many values.
    fn point_grid(&self, i: usize, grids: &[Grid]) -> Result<Option<Grid>, InferenceError> {
        let node = self.model.node(i);
        if !node.cpd.is_deterministic() {
            return Ok(None);
        }
        let Some(combos) = self.parent_combos(i, grids) else { return Ok(None) };
        let mut values = Vec::with_capacity(combos.len());
        for vals in &combos {
            let Some(expr) = Self::case_for(node, vals) else { return Ok(None) };
            let v = expr
                .eval_with(&mut |s: &usize| Ok(vals[*s].0))
                .map_err(|source| InferenceError::Domain { node: node.id.clone(), source })?;
            values.push(v);
        }
        values.sort_by(|a, b| a.total_cmp(b));
        values.dedup_by(|a, b| cpt::points_match(*a, *b));
        Ok(Some(Grid::new(values.into_iter().map(Entry::Point).collect())))
    }

    /// Range the initial grid of `i` spans: its static support narrowed by
    /// the ranges its parents actually take under this evidence.
    fn initial_range(
        &self,
        i: usize,
        grids: &[Grid],
        ranges: &[Range],
        interval: Option<[f64; 2]>,
    ) -> Result<Range, InferenceError> {
        let node = self.model.node(i);
        let [slo, shi] = node.support;
        let parent_ranges: Vec<Range> = node.parents.iter().map(|&p| ranges[p]).collect();
        let mut r = node
            .cpd
            .expressions()
            .map(|e| support_range(e, &parent_ranges))
            .reduce(|a, b| [a[0].min(b[0]), a[1].max(b[1])])
            .unwrap_or(node.support);
        if let Some(combos) = self.parent_combos(i, grids) {
            let mut hull = [f64::INFINITY, f64::NEG_INFINITY];
            for vals in &combos {
                let Some(expr) = Self::case_for(node, vals) else { continue };
                let dist = expr
                    .concretize(&mut |s: &usize| Ok::<f64, EvalError>(vals[*s].0))
                    .map_err(|source| InferenceError::Domain { node: node.id.clone(), source })?;
                let [a, b] = dist.effective_range();
                hull = [hull[0].min(a), hull[1].max(b)];
            }
            r = [r[0].max(hull[0]), r[1].min(hull[1])];
        }
        if let Some([a, b]) = interval {
            r = [r[0].max(a), r[1].min(b)];
        }
        let mut r = [r[0].max(slo), r[1].min(shi)];
        if node.kind == NodeKind::IntegerInterval {
            r = [r[0].ceil(), r[1].floor()];
        }
        Ok(if r[0] <= r[1] && r[0].is_finite() && r[1].is_finite() { r } else { node.support })
    }

    /// Rebuilds the CPTs whose node or parent grids changed since the last pass.
    fn build_cpts(&mut self) -> Result<(), InferenceError> {
        let keys: Vec<Vec<Grid>> = self
            .model
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| std::iter::once(i).chain(n.parents.iter().copied()).map(|j| self.grids[j].clone()).collect())
            .collect();
        let rebuilt: Vec<Option<Factor>> = (0..keys.len())
            .into_par_iter()
            .map(|i| {
                if self.cpt_grids.get(i) == Some(&keys[i]) {
                    return Ok(None);
                }
                cpt::build_cpt(self.model, &self.grids, i, self.config.quadrature_points).map(Some)
            })
            .collect::<Result<_, _>>()?;
        if self.cpts.len() != keys.len() {
            self.cpts = rebuilt.into_iter().map(|f| f.expect("first pass builds every CPT")).collect();
        } else {
            for (slot, f) in self.cpts.iter_mut().zip(rebuilt) {
                if let Some(f) = f {
                    *slot = f;
                }
            }
        }
        self.cpt_grids = keys;
        Ok(())
    }

    /// Ancestors of `targets` and of every observed node, inclusive.
    fn relevant(&self, targets: &[usize]) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<usize> = targets.iter().chain(&self.observed).copied().collect();
        while let Some(i) = stack.pop() {
            if out.insert(i) {
                stack.extend(self.model.node(i).parents.iter().copied());
            }
        }
        out
    }

    fn joint(&self, targets: &[usize]) -> Factor {
        let factors: Vec<Factor> = self.relevant(targets).into_iter().map(|i| self.cpts[i].clone()).collect();
        eliminate(factors, targets)
    }

    fn log_evidence(&self) -> f64 {
        if self.observed.is_empty() {
            return 0.0;
        }
        self.joint(&[]).ln_total()
    }

    fn marginal(&self, i: usize) -> Vec<f64> {
        let f = self.joint(&[i]);
        let z: f64 = f.values.iter().sum();
        f.values.iter().map(|v| v / z).collect()
    }

    /// Solves once; returns per-node normalized masses and the log evidence.
    fn solve(&mut self) -> Result<(Vec<Vec<f64>>, f64), InferenceError> {
        self.build_cpts()?;
        let ln_z = self.log_evidence();
        if !(ln_z > f64::NEG_INFINITY) {
            return Err(InferenceError::ZeroProbabilityEvidence { log_evidence: ln_z });
        }
        let marginals = (0..self.model.nodes().len()).into_par_iter().map(|i| self.marginal(i)).collect();
        Ok((marginals, ln_z))
    }

    /// Splits high-mass cells. Returns `(any split, cap reached)`.
    fn refine(&mut self, marginals: &[Vec<f64>]) -> (bool, bool) {
        let mut any = false;
        let mut capped = false;
        for (i, m) in marginals.iter().enumerate() {
            let g = &self.grids[i];
            if g.clamped || !g.is_refinable() {
                continue;
            }
            let t = self.config.split_threshold;
            let err = grid::entropy_errors(&g.entries, m);
            let mut parts: Vec<usize> = (0..g.len())
                .map(|k| {
                    if !g.active[k] || grid::split(&g.entries[k]).is_none() {
                        1
                    } else if m[k] > t {
                        ((m[k] / t).ceil() as usize).clamp(2, MAX_SPLIT_PARTS)
                    } else if err[k] > ERROR_SPLIT_THRESHOLD {
                        2
                    } else {
                        1
                    }
                })
                .collect();
            if parts.iter().all(|&p| p == 1) {
                continue;
            }
            let room = self.config.max_intervals.saturating_sub(g.len());
            let mut extra: usize = parts.iter().map(|p| p - 1).sum();
            if extra > room {
                capped = true;
                // Fall back to halving the heaviest entries that still fit.
                let mut order: Vec<usize> = (0..g.len()).filter(|&k| parts[k] > 1).collect();
                let score = |k: usize| (m[k] / t).max(err[k] / ERROR_SPLIT_THRESHOLD);
                order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
                parts.iter_mut().for_each(|p| *p = 1);
                extra = 0;
                for k in order {
                    if extra < room {
                        parts[k] = 2;
                        extra += 1;
                    }
                }
                if extra == 0 {
                    continue;
                }
            }
            any = true;
            let mut entries = Vec::with_capacity(g.len() + extra);
            let mut active = Vec::with_capacity(g.len() + extra);
            for k in 0..g.len() {
                match grid::split_into(&g.entries[k], parts[k]) {
                    Some(pieces) => {
                        active.extend(std::iter::repeat_n(g.active[k], pieces.len()));
                        entries.extend(pieces);
                    }
                    None => {
                        entries.push(g.entries[k]);
                        active.push(g.active[k]);
                    }
                }
            }
            let g = &mut self.grids[i];
            g.entries = entries;
            g.active = active;
        }
        (any, capped)
    }

    fn summarize(&self, marginals: &[Vec<f64>]) -> Vec<NodePosterior> {
        marginals.iter().enumerate().map(|(i, m)| posterior::summarize(self.model.node(i), &self.grids[i], m)).collect()
    }

    /// Runs the refinement loop to completion.
    fn run(&mut self) -> Result<(PosteriorSet, Vec<Vec<f64>>), InferenceError> {
        let mut warnings: Vec<Diagnostic> = validate_with_evidence(self.model, &Evidence::new())
            .warnings()
            .filter(|d| !(d.code == DiagnosticCode::UnboundedIntegerWarning && self.is_observed(d.node.as_deref())))
            .cloned()
            .collect();
        let mut prev: Option<Vec<(f64, f64)>> = None;
        let mut converged = false;
        let mut capped_any = false;
        let mut iterations = 0;
        let (marginals, ln_z, summaries) = loop {
            let (marginals, ln_z) = self.solve()?;
            iterations += 1;
            let summaries = self.summarize(&marginals);
            let moments: Vec<(f64, f64)> = summaries.iter().map(|p| (p.mean, p.variance)).collect();
            let settled = prev.as_ref().is_some_and(|p| {
                p.iter().zip(&moments).enumerate().all(|(i, (a, b))| {
                    self.observed.contains(&i) || (rel_close(a.0, b.0, self.config.tolerance) && rel_close(a.1, b.1, self.config.tolerance))
                })
            });
            if settled && iterations >= 3 {
                converged = true;
                break (marginals, ln_z, summaries);
            }
            if iterations >= self.config.max_iterations {
                break (marginals, ln_z, summaries);
            }
            let (split_any, capped) = self.refine(&marginals);
            capped_any |= capped;
            if !split_any {
                converged = !capped_any;
                break (marginals, ln_z, summaries);
            }
            prev = Some(moments);
        };
        if ln_z < ZERO_EVIDENCE_THRESHOLD.ln() {
            return Err(InferenceError::ZeroProbabilityEvidence { log_evidence: ln_z });
        }
        if !converged {
            warnings.push(Diagnostic {
                severity: Severity::Warning,
                code: DiagnosticCode::BudgetExceeded,
                node: None,
                message: format!(
                    "refinement stopped after {iterations} iterations without reaching tolerance {}",
                    self.config.tolerance
                ),
            });
        }
        let nodes = self.model.nodes().iter().zip(summaries).map(|(n, p)| (n.id.clone(), p)).collect();
        Ok((PosteriorSet { nodes, warnings, iterations, converged, log_evidence: ln_z }, marginals))
    }

    fn is_observed(&self, id: Option<&str>) -> bool {
        id.is_some_and(|id| self.evidence.contains_key(id))
    }
}

fn grid_hull(g: &Grid) -> Range {
    let bounds = |e: &Entry| match *e {
        Entry::Cell { lo, hi } | Entry::Bin { lo, hi } => [lo, hi],
        Entry::Point(v) => [v, v],
        Entry::State(s) => [s as f64, s as f64],
    };
    let first = bounds(&g.entries[0]);
    let last = bounds(&g.entries[g.len() - 1]);
    [first[0].min(last[0]), first[1].max(last[1])]
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) || (a - b).abs() < 1e-300
}

fn apply_interval_mask(g: &mut Grid, [a, b]: [f64; 2]) {
    let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
    for (k, e) in g.entries.iter().enumerate() {
        g.active[k] = match *e {
            Entry::Cell { lo, hi } => lo >= a - tol && hi <= b + tol,
            Entry::Bin { lo, hi } => lo >= a.ceil() && hi <= b.floor(),
            Entry::Point(v) => v >= a - tol && v <= b + tol,
            Entry::State(_) => true,
        };
    }
}

/// Posterior marginals of every node given `evidence` (overlaid on the
/// model's built-in observations).
pub fn infer(model: &CompiledModel, evidence: &Evidence, config: &DiscretizationConfig) -> Result<PosteriorSet, InferenceError> {
    Solver::new(model, evidence, config, &[])?.run().map(|(p, _)| p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Operand {
    Const(f64),
    Node(String),
}

/// Comparison between two nodes, or a node and a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub lhs: Operand,
    pub op: CmpOp,
    pub rhs: Operand,
}

impl Predicate {
    pub fn new(lhs: Operand, op: CmpOp, rhs: Operand) -> Self {
        Self { lhs, op, rhs }
    }
}

impl FromStr for Predicate {
    type Err = InferenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let e = parse_expression(s).map_err(|e| InferenceError::Predicate(e.to_string()))?;
        let Expr::Compare(op, a, b) = e else {
            return Err(InferenceError::Predicate(format!("'{s}' is not a comparison")));
        };
        let side = |x: &Expr| match x {
            Expr::Const(c) => Ok(Operand::Const(*c)),
            Expr::Ref(r) => Ok(Operand::Node(r.clone())),
            other => Err(InferenceError::Predicate(format!("operand '{other}' must be a node or a number"))),
        };
        Ok(Predicate { lhs: side(&a)?, op, rhs: side(&b)? })
    }
}

/// `P(predicate | evidence)` from the discretized joint of the operands,
/// assuming uniform density within each cell.
pub fn probability_query(
    model: &CompiledModel,
    evidence: &Evidence,
    predicate: &Predicate,
    config: &DiscretizationConfig,
) -> Result<f64, InferenceError> {
    let resolve = |o: &Operand| -> Result<Option<usize>, InferenceError> {
        match o {
            Operand::Const(_) => Ok(None),
            Operand::Node(id) => {
                let i = model.index_of(id).ok_or_else(|| InferenceError::UnknownNode(id.clone()))?;
                if model.node(i).kind == NodeKind::Labelled || model.node(i).kind == NodeKind::Boolean {
                    // labelled nodes compare on their state index
                }
                Ok(Some(i))
            }
        }
    };
    let a = resolve(&predicate.lhs)?;
    let b = resolve(&predicate.rhs)?;
    let mut breaks = Vec::new();
    for (x, y) in [(a, &predicate.rhs), (b, &predicate.lhs)] {
        if let (Some(i), Operand::Const(c)) = (x, y) {
            breaks.push((i, *c));
        }
    }
    let mut solver = Solver::new(model, evidence, config, &breaks)?;
    solver.run()?;
    // The grids now match the final solve.
    let const_piece = |o: &Operand| match o {
        Operand::Const(c) => vec![(cpt::Piece::Point(*c), 1.0)],
        Operand::Node(_) => unreachable!(),
    };
    let pieces_of = |i: usize, k: usize| cpt::entry_pieces(model.node(i), solver.grids[i].entries[k]);
    let expect = |pa: &[(cpt::Piece, f64)], pb: &[(cpt::Piece, f64)]| -> f64 {
        let mut s = 0.0;
        for &(x, wx) in pa {
            for &(y, wy) in pb {
                s += wx * wy * cpt::compare_pieces(predicate.op, x, y);
            }
        }
        s
    };
    let p = match (a, b) {
        (None, None) => expect(&const_piece(&predicate.lhs), &const_piece(&predicate.rhs)),
        (Some(i), None) | (None, Some(i)) => {
            let m = solver.marginal(i);
            let c = if a.is_some() { &predicate.rhs } else { &predicate.lhs };
            m.iter()
                .enumerate()
                .map(|(k, &mk)| {
                    if mk == 0.0 {
                        return 0.0;
                    }
                    let pk = pieces_of(i, k);
                    mk * if a.is_some() { expect(&pk, &const_piece(c)) } else { expect(&const_piece(c), &pk) }
                })
                .sum()
        }
        (Some(i), Some(j)) if i == j => {
            let m = solver.marginal(i);
            let same = matches!(predicate.op, CmpOp::Le | CmpOp::Ge | CmpOp::Eq);
            if same {
                m.iter().sum()
            } else {
                0.0
            }
        }
        (Some(i), Some(j)) => {
            let f = solver.joint(&[i, j]);
            let z: f64 = f.values.iter().sum();
            let nj = f.card[1];
            let mut s = 0.0;
            for (idx, &v) in f.values.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let (ki, kj) = (idx / nj, idx % nj);
                s += v / z * expect(&pieces_of(i, ki), &pieces_of(j, kj));
            }
            s
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Copy of `model` with `node` fixed at `value` and cut from its parents.
pub fn do_intervention(model: &CompiledModel, node: &str, value: &Observation) -> Result<CompiledModel, InterventionError> {
    model.intervene(node, value)
}
