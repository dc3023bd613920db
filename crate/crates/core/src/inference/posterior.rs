//! Posterior marginals and their summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::{Entry, Grid};
use crate::graph::{Diagnostic, Node, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Percentiles {
    pub fn as_array(&self) -> [f64; 5] {
        [self.p05, self.p25, self.p50, self.p75, self.p95]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateProbability {
    pub state: String,
    pub probability: f64,
}

/// Histogram bin. Integer bins are inclusive on both ends; point masses
/// have `lo == hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePosterior {
    pub kind: NodeKind,
    pub mean: f64,
    pub variance: f64,
    pub percentiles: Percentiles,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<StateProbability>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub histogram: Vec<HistogramBin>,
}

impl NodePosterior {
    pub fn state_probability(&self, label: &str) -> Option<f64> {
        self.states.iter().find(|s| s.state.eq_ignore_ascii_case(label)).map(|s| s.probability)
    }

    /// Most probable state (first on ties).
    pub fn mode(&self) -> Option<&str> {
        let mut best: Option<&StateProbability> = None;
        for s in &self.states {
            if best.is_none_or(|b| s.probability > b.probability) {
                best = Some(s);
            }
        }
        best.map(|s| s.state.as_str())
    }

    /// Total probability mass, one up to rounding.
    pub fn total_mass(&self) -> f64 {
        if self.states.is_empty() {
            self.histogram.iter().map(|b| b.mass).sum()
        } else {
            self.states.iter().map(|s| s.probability).sum()
        }
    }

    pub fn is_point_mass(&self) -> bool {
        self.variance == 0.0
    }

    /// Point mass at `v` for a numeric node.
    pub fn point(kind: NodeKind, v: f64) -> Self {
        NodePosterior {
            kind,
            mean: v,
            variance: 0.0,
            percentiles: Percentiles { p05: v, p25: v, p50: v, p75: v, p95: v },
            states: Vec::new(),
            histogram: vec![HistogramBin { lo: v, hi: v, mass: 1.0 }],
        }
    }
}

/// Mean, variance, percentiles and state probabilities of one marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
    pub percentiles: Percentiles,
    pub states: Vec<StateProbability>,
}

pub fn posterior_summary(p: &NodePosterior) -> PosteriorSummary {
    PosteriorSummary { mean: p.mean, variance: p.variance, percentiles: p.percentiles, states: p.states.clone() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSet {
    pub nodes: BTreeMap<String, NodePosterior>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Diagnostic>,
    pub iterations: usize,
    pub converged: bool,
    /// Log probability (or density) of the evidence under the discretized model.
    pub log_evidence: f64,
}

impl PosteriorSet {
    pub fn get(&self, id: &str) -> Option<&NodePosterior> {
        self.nodes.get(id)
    }

    pub fn mean(&self, id: &str) -> Option<f64> {
        self.get(id).map(|p| p.mean)
    }
}

/// `(lo, hi, mass)` pieces in ascending order, mass uniform within a piece.
fn pieces(node: &Node, grid: &Grid, masses: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut v: Vec<(f64, f64, f64)> = grid
        .entries
        .iter()
        .zip(masses)
        .map(|(e, &m)| match *e {
            Entry::State(i) => {
                let x = node.state_value(i);
                (x, x, m)
            }
            Entry::Cell { lo, hi } => (lo, hi, m),
            Entry::Bin { lo, hi } => (lo, hi + 1.0, m),
            Entry::Point(x) => (x, x, m),
        })
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

fn percentile(pieces: &[(f64, f64, f64)], q: f64, integer: bool) -> f64 {
    let mut cum = 0.0;
    for &(lo, hi, m) in pieces {
        if m <= 0.0 {
            continue;
        }
        if cum + m >= q {
            if hi == lo {
                return lo;
            }
            let frac = ((q - cum) / m).clamp(0.0, 1.0);
            let x = lo + frac * (hi - lo);
            return if integer { x.floor().min(hi - 1.0) } else { x };
        }
        cum += m;
    }
    pieces.iter().rev().find(|p| p.2 > 0.0).map_or(f64::NAN, |p| if integer { p.1 - 1.0 } else { p.1 })
}

/// Mass, mean and second moment about the mean of one entry.
struct Moments {
    mass: f64,
    mean: f64,
    spread: f64,
}

/// Within-cell moments from a parabolic density fitted to the cell average
/// and to edge densities interpolated from the neighbouring cells. Falls
/// back to a slope-limited line where the parabola would go negative.
fn cell_moments(cells: &[(f64, f64, f64)]) -> Vec<Moments> {
    let dens: Vec<f64> = cells.iter().map(|&(lo, hi, m)| m / (hi - lo)).collect();
    let edge = |i: usize, j: usize| -> Option<f64> {
        let (a, b) = (cells[i], cells[j]);
        if a.1 != b.0 {
            return None;
        }
        let (wa, wb) = (a.1 - a.0, b.1 - b.0);
        Some((dens[i] * wb + dens[j] * wa) / (wa + wb))
    };
    (0..cells.len())
        .map(|i| {
            let (lo, hi, m) = cells[i];
            let (w, mid, a) = (hi - lo, 0.5 * (lo + hi), dens[i]);
            if !(m > 0.0) {
                return Moments { mass: m, mean: mid, spread: w * w / 12.0 };
            }
            let left = if i > 0 { edge(i - 1, i) } else { None };
            let right = if i + 1 < cells.len() { edge(i, i + 1) } else { None };
            let (fl, fr) = match (left, right) {
                (Some(l), Some(r)) => (l, r),
                (Some(l), None) => (l, (2.0 * a - l).max(0.0)),
                (None, Some(r)) => ((2.0 * a - r).max(0.0), r),
                (None, None) => (a, a),
            };
            // q(t) = c0 + c1 t + c2 t^2 on t in [-1/2, 1/2]
            let mut c1 = fr - fl;
            let mut c2 = 6.0 * (0.5 * (fl + fr) - a);
            let mut c0 = a - c2 / 12.0;
            let vertex = if c2 > 0.0 { -c1 / (2.0 * c2) } else { f64::NAN };
            if vertex.abs() < 0.5 && c0 - c1 * c1 / (4.0 * c2) < 0.0 {
                c2 = 0.0;
                c0 = a;
                c1 = c1.clamp(-2.0 * a, 2.0 * a);
            }
            let shift = w * c1 / (12.0 * a);
            let about_mid = w * w * (c0 / 12.0 + c2 / 80.0) / a;
            Moments { mass: m, mean: mid + shift, spread: (about_mid - shift * shift).max(0.0) }
        })
        .collect()
}

fn entry_moments(node: &Node, grid: &Grid, masses: &[f64]) -> Vec<Moments> {
    if grid.entries.iter().all(|e| matches!(e, Entry::Cell { .. })) {
        let mut cells: Vec<(f64, f64, f64)> = grid
            .entries
            .iter()
            .zip(masses)
            .map(|(e, &m)| match *e {
                Entry::Cell { lo, hi } => (lo, hi, m),
                _ => unreachable!(),
            })
            .collect();
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        return cell_moments(&cells);
    }
    if grid.entries.iter().all(|e| matches!(e, Entry::Bin { .. })) {
        // Integer bins as unit-padded cells; the padding adds 1/12 to the
        // continuous spread, which the discrete values do not have.
        let cells: Vec<(f64, f64, f64)> = grid
            .entries
            .iter()
            .zip(masses)
            .map(|(e, &m)| match *e {
                Entry::Bin { lo, hi } => (lo - 0.5, hi + 0.5, m),
                _ => unreachable!(),
            })
            .collect();
        return cell_moments(&cells)
            .into_iter()
            .zip(&grid.entries)
            .map(|(c, e)| match *e {
                Entry::Bin { lo, hi } if lo == hi => Moments { mass: c.mass, mean: lo, spread: 0.0 },
                _ => Moments { spread: (c.spread - 1.0 / 12.0).max(0.0), ..c },
            })
            .collect();
    }
    grid.entries
        .iter()
        .zip(masses)
        .map(|(e, &m)| {
            let spread = match *e {
                // discrete uniform over the bin's integers
                Entry::Bin { lo, hi } => ((hi - lo + 1.0).powi(2) - 1.0) / 12.0,
                Entry::Cell { lo, hi } => (hi - lo).powi(2) / 12.0,
                _ => 0.0,
            };
            Moments { mass: m, mean: e.midpoint(node), spread }
        })
        .collect()
}

/// Builds a node posterior from normalized entry masses.
pub fn summarize(node: &Node, grid: &Grid, masses: &[f64]) -> NodePosterior {
    let moments = entry_moments(node, grid, masses);
    let mean: f64 = moments.iter().map(|c| c.mass * c.mean).sum();
    let variance = moments.iter().map(|c| c.mass * (c.spread + (c.mean - mean).powi(2))).sum::<f64>().max(0.0);
    let integer = node.kind == NodeKind::IntegerInterval && grid.entries.iter().any(|e| matches!(e, Entry::Bin { .. }));
    let ps = pieces(node, grid, masses);
    let q = |p| percentile(&ps, p, integer);
    let percentiles = Percentiles { p05: q(0.05), p25: q(0.25), p50: q(0.5), p75: q(0.75), p95: q(0.95) };
    let (states, histogram) = if node.is_discrete() {
        let states = grid
            .entries
            .iter()
            .zip(masses)
            .map(|(e, &m)| {
                let Entry::State(i) = *e else { unreachable!() };
                StateProbability { state: node.states[i].clone(), probability: m }
            })
            .collect();
        (states, Vec::new())
    } else {
        let hist = grid
            .entries
            .iter()
            .zip(masses)
            .map(|(e, &mass)| match *e {
                Entry::Cell { lo, hi } | Entry::Bin { lo, hi } => HistogramBin { lo, hi, mass },
                Entry::Point(v) => HistogramBin { lo: v, hi: v, mass },
                Entry::State(_) => unreachable!(),
            })
            .collect();
        (Vec::new(), hist)
    };
    NodePosterior { kind: node.kind, mean, variance, percentiles, states, histogram }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_model, ModelSpec, NodeSpec};
    use crate::inference::grid::cells;

    fn unit_node() -> Node {
        let spec = ModelSpec {
            nodes: vec![NodeSpec::expression("u", NodeKind::ContinuousInterval, "Uniform(0, 1)")],
            ..Default::default()
        };
        build_model(spec).unwrap().node(0).clone()
    }

    #[test]
    fn uniform_histogram_moments() {
        let node = unit_node();
        let grid = Grid::new(cells(0.0, 1.0, 64, &[]));
        let masses = vec![1.0 / 64.0; 64];
        let p = summarize(&node, &grid, &masses);
        assert!((p.mean - 0.5).abs() < 1e-9);
        assert!((p.variance - 1.0 / 12.0).abs() < 1e-12);
        assert!((p.percentiles.p25 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn point_mass_summary() {
        let node = unit_node();
        let grid = Grid::new(vec![Entry::Point(0.3)]);
        let p = summarize(&node, &grid, &[1.0]);
        assert_eq!(p.mean, 0.3);
        assert_eq!(p.variance, 0.0);
        assert_eq!(p.percentiles.p95, 0.3);
    }
}
