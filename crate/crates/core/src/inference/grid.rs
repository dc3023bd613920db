//! Per-node discretization grids.

use crate::graph::{Node, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Entry {
    /// Discrete state index.
    State(usize),
    /// Continuous cell `[lo, hi)`; the last cell of a grid also holds `hi`.
    Cell { lo: f64, hi: f64 },
    /// Inclusive integer range `[lo, hi]`.
    Bin { lo: f64, hi: f64 },
    Point(f64),
}

impl Entry {
    pub fn midpoint(&self, node: &Node) -> f64 {
        match *self {
            Entry::State(i) => node.state_value(i),
            Entry::Cell { lo, hi } | Entry::Bin { lo, hi } => 0.5 * (lo + hi),
            Entry::Point(v) => v,
        }
    }

    /// Numeric extent: cells and points as given, bins widened to
    /// `[lo, hi + 1)`, ranked states to their interval, other states to
    /// their index.
    pub fn extent(&self, node: &Node) -> [f64; 2] {
        match *self {
            Entry::State(i) if node.kind == NodeKind::Ranked => node.ranked_interval(i),
            Entry::State(i) => [i as f64, i as f64],
            Entry::Cell { lo, hi } => [lo, hi],
            Entry::Bin { lo, hi } => [lo, hi + 1.0],
            Entry::Point(v) => [v, v],
        }
    }

    pub fn is_point_like(&self) -> bool {
        matches!(self, Entry::State(_) | Entry::Point(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub entries: Vec<Entry>,
    /// Evidence mask; inactive entries get zero weight.
    pub active: Vec<bool>,
    /// True when the node carries a `Value` observation.
    pub clamped: bool,
}

impl Grid {
    pub fn new(entries: Vec<Entry>) -> Self {
        let n = entries.len();
        Self { entries, active: vec![true; n], clamped: false }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_point_like(&self) -> bool {
        self.entries.iter().all(Entry::is_point_like)
    }

    pub fn is_refinable(&self) -> bool {
        self.entries.iter().any(|e| matches!(e, Entry::Cell { .. } | Entry::Bin { .. }))
    }
}

/// Equal-width cells over `[lo, hi]` with extra breakpoints inserted.
pub fn cells(lo: f64, hi: f64, n: usize, breaks: &[f64]) -> Vec<Entry> {
    let mut edges: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    edges[n] = hi;
    edges.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    edges.sort_by(|a, b| a.total_cmp(b));
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    edges.windows(2).map(|w| Entry::Cell { lo: w[0], hi: w[1] }).collect()
}

/// Integer bins of near-equal width over `[lo, hi]`. Each break `b`
/// starts a new bin at `ceil(b)` and ends one at `floor(b)`.
pub fn bins(lo: f64, hi: f64, n: usize, breaks: &[f64]) -> Vec<Entry> {
    let count = hi - lo + 1.0;
    let mut starts: Vec<f64> = if count <= n as f64 {
        (0..count as usize).map(|i| lo + i as f64).collect()
    } else {
        (0..n).map(|i| lo + (count * i as f64 / n as f64).floor()).collect()
    };
    for &b in breaks {
        for s in [b.ceil(), b.floor() + 1.0] {
            if s > lo && s <= hi {
                starts.push(s);
            }
        }
    }
    starts.sort_by(|a, b| a.total_cmp(b));
    starts.dedup();
    let mut out = Vec::with_capacity(starts.len());
    for (i, &s) in starts.iter().enumerate() {
        let e = starts.get(i + 1).map(|n| n - 1.0).unwrap_or(hi);
        out.push(Entry::Bin { lo: s, hi: e });
    }
    out
}

/// Inserts breakpoints into an existing grid, splitting cells and bins.
pub fn insert_breaks(entries: &[Entry], breaks: &[f64]) -> Vec<Entry> {
    let mut out = Vec::with_capacity(entries.len() + breaks.len());
    for e in entries {
        match *e {
            Entry::Cell { lo, hi } => {
                let inner: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
                if inner.is_empty() {
                    out.push(*e);
                } else {
                    out.extend(cells(lo, hi, 1, &inner));
                }
            }
            Entry::Bin { lo, hi } => {
                let inner: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi + 1.0).collect();
                if inner.is_empty() || lo == hi {
                    out.push(*e);
                } else {
                    out.extend(bins(lo, hi, 1, &inner));
                }
            }
            other => out.push(other),
        }
    }
    out
}

/// Splits an entry in two; `None` for entries that cannot be split.
pub fn split(e: &Entry) -> Option<[Entry; 2]> {
    match *e {
        Entry::Cell { lo, hi } => {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return None;
            }
            Some([Entry::Cell { lo, hi: mid }, Entry::Cell { lo: mid, hi }])
        }
        Entry::Bin { lo, hi } if hi > lo => {
            let mid = ((lo + hi) / 2.0).floor();
            Some([Entry::Bin { lo, hi: mid }, Entry::Bin { lo: mid + 1.0, hi }])
        }
        _ => None,
    }
}

/// Splits an entry into up to `parts` equal pieces (fewer for narrow bins).
pub fn split_into(e: &Entry, parts: usize) -> Option<Vec<Entry>> {
    if parts < 2 {
        return None;
    }
    match *e {
        Entry::Cell { lo, hi } => {
            let w = (hi - lo) / parts as f64;
            if !(lo + w > lo && lo + w < hi) {
                return split(e).map(Vec::from);
            }
            let edges: Vec<f64> = (0..=parts).map(|k| if k == parts { hi } else { lo + w * k as f64 }).collect();
            Some(edges.windows(2).map(|w| Entry::Cell { lo: w[0], hi: w[1] }).collect())
        }
        Entry::Bin { lo, hi } if hi > lo => {
            let count = hi - lo + 1.0;
            let parts = (parts as f64).min(count);
            let edges: Vec<f64> = (0..=parts as usize).map(|k| lo + (count * k as f64 / parts).floor()).collect();
            Some(edges.windows(2).filter(|w| w[1] > w[0]).map(|w| Entry::Bin { lo: w[0], hi: w[1] - 1.0 }).collect())
        }
        _ => None,
    }
}

/// Gauss-Legendre nodes on `[0, 1]` with weights summing to one.
pub fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    const G1: [(f64, f64); 1] = [(0.5, 1.0)];
    const G2: [(f64, f64); 2] = [(0.211_324_865_405_187_1, 0.5), (0.788_675_134_594_812_9, 0.5)];
    const G3: [(f64, f64); 3] = [
        (0.112_701_665_379_258_3, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.887_298_334_620_741_7, 5.0 / 18.0),
    ];
    const G4: [(f64, f64); 4] = [
        (0.069_431_844_202_973_7, 0.173_927_422_568_726_9),
        (0.330_009_478_207_571_9, 0.326_072_577_431_273_1),
        (0.669_990_521_792_428_1, 0.326_072_577_431_273_1),
        (0.930_568_155_797_026_3, 0.173_927_422_568_726_9),
    ];
    const G5: [(f64, f64); 5] = [
        (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
        (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
        (0.5, 0.284_444_444_444_444_4),
        (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
        (0.953_089_922_969_332_0, 0.118_463_442_528_094_5),
    ];
    match n {
        0 | 1 => &G1,
        2 => &G2,
        3 => &G3,
        4 => &G4,
        _ => &G5,
    }
}

/// Integer bins up to this width are enumerated exactly when used as a parent.
pub const ENUMERATE_BIN_WIDTH: f64 = 32.0;

/// Parent sub-points for an entry: `(value, state, weight)`.
pub fn sub_points(node: &Node, e: &Entry, quad: usize) -> Vec<(f64, Option<usize>, f64)> {
    match *e {
        Entry::State(i) => vec![(node.state_value(i), Some(i), 1.0)],
        Entry::Point(v) => vec![(v, None, 1.0)],
        Entry::Cell { lo, hi } => gauss_legendre(quad).iter().map(|&(x, w)| (lo + (hi - lo) * x, None, w)).collect(),
        Entry::Bin { lo, hi } => {
            let count = hi - lo + 1.0;
            if count <= ENUMERATE_BIN_WIDTH {
                let w = 1.0 / count;
                (0..count as usize).map(|k| (lo + k as f64, None, w)).collect()
            } else {
                gauss_legendre(quad)
                    .iter()
                    .map(|&(x, w)| ((lo + (hi - lo) * x).round(), None, w))
                    .collect()
            }
        }
    }
}

/// Error of treating each cell's density as flat: the generalized KL gap
/// between the cell average and edge densities interpolated from the
/// neighbours, times the width. Integer bins count as `[lo - 1/2, hi + 1/2]`
/// and are scored at `BIN_ERROR_WEIGHT`, since posterior moments already
/// correct for smooth slopes inside a bin; points and states score zero.
const BIN_ERROR_WEIGHT: f64 = 1e-3;

pub fn entropy_errors(entries: &[Entry], masses: &[f64]) -> Vec<f64> {
    let span = |e: &Entry| match *e {
        Entry::Cell { lo, hi } => Some((lo, hi)),
        Entry::Bin { lo, hi } => Some((lo - 0.5, hi + 0.5)),
        _ => None,
    };
    let spans: Vec<Option<(f64, f64)>> = entries.iter().map(span).collect();
    let dens: Vec<f64> = spans.iter().zip(masses).map(|(s, &m)| s.map_or(0.0, |(lo, hi)| m / (hi - lo))).collect();
    let edge = |i: usize, j: usize| -> Option<f64> {
        let (a, b) = (spans[i]?, spans[j]?);
        if (a.1 - b.0).abs() > 1e-12 * a.1.abs().max(1.0) {
            return None;
        }
        let (wa, wb) = (a.1 - a.0, b.1 - b.0);
        Some((dens[i] * wb + dens[j] * wa) / (wa + wb))
    };
    let gap = |f: f64, a: f64| if f > 0.0 && a > 0.0 { f * (f / a).ln() - f + a } else { f + a };
    (0..entries.len())
        .map(|i| {
            let Some((lo, hi)) = spans[i] else { return 0.0 };
            let a = dens[i];
            let left = if i > 0 { edge(i - 1, i) } else { None };
            let right = if i + 1 < entries.len() { edge(i, i + 1) } else { None };
            let e: f64 = [left, right].into_iter().flatten().map(|f| 0.5 * gap(f, a)).sum();
            let w = if matches!(entries[i], Entry::Bin { .. }) { BIN_ERROR_WEIGHT } else { 1.0 };
            (w * e * (hi - lo)).max(0.0)
        })
        .collect()
}
