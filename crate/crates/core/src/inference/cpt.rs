//! Discretized conditional probability tables.

use rayon::prelude::*;

use super::grid::{sub_points, Entry, Grid, ENUMERATE_BIN_WIDTH};
use super::{Factor, InferenceError};
use crate::expr::{CmpOp, Distribution, EvalError, Expr};
use crate::graph::{CompiledModel, Cpd, Node, NodeKind};

/// Relative tolerance for matching a deterministic value to an observation.
pub const POINT_TOLERANCE: f64 = 1e-9;

pub fn points_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= POINT_TOLERANCE * b.abs().max(1.0)
}

/// CPT of node `i` over its parents and itself, with the evidence mask
/// applied. Rows of unclamped nodes sum to one over the full grid.
pub fn build_cpt(model: &CompiledModel, grids: &[Grid], i: usize, quad: usize) -> Result<Factor, InferenceError> {
    let node = model.node(i);
    let grid = &grids[i];
    let parents = &node.parents;
    let mut vars = parents.clone();
    vars.push(i);
    let mut card: Vec<usize> = parents.iter().map(|&p| grids[p].len()).collect();
    card.push(grid.len());
    let combos: usize = card[..parents.len()].iter().product();
    let width = grid.len();
    let mut values = vec![0.0; combos * width];
    let comparison = comparison_operands(node);

    // Clamped rows are accumulated as log-likelihoods, which can be far
    // below the smallest positive double on a coarse grid.
    let fill = if grid.clamped { f64::NEG_INFINITY } else { 0.0 };
    values.par_chunks_mut(width).enumerate().try_for_each(|(c, out)| -> Result<(), InferenceError> {
        let mut row = vec![fill; width];
        // Mixed-radix decode; the last parent varies fastest.
        let mut entries = vec![Entry::State(0); parents.len()];
        let mut rest = c;
        for d in (0..parents.len()).rev() {
            entries[d] = grids[parents[d]].entries[rest % card[d]];
            rest /= card[d];
        }
        match (&node.cpd, &comparison) {
            (Cpd::Table(rows), _) => {
                let mut r = 0;
                for (&p, e) in parents.iter().zip(&entries) {
                    let Entry::State(s) = *e else { unreachable!("table parents are discrete") };
                    r = r * model.node(p).state_count() + s;
                }
                for (k, e) in grid.entries.iter().enumerate() {
                    let Entry::State(s) = *e else { unreachable!() };
                    row[k] = rows[r][s];
                }
            }
            (_, Some((op, a, b))) => {
                let pa = pieces(model, parents, &entries, a);
                let pb = pieces(model, parents, &entries, b);
                let mut p_true = 0.0;
                for &(x, wx) in &pa {
                    for &(y, wy) in &pb {
                        p_true += wx * wy * compare_pieces(*op, x, y);
                    }
                }
                let p_true = p_true.clamp(0.0, 1.0);
                let vals = [1.0 - p_true, p_true];
                for (k, e) in grid.entries.iter().enumerate() {
                    let Entry::State(s) = *e else { unreachable!() };
                    row[k] = vals[s];
                }
            }
            _ => fill_generic_row(model, grids, node, &entries, quad, &mut row)?,
        }
        for (k, v) in row.iter().enumerate() {
            out[k] = if grid.active[k] { *v } else { fill };
        }
        Ok(())
    })?;
    if grid.clamped {
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shift = if top.is_finite() { top } else { 0.0 };
        values.iter_mut().for_each(|v| *v = (*v - shift).exp());
        let mut f = Factor::new(vars, card, values);
        f.log_scale = shift;
        f.rescale();
        return Ok(f);
    }
    let mut f = Factor::new(vars, card, values);
    f.rescale();
    Ok(f)
}

#[derive(Debug, Clone, Copy)]
pub(super) enum Side {
    Slot(usize),
    Const(f64),
}

/// `Some` when the node is a two-state comparison of parents or constants,
/// which is evaluated with exact within-cell overlap fractions.
pub(super) fn comparison_operands(node: &Node) -> Option<(CmpOp, Side, Side)> {
    if !node.is_discrete() || node.state_count() != 2 {
        return None;
    }
    let Cpd::Expr(Expr::Compare(op, a, b)) = &node.cpd else { return None };
    let operand = |e: &Expr<usize>| match e {
        Expr::Ref(s) => Some(Side::Slot(*s)),
        Expr::Const(c) => Some(Side::Const(*c)),
        _ => None,
    };
    Some((*op, operand(a)?, operand(b)?))
}

/// A value known exactly or spread uniformly over `[lo, hi)`.
#[derive(Debug, Clone, Copy)]
pub(super) enum Piece {
    Point(f64),
    Uniform(f64, f64),
}

fn pieces(model: &CompiledModel, parents: &[usize], entries: &[Entry], side: &Side) -> Vec<(Piece, f64)> {
    match *side {
        Side::Const(c) => vec![(Piece::Point(c), 1.0)],
        Side::Slot(s) => entry_pieces(model.node(parents[s]), entries[s]),
    }
}

/// Splits an entry into exact points or uniform spreads for comparisons.
pub(super) fn entry_pieces(node: &Node, e: Entry) -> Vec<(Piece, f64)> {
    match e {
        Entry::State(i) if node.kind == NodeKind::Ranked => {
            let [lo, hi] = node.ranked_interval(i);
            vec![(Piece::Uniform(lo, hi), 1.0)]
        }
        Entry::State(i) => vec![(Piece::Point(i as f64), 1.0)],
        Entry::Point(v) => vec![(Piece::Point(v), 1.0)],
        Entry::Cell { lo, hi } => vec![(Piece::Uniform(lo, hi), 1.0)],
        Entry::Bin { lo, hi } => {
            let count = hi - lo + 1.0;
            if count <= ENUMERATE_BIN_WIDTH {
                (0..count as usize).map(|k| (Piece::Point(lo + k as f64), 1.0 / count)).collect()
            } else {
                vec![(Piece::Uniform(lo - 0.5, hi + 0.5), 1.0)]
            }
        }
    }
}

/// `P(U <= y)` for `U` uniform on `[lo, hi)`.
fn uniform_cdf(lo: f64, hi: f64, y: f64) -> f64 {
    ((y - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// `E[P(U <= Y)]` with `U ~ U[a, b)` and `Y ~ U[c, d)`; the integrand is
/// piecewise linear, so integrating over each linear piece is exact.
fn uniform_le_uniform(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let mut knots = vec![c, d];
    for k in [a, b] {
        if k > c && k < d {
            knots.push(k);
        }
    }
    knots.sort_by(|x, y| x.total_cmp(y));
    let mut acc = 0.0;
    for w in knots.windows(2) {
        let (l, h) = (w[0], w[1]);
        acc += 0.5 * (uniform_cdf(a, b, l) + uniform_cdf(a, b, h)) * (h - l);
    }
    acc / (d - c)
}

pub(super) fn compare_pieces(op: CmpOp, x: Piece, y: Piece) -> f64 {
    // P(x <= y) for continuous pieces; ties only matter between points.
    let le = |x: Piece, y: Piece, strict: bool| -> f64 {
        match (x, y) {
            (Piece::Point(u), Piece::Point(v)) => {
                if (strict && u < v) || (!strict && u <= v) {
                    1.0
                } else {
                    0.0
                }
            }
            (Piece::Uniform(a, b), Piece::Point(v)) => uniform_cdf(a, b, v),
            (Piece::Point(u), Piece::Uniform(c, d)) => 1.0 - uniform_cdf(c, d, u),
            (Piece::Uniform(a, b), Piece::Uniform(c, d)) => uniform_le_uniform(a, b, c, d),
        }
    };
    match op {
        CmpOp::Le => le(x, y, false),
        CmpOp::Lt => le(x, y, true),
        CmpOp::Ge => le(y, x, false),
        CmpOp::Gt => le(y, x, true),
        CmpOp::Eq => match (x, y) {
            (Piece::Point(u), Piece::Point(v)) => {
                if u == v {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 0.0,
        },
    }
}

fn fill_generic_row(
    model: &CompiledModel,
    grids: &[Grid],
    node: &Node,
    entries: &[Entry],
    quad: usize,
    row: &mut [f64],
) -> Result<(), InferenceError> {
    let subs: Vec<Vec<(f64, Option<usize>, f64)>> = node
        .parents
        .iter()
        .zip(entries)
        .map(|(&p, e)| sub_points(model.node(p), e, quad))
        .collect();
    let grid = &grids[model.index_of(&node.id).unwrap()];
    let mut k = vec![0usize; subs.len()];
    let mut values = vec![0.0; subs.len()];
    let mut scratch = vec![0.0; row.len()];
    loop {
        let mut w = 1.0;
        for (d, s) in subs.iter().enumerate() {
            values[d] = s[k[d]].0;
            w *= s[k[d]].2;
        }
        let expr = match &node.cpd {
            Cpd::Expr(e) => e,
            Cpd::Partitioned { slot, cases } => {
                let state = subs[*slot][k[*slot]].1.expect("partition parent is discrete");
                cases[state].as_ref().ok_or_else(|| InferenceError::InvalidModel(format!(
                    "node '{}' has no partition case for state {state}",
                    node.id
                )))?
            }
            Cpd::Table(_) => unreachable!(),
        };
        let dist = expr
            .concretize(&mut |s: &usize| Ok::<f64, EvalError>(values[*s]))
            .map_err(|source| InferenceError::Domain { node: node.id.clone(), source })?;
        if grid.clamped {
            let Entry::Point(v) = grid.entries[0] else { unreachable!("clamped grids hold one point") };
            row[0] = ln_add(row[0], w.ln() + ln_likelihood(&dist, node, v));
        } else {
            scratch.iter_mut().for_each(|x| *x = 0.0);
            masses(&dist, node, &grid.entries, &mut scratch);
            let total: f64 = scratch.iter().sum();
            if total > 0.0 {
                for (r, s) in row.iter_mut().zip(&scratch) {
                    *r += w * s / total;
                }
            } else {
                row[nearest_entry(node, &grid.entries, dist.mean())] += w;
            }
        }

        let mut d = subs.len();
        loop {
            if d == 0 {
                return Ok(());
            }
            d -= 1;
            k[d] += 1;
            if k[d] < subs[d].len() {
                break;
            }
            k[d] = 0;
        }
    }
}

/// Log-likelihood of an exact observation `v`: log pmf for integer-valued
/// families, log mass of the unit cell for continuous families on integer
/// nodes, log density otherwise. Distributions are truncated to the node's
/// support, so the result is renormalized by the mass inside it.
pub fn ln_likelihood(dist: &Distribution, node: &Node, v: f64) -> f64 {
    if let Distribution::Point(w) = *dist {
        return if points_match(w, v) { 0.0 } else { f64::NEG_INFINITY };
    }
    let [lo, hi] = node.support;
    let (raw, inside) = if dist.is_integer_valued() {
        (dist.ln_density(v), dist.mass(lo, hi))
    } else if node.kind == NodeKind::IntegerInterval {
        (dist.mass(v - 0.5, v + 0.5).ln(), dist.mass(lo - 0.5, hi + 0.5))
    } else {
        (dist.ln_density(v), dist.mass(lo, hi))
    };
    if inside > 0.0 {
        raw - inside.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `ln(e^a + e^b)` without overflow.
fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

fn nearest_entry(node: &Node, entries: &[Entry], v: f64) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, e) in entries.iter().enumerate() {
        let [lo, hi] = e.extent(node);
        let d = if v < lo {
            lo - v
        } else if v > hi {
            v - hi
        } else {
            0.0
        };
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Unnormalized mass the distribution assigns to each entry.
fn masses(dist: &Distribution, node: &Node, entries: &[Entry], out: &mut [f64]) {
    if let Distribution::Point(v) = *dist {
        out[point_entry(node, entries, v)] = 1.0;
        return;
    }
    let int_valued = dist.is_integer_valued();
    match entries[0] {
        Entry::State(_) => {
            for (k, e) in entries.iter().enumerate() {
                let Entry::State(s) = *e else { unreachable!() };
                out[k] = match node.kind {
                    NodeKind::Ranked => {
                        let [lo, hi] = node.ranked_interval(s);
                        dist.mass(lo, hi)
                    }
                    _ if int_valued => dist.mass(s as f64, s as f64),
                    _ => dist.mass(s as f64 - 0.5, s as f64 + 0.5),
                };
            }
        }
        Entry::Point(_) => {
            // Only deterministic nodes use multi-point grids.
            let v = dist.mean();
            out[point_entry(node, entries, v)] = 1.0;
        }
        Entry::Cell { .. } | Entry::Bin { .. } => {
            let [ea, eb] = dist.effective_range();
            let start = entries.partition_point(|e| upper(e) < ea);
            let last = entries.len() - 1;
            for k in start..entries.len() {
                let e = entries[k];
                let lo = lower(&e);
                if lo > eb {
                    break;
                }
                out[k] = match e {
                    Entry::Cell { lo, hi } if int_valued => {
                        let top = if k == last || hi.fract() != 0.0 { hi.floor() } else { hi - 1.0 };
                        dist.mass(lo, top)
                    }
                    Entry::Cell { lo, hi } => dist.mass(lo, hi),
                    Entry::Bin { lo, hi } if int_valued => dist.mass(lo, hi),
                    Entry::Bin { lo, hi } => dist.mass(lo - 0.5, hi + 0.5),
                    _ => unreachable!(),
                };
            }
        }
    }
}

fn lower(e: &Entry) -> f64 {
    match *e {
        Entry::Cell { lo, .. } | Entry::Bin { lo, .. } => lo,
        Entry::Point(v) => v,
        Entry::State(s) => s as f64,
    }
}

fn upper(e: &Entry) -> f64 {
    match *e {
        Entry::Cell { hi, .. } => hi,
        Entry::Bin { hi, .. } => hi + 0.5,
        Entry::Point(v) => v,
        Entry::State(s) => s as f64,
    }
}

/// Entry receiving a deterministic value; values outside the grid go to
/// the nearest end.
pub fn point_entry(node: &Node, entries: &[Entry], v: f64) -> usize {
    match entries[0] {
        Entry::State(_) => {
            let s = node.state_for_value(v);
            entries.iter().position(|e| *e == Entry::State(s)).unwrap_or(0)
        }
        Entry::Point(_) => {
            let mut best = (0, f64::INFINITY);
            for (k, e) in entries.iter().enumerate() {
                let Entry::Point(p) = *e else { unreachable!() };
                let d = (p - v).abs();
                if d < best.1 {
                    best = (k, d);
                }
            }
            best.0
        }
        Entry::Bin { .. } => {
            let r = v.round();
            let k = entries.partition_point(|e| matches!(*e, Entry::Bin { hi, .. } if hi < r));
            k.min(entries.len() - 1)
        }
        Entry::Cell { .. } => {
            let k = entries.partition_point(|e| matches!(*e, Entry::Cell { hi, .. } if hi <= v));
            k.min(entries.len() - 1)
        }
    }
}
