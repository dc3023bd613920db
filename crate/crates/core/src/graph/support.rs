//! Interval arithmetic over expressions, used to derive finite supports
//! for numeric nodes from their parents' ranges.

use crate::expr::{BinOp, DistKind, Expr};

pub type Range = [f64; 2];

const ALL: Range = [f64::NEG_INFINITY, f64::INFINITY];

fn hull(a: Range, b: Range) -> Range {
    [a[0].min(b[0]), a[1].max(b[1])]
}

fn finite_or(x: f64, fallback: f64) -> f64 {
    if x.is_nan() {
        fallback
    } else {
        x
    }
}

fn mul(a: Range, b: Range) -> Range {
    let cands = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
    if cands.iter().any(|c| c.is_nan()) {
        // 0 * inf: be conservative.
        return ALL;
    }
    [cands.iter().copied().fold(f64::INFINITY, f64::min), cands.iter().copied().fold(f64::NEG_INFINITY, f64::max)]
}

fn div(a: Range, b: Range) -> Range {
    if b[0] <= 0.0 && b[1] >= 0.0 {
        if b[0] == 0.0 && b[1] > 0.0 && a[0] >= 0.0 {
            return [finite_or(a[0] / b[1], 0.0), f64::INFINITY];
        }
        return ALL;
    }
    mul(a, [1.0 / b[1], 1.0 / b[0]])
}

/// Range of a deterministic expression given the ranges of its parent slots.
pub fn value_range(e: &Expr<usize>, parents: &[Range]) -> Range {
    match e {
        Expr::Const(c) => [*c, *c],
        Expr::Ref(i) => parents[*i],
        Expr::Neg(x) => {
            let r = value_range(x, parents);
            [-r[1], -r[0]]
        }
        Expr::Binary(op, a, b) => {
            let (ra, rb) = (value_range(a, parents), value_range(b, parents));
            match op {
                BinOp::Add => [ra[0] + rb[0], ra[1] + rb[1]],
                BinOp::Sub => [ra[0] - rb[1], ra[1] - rb[0]],
                BinOp::Mul => mul(ra, rb),
                BinOp::Div => div(ra, rb),
            }
        }
        Expr::Min(xs) => xs.iter().map(|x| value_range(x, parents)).reduce(|a, b| [a[0].min(b[0]), a[1].min(b[1])]).unwrap(),
        Expr::Max(xs) => xs.iter().map(|x| value_range(x, parents)).reduce(|a, b| [a[0].max(b[0]), a[1].max(b[1])]).unwrap(),
        Expr::WMean(pairs) => {
            let weights_nonneg = pairs.iter().all(|(w, _)| value_range(w, parents)[0] >= 0.0);
            if !weights_nonneg {
                return ALL;
            }
            // A weighted mean with nonnegative weights stays within the hull of its values.
            pairs.iter().map(|(_, x)| value_range(x, parents)).reduce(hull).unwrap()
        }
        Expr::If(_, t, f) => hull(value_range(t, parents), value_range(f, parents)),
        Expr::Compare(..) => [0.0, 1.0],
        Expr::Dist(_, _) => support_range(e, parents),
    }
}

/// Support of the (possibly stochastic) expression.
pub fn support_range(e: &Expr<usize>, parents: &[Range]) -> Range {
    let arg = |i: usize, args: &[Expr<usize>]| value_range(&args[i], parents);
    match e {
        Expr::Dist(kind, args) => match kind {
            DistKind::Arithmetic => arg(0, args),
            DistKind::Uniform => [arg(0, args)[0], arg(1, args)[1]],
            DistKind::Normal => {
                let m = arg(0, args);
                let sd = arg(1, args)[1].max(0.0).sqrt();
                [m[0] - 6.0 * sd, m[1] + 6.0 * sd]
            }
            DistKind::TNormal => {
                let m = arg(0, args);
                let sd = arg(1, args)[1].max(0.0).sqrt();
                let (lo, hi) = (arg(2, args)[0], arg(3, args)[1]);
                [(m[0] - 6.0 * sd).max(lo).min(hi), (m[1] + 6.0 * sd).min(hi).max(lo)]
            }
            DistKind::Binomial => [0.0, arg(0, args)[1].floor().max(0.0)],
            DistKind::Exponential => {
                let r = arg(0, args)[0];
                [0.0, if r > 0.0 { 30.0 / r } else { f64::INFINITY }]
            }
            DistKind::Gamma => {
                let k = arg(0, args)[1];
                let r = arg(1, args)[0];
                [0.0, if r > 0.0 { (k + 12.0 * k.max(0.0).sqrt() + 12.0) / r } else { f64::INFINITY }]
            }
        },
        Expr::If(_, t, f) => hull(support_range(t, parents), support_range(f, parents)),
        other => value_range(other, parents),
    }
}
