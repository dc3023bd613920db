//! Expression trees for node probability table definitions.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Eq => "==",
        }
    }

    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Le => a <= b,
            CmpOp::Lt => a < b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
            CmpOp::Eq => a == b,
        }
    }
}

/// Named distribution families available in expressions.
///
/// `Normal` and `TNormal` take a variance, not a standard deviation, as
/// their second argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistKind {
    Uniform,
    Normal,
    TNormal,
    Binomial,
    Exponential,
    Gamma,
    Arithmetic,
}

impl DistKind {
    pub fn name(self) -> &'static str {
        match self {
            DistKind::Uniform => "Uniform",
            DistKind::Normal => "Normal",
            DistKind::TNormal => "TNormal",
            DistKind::Binomial => "Binomial",
            DistKind::Exponential => "Exponential",
            DistKind::Gamma => "Gamma",
            DistKind::Arithmetic => "Arithmetic",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            DistKind::Uniform | DistKind::Normal | DistKind::Binomial | DistKind::Gamma => 2,
            DistKind::TNormal => 4,
            DistKind::Exponential | DistKind::Arithmetic => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "uniform" => DistKind::Uniform,
            "normal" => DistKind::Normal,
            "tnormal" => DistKind::TNormal,
            "binomial" => DistKind::Binomial,
            "exponential" => DistKind::Exponential,
            "gamma" => DistKind::Gamma,
            "arithmetic" => DistKind::Arithmetic,
            _ => return None,
        })
    }
}

/// Expression tree. `R` is the reference type: `String` for parsed text,
/// `usize` (parent slot) once bound to a node's parent list.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr<R = String> {
    Const(f64),
    Ref(R),
    Neg(Box<Expr<R>>),
    Binary(BinOp, Box<Expr<R>>, Box<Expr<R>>),
    Min(Vec<Expr<R>>),
    Max(Vec<Expr<R>>),
    /// `(weight, value)` pairs.
    WMean(Vec<(Expr<R>, Expr<R>)>),
    If(Box<Expr<R>>, Box<Expr<R>>, Box<Expr<R>>),
    Compare(CmpOp, Box<Expr<R>>, Box<Expr<R>>),
    Dist(DistKind, Vec<Expr<R>>),
}

impl<R> Expr<R> {
    pub fn binary(op: BinOp, lhs: Expr<R>, rhs: Expr<R>) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn compare(op: CmpOp, lhs: Expr<R>, rhs: Expr<R>) -> Self {
        Expr::Compare(op, Box::new(lhs), Box::new(rhs))
    }

    /// Rewrites every reference, failing on the first one `f` rejects.
    pub fn try_map_refs<S, E>(&self, f: &mut impl FnMut(&R) -> Result<S, E>) -> Result<Expr<S>, E> {
        Ok(match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Ref(r) => Expr::Ref(f(r)?),
            Expr::Neg(e) => Expr::Neg(Box::new(e.try_map_refs(f)?)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.try_map_refs(f)?, b.try_map_refs(f)?),
            Expr::Min(xs) => Expr::Min(map_all(xs, f)?),
            Expr::Max(xs) => Expr::Max(map_all(xs, f)?),
            Expr::WMean(pairs) => Expr::WMean(
                pairs
                    .iter()
                    .map(|(w, x)| Ok((w.try_map_refs(f)?, x.try_map_refs(f)?)))
                    .collect::<Result<_, E>>()?,
            ),
            Expr::If(c, t, e) => Expr::If(
                Box::new(c.try_map_refs(f)?),
                Box::new(t.try_map_refs(f)?),
                Box::new(e.try_map_refs(f)?),
            ),
            Expr::Compare(op, a, b) => Expr::compare(*op, a.try_map_refs(f)?, b.try_map_refs(f)?),
            Expr::Dist(kind, args) => Expr::Dist(*kind, map_all(args, f)?),
        })
    }

    pub fn visit_refs<'a>(&'a self, f: &mut impl FnMut(&'a R)) {
        match self {
            Expr::Const(_) => {}
            Expr::Ref(r) => f(r),
            Expr::Neg(e) => e.visit_refs(f),
            Expr::Binary(_, a, b) | Expr::Compare(_, a, b) => {
                a.visit_refs(f);
                b.visit_refs(f);
            }
            Expr::Min(xs) | Expr::Max(xs) | Expr::Dist(_, xs) => xs.iter().for_each(|x| x.visit_refs(f)),
            Expr::WMean(pairs) => pairs.iter().for_each(|(w, x)| {
                w.visit_refs(f);
                x.visit_refs(f);
            }),
            Expr::If(c, t, e) => {
                c.visit_refs(f);
                t.visit_refs(f);
                e.visit_refs(f);
            }
        }
    }

    /// True when the expression contains no stochastic distribution
    /// (an `Arithmetic(..)` wrapper counts as deterministic).
    pub fn is_deterministic(&self) -> bool {
        match self {
            Expr::Dist(DistKind::Arithmetic, args) => args.iter().all(Expr::is_deterministic),
            Expr::Dist(_, _) => false,
            Expr::Const(_) | Expr::Ref(_) => true,
            Expr::Neg(e) => e.is_deterministic(),
            Expr::Binary(_, a, b) | Expr::Compare(_, a, b) => a.is_deterministic() && b.is_deterministic(),
            Expr::Min(xs) | Expr::Max(xs) => xs.iter().all(Expr::is_deterministic),
            Expr::WMean(pairs) => pairs.iter().all(|(w, x)| w.is_deterministic() && x.is_deterministic()),
            Expr::If(c, t, e) => c.is_deterministic() && t.is_deterministic() && e.is_deterministic(),
        }
    }

    /// Distributions may appear only at the top level or as branches of a
    /// top-level `if`. Returns false for any other placement.
    pub fn has_valid_distribution_placement(&self) -> bool {
        match self {
            Expr::Dist(DistKind::Arithmetic, args) => args.iter().all(Expr::is_deterministic),
            Expr::Dist(_, args) => args.iter().all(Expr::is_deterministic),
            Expr::If(c, t, e) => {
                c.is_deterministic() && t.has_valid_distribution_placement() && e.has_valid_distribution_placement()
            }
            other => other.is_deterministic(),
        }
    }
}

fn map_all<R, S, E>(xs: &[Expr<R>], f: &mut impl FnMut(&R) -> Result<S, E>) -> Result<Vec<Expr<S>>, E> {
    xs.iter().map(|x| x.try_map_refs(f)).collect()
}

fn needs_parens<R>(e: &Expr<R>) -> bool {
    matches!(e, Expr::Binary(..) | Expr::Compare(..))
}

fn write_operand<R: fmt::Display>(f: &mut fmt::Formatter<'_>, e: &Expr<R>) -> fmt::Result {
    if needs_parens(e) {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn write_list<R: fmt::Display>(f: &mut fmt::Formatter<'_>, xs: &[Expr<R>]) -> fmt::Result {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // Shortest round-trip representation; very large or small magnitudes
    // switch to scientific notation to keep the text readable.
    let a = c.abs();
    if a != 0.0 && !(1e-6..1e15).contains(&a) {
        write!(f, "{c:e}")
    } else {
        write!(f, "{c}")
    }
}

/// Canonical text form. Parsing the output yields an equal tree.
impl<R: fmt::Display> fmt::Display for Expr<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_number(f, *c),
            Expr::Ref(r) => write!(f, "{r}"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Binary(op, a, b) => {
                write_operand(f, a)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, b)
            }
            Expr::Compare(op, a, b) => {
                write_operand(f, a)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, b)
            }
            Expr::Min(xs) => {
                f.write_str("min(")?;
                write_list(f, xs)?;
                f.write_str(")")
            }
            Expr::Max(xs) => {
                f.write_str("max(")?;
                write_list(f, xs)?;
                f.write_str(")")
            }
            Expr::WMean(pairs) => {
                f.write_str("wmean(")?;
                for (i, (w, x)) in pairs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{w}, {x}")?;
                }
                f.write_str(")")
            }
            Expr::If(c, t, e) => write!(f, "if({c}, {t}, {e})"),
            Expr::Dist(kind, args) => {
                write!(f, "{}(", kind.name())?;
                write_list(f, args)?;
                f.write_str(")")
            }
        }
    }
}
