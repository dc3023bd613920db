//! Deterministic evaluation and distribution concretization.

use std::collections::HashMap;

use thiserror::Error;

use super::ast::{BinOp, DistKind, Expr};
use super::dist::{Distribution, ParameterDomainError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivideByZero,
    #[error("no value for parent '{0}'")]
    MissingParentValue(String),
    #[error("expression contains a stochastic distribution ({0}); not deterministic")]
    NotDeterministic(&'static str),
    #[error(transparent)]
    Domain(#[from] ParameterDomainError),
}

impl<R> Expr<R> {
    /// Evaluates a deterministic expression; `lookup` supplies parent values.
    pub fn eval_with(&self, lookup: &mut impl FnMut(&R) -> Result<f64, EvalError>) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Ref(r) => lookup(r)?,
            Expr::Neg(e) => -e.eval_with(lookup)?,
            Expr::Binary(op, a, b) => {
                let x = a.eval_with(lookup)?;
                let y = b.eval_with(lookup)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::DivideByZero);
                        }
                        x / y
                    }
                }
            }
            Expr::Min(xs) => fold(xs, lookup, f64::min)?,
            Expr::Max(xs) => fold(xs, lookup, f64::max)?,
            Expr::WMean(pairs) => {
                let (mut num, mut den) = (0.0, 0.0);
                for (w, x) in pairs {
                    let w = w.eval_with(lookup)?;
                    num += w * x.eval_with(lookup)?;
                    den += w;
                }
                if den == 0.0 {
                    return Err(EvalError::DivideByZero);
                }
                num / den
            }
            Expr::If(c, t, e) => {
                if c.eval_with(lookup)? != 0.0 {
                    t.eval_with(lookup)?
                } else {
                    e.eval_with(lookup)?
                }
            }
            Expr::Compare(op, a, b) => {
                let x = a.eval_with(lookup)?;
                let y = b.eval_with(lookup)?;
                if op.holds(x, y) {
                    1.0
                } else {
                    0.0
                }
            }
            Expr::Dist(DistKind::Arithmetic, args) => args[0].eval_with(lookup)?,
            Expr::Dist(kind, _) => return Err(EvalError::NotDeterministic(kind.name())),
        })
    }

    /// Substitutes parent values and returns the resulting distribution.
    /// Deterministic expressions become point masses.
    pub fn concretize(&self, lookup: &mut impl FnMut(&R) -> Result<f64, EvalError>) -> Result<Distribution, EvalError> {
        match self {
            Expr::Dist(DistKind::Arithmetic, args) => Ok(Distribution::Point(args[0].eval_with(lookup)?)),
            Expr::Dist(kind, args) => {
                let params = args.iter().map(|a| a.eval_with(lookup)).collect::<Result<Vec<_>, _>>()?;
                Ok(Distribution::from_params(*kind, &params)?)
            }
            Expr::If(c, t, e) => {
                if c.eval_with(lookup)? != 0.0 {
                    t.concretize(lookup)
                } else {
                    e.concretize(lookup)
                }
            }
            other => Ok(Distribution::Point(other.eval_with(lookup)?)),
        }
    }
}

fn fold<R>(
    xs: &[Expr<R>],
    lookup: &mut impl FnMut(&R) -> Result<f64, EvalError>,
    f: fn(f64, f64) -> f64,
) -> Result<f64, EvalError> {
    let mut acc = xs[0].eval_with(lookup)?;
    for x in &xs[1..] {
        acc = f(acc, x.eval_with(lookup)?);
    }
    Ok(acc)
}

/// Evaluates a deterministic expression against a name → value map.
pub fn evaluate_deterministic(ast: &Expr, assignment: &HashMap<String, f64>) -> Result<f64, EvalError> {
    ast.eval_with(&mut |name: &String| {
        assignment.get(name).copied().ok_or_else(|| EvalError::MissingParentValue(name.clone()))
    })
}

/// Substitutes parents and draws one value. `Arithmetic(e)` returns the
/// deterministic value of `e`.
pub fn sample_value<G: rand::Rng + ?Sized>(
    ast: &Expr,
    assignment: &HashMap<String, f64>,
    rng: &mut G,
) -> Result<f64, EvalError> {
    let dist = ast.concretize(&mut |name: &String| {
        assignment.get(name).copied().ok_or_else(|| EvalError::MissingParentValue(name.clone()))
    })?;
    Ok(dist.sample(rng))
}

/// `P(a <= X < b)` for the substituted distribution (inclusive `[a, b]` for
/// integer-valued families); deterministic expressions give indicator mass.
pub fn interval_mass(ast: &Expr, assignment: &HashMap<String, f64>, interval: [f64; 2]) -> Result<f64, EvalError> {
    let dist = ast.concretize(&mut |name: &String| {
        assignment.get(name).copied().ok_or_else(|| EvalError::MissingParentValue(name.clone()))
    })?;
    Ok(dist.mass(interval[0], interval[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn env(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn residual_risk_formula() {
        let e = parse_expression("(1 - C) * E").unwrap();
        let v = evaluate_deterministic(&e, &env(&[("C", 0.5), ("E", 0.08)])).unwrap();
        assert!((v - 0.04).abs() < 1e-15);
    }

    #[test]
    fn injury_probability_product() {
        let e = parse_expression("Arithmetic(ph * pih)").unwrap();
        let v = evaluate_deterministic(&e, &env(&[("ph", 0.18), ("pih", 0.08)])).unwrap();
        assert!((v - 0.0144).abs() < 1e-15);
    }

    #[test]
    fn wmean_of_equal_values() {
        let e = parse_expression("wmean(1, x, 1, y)").unwrap();
        assert_eq!(evaluate_deterministic(&e, &env(&[("x", 0.1), ("y", 0.1)])).unwrap(), 0.1);
    }

    #[test]
    fn errors() {
        let e = parse_expression("a / b").unwrap();
        assert_eq!(evaluate_deterministic(&e, &env(&[("a", 1.0), ("b", 0.0)])), Err(EvalError::DivideByZero));
        assert_eq!(
            evaluate_deterministic(&e, &env(&[("a", 1.0)])),
            Err(EvalError::MissingParentValue("b".into()))
        );
        let d = parse_expression("Normal(0, 1)").unwrap();
        assert!(matches!(evaluate_deterministic(&d, &env(&[])), Err(EvalError::NotDeterministic(_))));
    }

    #[test]
    fn comparisons_and_if() {
        let e = parse_expression("if(a <= r, 2, 3)").unwrap();
        assert_eq!(evaluate_deterministic(&e, &env(&[("a", 0.1), ("r", 0.2)])).unwrap(), 2.0);
        assert_eq!(evaluate_deterministic(&e, &env(&[("a", 0.3), ("r", 0.2)])).unwrap(), 3.0);
    }

    #[test]
    fn binomial_point_mass_in_interval() {
        let e = parse_expression("Binomial(1000, 0.01)").unwrap();
        let m = interval_mass(&e, &env(&[]), [10.0, 10.0]).unwrap();
        // C(1000,10) 0.01^10 0.99^990, evaluated in log space independently.
        let ln_c: f64 = (0..10).map(|i| ((1000 - i) as f64).ln() - ((i + 1) as f64).ln()).sum();
        let oracle = (ln_c + 10.0 * 0.01f64.ln() + 990.0 * 0.99f64.ln()).exp();
        assert!((m - oracle).abs() < 1e-12, "{m} vs {oracle}");
    }

    #[test]
    fn exponential_mass_first_ten_hours() {
        let e = parse_expression("Exponential(0.01)").unwrap();
        let m = interval_mass(&e, &env(&[]), [0.0, 10.0]).unwrap();
        assert!((m - (1.0 - (-0.1f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn arithmetic_is_indicator() {
        let e = parse_expression("Arithmetic(x * 2)").unwrap();
        assert_eq!(interval_mass(&e, &env(&[("x", 1.0)]), [1.5, 2.5]).unwrap(), 1.0);
        assert_eq!(interval_mass(&e, &env(&[("x", 1.0)]), [2.5, 3.5]).unwrap(), 0.0);
    }
}
