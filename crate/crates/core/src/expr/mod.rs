//! Expression language for node probability tables.

mod ast;
pub mod dist;
mod eval;
mod parser;

pub use ast::{BinOp, CmpOp, DistKind, Expr};
pub use dist::{tnormal_moments, Distribution, ParameterDomainError, TruncatedNormal};
pub use eval::{evaluate_deterministic, interval_mass, sample_value, EvalError};
pub use parser::{parse_expression, ParseError};
