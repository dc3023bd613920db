//! Recursive-descent parser for the NPT expression grammar.
//!
//! ```text
//! expr    := additive (("<=" | "<" | ">=" | ">" | "==") additive)?
//! additive:= term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | primary
//! primary := number | ident | ident "(" args ")" | "(" expr ")"
//! ```
//! Function names are case-insensitive.

use super::ast::{BinOp, CmpOp, DistKind, Expr};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown function '{name}' at position {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("function '{name}' expects {expected} argument(s), found {found}")]
    Arity { name: String, expected: String, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(text: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src: text.as_bytes(), pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let two = self.src.get(self.pos..self.pos + 2);
        let tok = match c {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'+' => Tok::Op("+"),
            b'-' => Tok::Op("-"),
            b'*' => Tok::Op("*"),
            b'/' => Tok::Op("/"),
            b'<' | b'>' | b'=' => {
                let op = match two {
                    Some(b"<=") => "<=",
                    Some(b">=") => ">=",
                    Some(b"==") => "==",
                    _ if c == b'<' => "<",
                    _ if c == b'>' => ">",
                    _ => {
                        return Err(ParseError::Syntax { pos: start, message: "expected '=='".into() });
                    }
                };
                self.pos += op.len();
                return Ok((Tok::Op(op), start));
            }
            b'0'..=b'9' | b'.' => return self.number(start),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
                {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
                return Ok((Tok::Ident(ident), start));
            }
            other => {
                return Err(ParseError::Syntax {
                    pos: start,
                    message: format!("unexpected character '{}'", other as char),
                })
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.src.get(lx.pos).is_some_and(u8::is_ascii_digit) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(ParseError::Syntax { pos: start, message: "malformed number".into() });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(ParseError::Syntax { pos: save, message: "malformed exponent".into() });
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value = text
            .parse::<f64>()
            .map_err(|_| ParseError::Syntax { pos: start, message: format!("malformed number '{text}'") })?;
        Ok((Tok::Num(value), start))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            Tok::Num(n) => format!("number {n}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Op(o) => format!("'{o}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
        };
        ParseError::Syntax { pos: self.pos(), message: format!("expected {what}, found {found}") }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Op("<=") => CmpOp::Le,
            Tok::Op("<") => CmpOp::Lt,
            Tok::Op(">=") => CmpOp::Ge,
            Tok::Op(">") => CmpOp::Gt,
            Tok::Op("==") => CmpOp::Eq,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        Ok(Expr::compare(op, lhs, rhs))
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op("-") {
            self.bump();
            // A minus directly on a literal folds into a negative constant.
            if let Tok::Num(n) = *self.peek() {
                self.bump();
                return Ok(Expr::Const(-n));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(n) => Ok(Expr::Const(n)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() != Tok::LParen {
                    return Ok(Expr::Ref(name));
                }
                self.bump();
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        args.push(self.expr()?);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, "',' or ')'")?;
                call(name, pos, args)
            }
            _ => {
                self.at = self.at.saturating_sub(1);
                Err(self.unexpected("an expression"))
            }
        }
    }
}

fn call(name: String, pos: usize, mut args: Vec<Expr>) -> Result<Expr, ParseError> {
    let arity = |expected: &str, ok: bool, found: usize, name: &str| {
        if ok {
            Ok(())
        } else {
            Err(ParseError::Arity { name: name.to_string(), expected: expected.to_string(), found })
        }
    };
    let n = args.len();
    match name.to_ascii_lowercase().as_str() {
        "min" => {
            arity("at least 2", n >= 2, n, &name)?;
            Ok(Expr::Min(args))
        }
        "max" => {
            arity("at least 2", n >= 2, n, &name)?;
            Ok(Expr::Max(args))
        }
        "wmean" => {
            arity("an even number (at least 2)", n >= 2 && n % 2 == 0, n, &name)?;
            let mut pairs = Vec::with_capacity(n / 2);
            let mut it = args.into_iter();
            while let (Some(w), Some(x)) = (it.next(), it.next()) {
                pairs.push((w, x));
            }
            Ok(Expr::WMean(pairs))
        }
        "if" => {
            arity("3", n == 3, n, &name)?;
            let e = args.pop().unwrap();
            let t = args.pop().unwrap();
            let c = args.pop().unwrap();
            Ok(Expr::If(Box::new(c), Box::new(t), Box::new(e)))
        }
        _ => match DistKind::from_name(&name) {
            Some(kind) => {
                arity(&kind.arity().to_string(), n == kind.arity(), n, &name)?;
                Ok(Expr::Dist(kind, args))
            }
            None => Err(ParseError::UnknownFunction { name, pos }),
        },
    }
}

/// Parses expression text into an AST.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser { toks, at: 0 };
    if *p.peek() == Tok::End {
        return Err(ParseError::Syntax { pos: 0, message: "empty expression".into() });
    }
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Expr {
        Expr::Ref(s.to_string())
    }

    #[test]
    fn binomial_call_with_two_refs() {
        let e = parse_expression("Binomial(demands, p)").unwrap();
        assert_eq!(e, Expr::Dist(DistKind::Binomial, vec![r("demands"), r("p")]));
    }

    #[test]
    fn wmean_pairs() {
        let e = parse_expression("wmean(1.0, a, 1.0, b)").unwrap();
        assert_eq!(e, Expr::WMean(vec![(Expr::Const(1.0), r("a")), (Expr::Const(1.0), r("b"))]));
    }

    #[test]
    fn nested_min_arithmetic() {
        let e = parse_expression("min(1.0, 100.0*(major + 0.5*minor))").unwrap();
        let inner = Expr::binary(
            BinOp::Mul,
            Expr::Const(100.0),
            Expr::binary(BinOp::Add, r("major"), Expr::binary(BinOp::Mul, Expr::Const(0.5), r("minor"))),
        );
        assert_eq!(e, Expr::Min(vec![Expr::Const(1.0), inner]));
    }

    #[test]
    fn case_insensitive_names_and_scientific_numbers() {
        let e = parse_expression("TNORMAL(0.01, 1E-4, 0, 1e9)").unwrap();
        assert_eq!(
            e,
            Expr::Dist(
                DistKind::TNormal,
                vec![Expr::Const(0.01), Expr::Const(1e-4), Expr::Const(0.0), Expr::Const(1e9)]
            )
        );
    }

    #[test]
    fn precedence_and_left_associativity() {
        let e = parse_expression("a - b - c * d").unwrap();
        let lhs = Expr::binary(BinOp::Sub, r("a"), r("b"));
        assert_eq!(e, Expr::binary(BinOp::Sub, lhs, Expr::binary(BinOp::Mul, r("c"), r("d"))));
    }

    #[test]
    fn comparison_is_lowest_precedence() {
        let e = parse_expression("a + 1 <= r").unwrap();
        assert_eq!(e, Expr::compare(CmpOp::Le, Expr::binary(BinOp::Add, r("a"), Expr::Const(1.0)), r("r")));
    }

    #[test]
    fn errors_carry_positions() {
        match parse_expression("Normal(a, )") {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, 10),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expression("Weibull(1, 2)"), Err(ParseError::UnknownFunction { .. })));
        assert!(matches!(parse_expression("Normal(1)"), Err(ParseError::Arity { .. })));
        assert!(matches!(parse_expression("wmean(1, a, 2)"), Err(ParseError::Arity { .. })));
        assert!(matches!(parse_expression(""), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_expression("a b"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_expression("1e"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_expression("a = b"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn pretty_print_round_trips_table_expressions() {
        for text in [
            "TNormal(wmean(1.0,rework_process,1.0,rework_effort), 0.001, 0, 1)",
            "Normal(max(0, tne*0.8), 1E-4*tne)",
            "Arithmetic((1 - C) * E)",
            "if(a <= b, 1, 0)",
            "-(a + b) * -2",
            "Normal(pdf * 1.25, 1E-4)",
            "Uniform(0, 1E9)",
        ] {
            let ast = parse_expression(text).unwrap();
            let printed = ast.to_string();
            assert_eq!(parse_expression(&printed).unwrap(), ast, "{text} -> {printed}");
        }
    }
}
