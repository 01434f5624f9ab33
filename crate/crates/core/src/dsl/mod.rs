//! Symbolic expressions for metric components and curve coordinates.
//!
//! Expressions are parsed once over a fixed list of coordinate names and are
//! immutable afterwards. They can be evaluated to a plain `f64` or to a
//! [`Dual`] carrying first partial derivatives with respect to every
//! coordinate.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := ['-'] atom ['^' exponent]
//! atom   := number | symbol | func '(' expr (',' expr)? ')' | '(' expr ')'
//! ```
//!
//! The exponent is a number, a negated number, or a parenthesised constant
//! expression such as `(1/2)`.

mod parser;
mod scalar;

use std::fmt;

use thiserror::Error;

pub use scalar::{Dual, Field};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("not differentiable: {0}")]
    NonDifferentiable(String),
    #[error("point has {got} coordinates, expected {expected}")]
    PointDimension { expected: usize, got: usize },
}

/// Built-in functions of one argument plus `min`/`max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Abs,
    Sgn,
    Sin,
    Cos,
    Tan,
    Arctan,
    Exp,
    Log,
    Min,
    Max,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sgn" => Func::Sgn,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "arctan" => Func::Arctan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sgn => "sgn",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Arctan => "arctan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    /// Index into the coordinate list.
    Sym(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, f64),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval<S: Field>(&self, vars: &[S]) -> Result<S, DslError> {
        Ok(match self {
            Node::Num(c) => S::constant(*c, vars),
            Node::Sym(i) => vars[*i].clone(),
            Node::Neg(a) => a.eval(vars)?.neg(),
            Node::Add(a, b) => a.eval(vars)?.add(&b.eval(vars)?),
            Node::Sub(a, b) => a.eval(vars)?.sub(&b.eval(vars)?),
            Node::Mul(a, b) => a.eval(vars)?.mul(&b.eval(vars)?),
            Node::Div(a, b) => a.eval(vars)?.div(&b.eval(vars)?)?,
            Node::Pow(a, p) => a.eval(vars)?.powf(*p)?,
            Node::Call(f, args) => {
                let x = args[0].eval(vars)?;
                match f {
                    Func::Sqrt => x.sqrt()?,
                    Func::Abs => x.abs()?,
                    Func::Sgn => x.sgn()?,
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan()?,
                    Func::Arctan => x.atan(),
                    Func::Exp => x.exp()?,
                    Func::Log => x.ln()?,
                    Func::Min => x.min(&args[1].eval(vars)?)?,
                    Func::Max => x.max(&args[1].eval(vars)?)?,
                }
            }
        })
    }

    fn uses_symbols(&self) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Sym(_) => true,
            Node::Neg(a) | Node::Pow(a, _) => a.uses_symbols(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.uses_symbols() || b.uses_symbols()
            }
            Node::Call(_, args) => args.iter().any(Node::uses_symbols),
        }
    }

    fn write(&self, names: &[String], out: &mut String) {
        match self {
            Node::Num(c) => {
                if *c < 0.0 {
                    out.push_str(&format!("(-{:?})", -c));
                } else {
                    out.push_str(&format!("{c:?}"));
                }
            }
            Node::Sym(i) => out.push_str(&names[*i]),
            Node::Neg(a) => {
                out.push_str("(-");
                a.write(names, out);
                out.push(')');
            }
            Node::Add(a, b) => binary(names, out, a, " + ", b),
            Node::Sub(a, b) => binary(names, out, a, " - ", b),
            Node::Mul(a, b) => binary(names, out, a, " * ", b),
            Node::Div(a, b) => binary(names, out, a, " / ", b),
            Node::Pow(a, p) => {
                if matches!(**a, Node::Pow(..)) {
                    out.push('(');
                    a.write(names, out);
                    out.push(')');
                } else {
                    a.write(names, out);
                }
                out.push_str(&format!("^({p:?})"));
            }
            Node::Call(f, args) => {
                out.push_str(f.name());
                out.push('(');
                for (k, arg) in args.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    arg.write(names, out);
                }
                out.push(')');
            }
        }
    }
}

fn binary(names: &[String], out: &mut String, a: &Node, op: &str, b: &Node) {
    out.push('(');
    a.write(names, out);
    out.push_str(op);
    b.write(names, out);
    out.push(')');
}

/// A parsed expression bound to its coordinate names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    coordinates: Vec<String>,
}

impl Expression {
    pub fn parse<S: AsRef<str>>(source: &str, coordinates: &[S]) -> Result<Self, DslError> {
        let coordinates: Vec<String> = coordinates.iter().map(|c| c.as_ref().to_string()).collect();
        let root = parser::parse(source, &coordinates)?;
        Ok(Expression { root, coordinates })
    }

    pub fn constant<S: AsRef<str>>(value: f64, coordinates: &[S]) -> Self {
        Expression { root: Node::Num(value), coordinates: coordinates.iter().map(|c| c.as_ref().to_string()).collect() }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    /// True when the tree is the literal zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.root, Node::Num(c) if c == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        !self.root.uses_symbols()
    }

    fn check_point(&self, point: &[f64]) -> Result<(), DslError> {
        if point.len() != self.coordinates.len() {
            return Err(DslError::PointDimension { expected: self.coordinates.len(), got: point.len() });
        }
        Ok(())
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64, DslError> {
        self.check_point(point)?;
        self.root.eval(point)
    }

    /// Value and all first partials at `point`.
    pub fn evaluate_with_gradient(&self, point: &[f64]) -> Result<Dual, DslError> {
        self.check_point(point)?;
        let vars = Dual::variables(point);
        self.root.eval(&vars)
    }

    /// Evaluates over caller-supplied dual variables, which may be seeded
    /// along arbitrary directions.
    pub fn evaluate_dual(&self, vars: &[Dual]) -> Result<Dual, DslError> {
        if vars.len() != self.coordinates.len() {
            return Err(DslError::PointDimension { expected: self.coordinates.len(), got: vars.len() });
        }
        self.root.eval(vars)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.root.write(&self.coordinates, &mut out);
        f.write_str(&out)
    }
}

pub fn parse<S: AsRef<str>>(source: &str, coordinates: &[S]) -> Result<Expression, DslError> {
    Expression::parse(source, coordinates)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TX: [&str; 2] = ["t", "x"];

    fn central_difference(e: &Expression, p: &[f64], k: usize, h: f64) -> f64 {
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[k] += h;
        b[k] -= h;
        (e.evaluate(&a).unwrap() - e.evaluate(&b).unwrap()) / (2.0 * h)
    }

    #[test]
    fn symbol_and_negation() {
        assert_eq!(parse("t", &TX).unwrap().root(), &Node::Sym(0));
        assert_eq!(parse("-t", &TX).unwrap().root(), &Node::Neg(Box::new(Node::Sym(0))));
    }

    #[test]
    fn toy_curve_tree() {
        let e = parse("(2/3)*sqrt(abs(t)^3)*sgn(t)", &TX).unwrap();
        let expected = Node::Mul(
            Box::new(Node::Mul(
                Box::new(Node::Div(Box::new(Node::Num(2.0)), Box::new(Node::Num(3.0)))),
                Box::new(Node::Call(
                    Func::Sqrt,
                    vec![Node::Pow(Box::new(Node::Call(Func::Abs, vec![Node::Sym(0)])), 3.0)],
                )),
            )),
            Box::new(Node::Call(Func::Sgn, vec![Node::Sym(0)])),
        );
        assert_eq!(e.root(), &expected);
        // direct arithmetic: (2/3) * sqrt(1) * 1
        assert!((e.evaluate(&[1.0, 0.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(parse("t", &TX).unwrap().evaluate(&[-1.0, 0.0]).unwrap(), -1.0);
        assert_eq!(parse("abs(t)^(1/2)", &TX).unwrap().evaluate(&[-4.0, 0.0]).unwrap(), 2.0);
        assert_eq!(parse("sgn(t)", &TX).unwrap().evaluate(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(parse("abs(t)", &TX).unwrap().evaluate(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(parse("min(t, x) + max(t, x)", &TX).unwrap().evaluate(&[2.0, 5.0]).unwrap(), 7.0);
        assert_eq!(parse("2*-3", &TX).unwrap().evaluate(&[0.0, 0.0]).unwrap(), -6.0);
        assert_eq!(parse("-t^2", &TX).unwrap().evaluate(&[3.0, 0.0]).unwrap(), -9.0);
        assert_eq!(parse("1e-3*1.5E2", &TX).unwrap().evaluate(&[0.0, 0.0]).unwrap(), 0.15);
    }

    #[test]
    fn gradient_examples() {
        let d = parse("-t", &TX).unwrap().evaluate_with_gradient(&[2.0, 0.0]).unwrap();
        assert_eq!((d.value, d.partials.as_slice()), (-2.0, &[-1.0, 0.0][..]));
        let d = parse("t*x", &TX).unwrap().evaluate_with_gradient(&[3.0, 5.0]).unwrap();
        assert_eq!((d.value, d.partials.as_slice()), (15.0, &[5.0, 3.0][..]));
        let e = parse("sqrt(abs(t))", &TX).unwrap();
        let d = e.evaluate_with_gradient(&[4.0, 0.0]).unwrap();
        let fd = central_difference(&e, &[4.0, 0.0], 0, 1e-5);
        assert!((fd - 0.25).abs() < 1e-9);
        assert_eq!(d.value, 2.0);
        assert!((d.partials[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("t + * x", &TX) {
            Err(DslError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("(t", &TX), Err(DslError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("t x", &TX), Err(DslError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("t^x", &TX), Err(DslError::Syntax { .. })));
        assert!(matches!(parse("min(t)", &TX), Err(DslError::Syntax { .. })));
        assert!(matches!(parse("sqrt(t, x)", &TX), Err(DslError::Syntax { .. })));
        assert!(matches!(parse("t^2^2", &TX), Err(DslError::Syntax { .. })));
        assert!(matches!(parse("", &TX), Err(DslError::Syntax { offset: 0, .. })));
        assert!(matches!(parse("t # x", &TX), Err(DslError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn unknown_identifiers_rejected() {
        assert_eq!(parse("t + y", &TX), Err(DslError::UnknownSymbol("y".into())));
        assert_eq!(parse("cosh(t)", &TX), Err(DslError::UnknownSymbol("cosh".into())));
    }

    #[test]
    fn domain_errors() {
        let p = [0.0, -1.0];
        assert!(matches!(parse("log(x)", &TX).unwrap().evaluate(&p), Err(DslError::Domain(_))));
        assert!(matches!(parse("1/t", &TX).unwrap().evaluate(&p), Err(DslError::Domain(_))));
        assert!(matches!(parse("sqrt(x)", &TX).unwrap().evaluate(&p), Err(DslError::Domain(_))));
        assert!(matches!(parse("x^(0.5)", &TX).unwrap().evaluate(&p), Err(DslError::Domain(_))));
        assert!(matches!(parse("exp(1000)", &TX).unwrap().evaluate(&p), Err(DslError::Domain(_))));
        assert_eq!(parse("x^3", &TX).unwrap().evaluate(&p).unwrap(), -1.0);
    }

    #[test]
    fn kinks_refuse_derivatives() {
        let at_zero = [0.0, 1.0];
        for src in ["abs(t)", "sgn(t)", "sqrt(t)", "abs(t)^(0.5)", "min(t, 0)"] {
            let e = parse(src, &TX).unwrap();
            assert!(e.evaluate(&at_zero).is_ok(), "{src}");
            assert!(matches!(e.evaluate_with_gradient(&at_zero), Err(DslError::NonDifferentiable(_))), "{src}");
        }
        // No derivative is requested through the kink when the argument is constant.
        let d = parse("abs(x - 1) + t", &TX).unwrap().evaluate_with_gradient(&[0.5, 2.0]).unwrap();
        assert_eq!(d.partials, vec![1.0, 1.0]);
        let d = parse("abs(0) * x", &TX).unwrap().evaluate_with_gradient(&at_zero).unwrap();
        assert_eq!(d.partials, vec![0.0, 0.0]);
    }

    #[test]
    fn printing_round_trips() {
        for src in [
            "-t",
            "(2/3)*sqrt(abs(t)^3)*sgn(t)",
            "-t^2 + x^(-0.5) * min(t, -x)",
            "arctan((2/3)*sqrt(abs(t)^3)*sgn(t))",
            "(1 + t^2/4)^2",
            "exp(-x)/log(2 + t) - tan(cos(sin(t)))",
            "1e-12*t",
        ] {
            let first = parse(src, &TX).unwrap();
            let printed = first.to_string();
            let second = parse(&printed, &TX).unwrap();
            assert_eq!(first, second, "{src} -> {printed}");
            assert_eq!(printed, second.to_string());
        }
    }

    #[test]
    fn point_dimension_checked() {
        let e = parse("t", &TX).unwrap();
        assert_eq!(e.evaluate(&[1.0]), Err(DslError::PointDimension { expected: 2, got: 1 }));
    }
}
