//! Complex-valued expressions in one real variable `x`.
//!
//! Grammar: numbers, `x`, `i`, `pi`, `e`, the operators `+ - * / ^`,
//! parentheses, and the functions `sin cos tan exp log sqrt abs sinh cosh
//! tanh re im conj step`. `step(t)` is 1 for `t >= 0` and 0 otherwise.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(C64),
    X,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sinh,
    Cosh,
    Tanh,
    Re,
    Im,
    Conj,
    Step,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "re" => Func::Re,
            "im" => Func::Im,
            "conj" => Func::Conj,
            "step" => Func::Step,
            _ => return None,
        })
    }

    fn apply(self, z: C64) -> C64 {
        match self {
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Tan => z.tan(),
            Func::Exp => z.exp(),
            Func::Log => z.ln(),
            Func::Sqrt => z.sqrt(),
            Func::Abs => C64::new(z.norm(), 0.0),
            Func::Sinh => z.sinh(),
            Func::Cosh => z.cosh(),
            Func::Tanh => z.tanh(),
            Func::Re => C64::new(z.re, 0.0),
            Func::Im => C64::new(z.im, 0.0),
            Func::Conj => z.conj(),
            Func::Step => C64::new(if z.re >= 0.0 { 1.0 } else { 0.0 }, 0.0),
        }
    }
}

/// A parsed expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    uses_step: bool,
    kinks: Vec<f64>,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos < p.tokens.len() {
            return Err(Error::Parse {
                pos: p.tokens[p.pos].1,
                msg: "unexpected trailing input".into(),
            });
        }
        let uses_step = src.contains("step") || src.contains("abs");
        let root = simplify(root);
        let mut kinks = Vec::new();
        collect_kinks(&root, &mut kinks);
        kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        kinks.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        Ok(Self {
            source: src.to_string(),
            root,
            uses_step,
            kinks,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64) -> C64 {
        eval(&self.root, x)
    }

    /// True when the expression is the constant zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.root, Node::Num(z) if z == C64::new(0.0, 0.0))
    }

    /// True when the expression may have kinks or jumps (uses `step` or `abs`).
    pub fn may_be_nonsmooth(&self) -> bool {
        self.uses_step
    }

    /// Points of `(0, pi)` where the argument of a `step` or `abs` changes sign.
    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }
}

const KINK_SAMPLES: usize = 4096;

fn collect_kinks(n: &Node, out: &mut Vec<f64>) {
    match n {
        Node::Neg(a) => collect_kinks(a, out),
        Node::Bin(_, a, b) => {
            collect_kinks(a, out);
            collect_kinks(b, out);
        }
        Node::Call(f, a) => {
            collect_kinks(a, out);
            if matches!(f, Func::Step | Func::Abs) {
                sign_changes(a, out);
            }
        }
        _ => {}
    }
}

fn sign_changes(arg: &Node, out: &mut Vec<f64>) {
    let pi = std::f64::consts::PI;
    let side = |x: f64| eval(arg, x).re >= 0.0;
    let mut prev = side(0.0);
    for k in 1..=KINK_SAMPLES {
        let x = pi * k as f64 / KINK_SAMPLES as f64;
        let cur = side(x);
        if cur != prev {
            let (mut a, mut b) = (pi * (k - 1) as f64 / KINK_SAMPLES as f64, x);
            while b - a > 1e-15 * b.max(1.0) {
                let m = 0.5 * (a + b);
                if side(m) == prev {
                    a = m;
                } else {
                    b = m;
                }
                if m == a && m == b {
                    break;
                }
            }
            if b > 0.0 && b < pi {
                out.push(b);
            }
        }
        prev = cur;
    }
}

fn eval(n: &Node, x: f64) -> C64 {
    match n {
        Node::Num(z) => *z,
        Node::X => C64::new(x, 0.0),
        Node::Neg(a) => -eval(a, x),
        Node::Bin(op, a, b) => {
            let (u, v) = (eval(a, x), eval(b, x));
            match op {
                Op::Add => u + v,
                Op::Sub => u - v,
                Op::Mul => u * v,
                Op::Div => u / v,
                Op::Pow => pow(u, v),
            }
        }
        Node::Call(f, a) => f.apply(eval(a, x)),
    }
}

fn pow(u: C64, v: C64) -> C64 {
    if v.im == 0.0 && v.re.fract() == 0.0 && v.re.abs() <= 64.0 {
        return u.powi(v.re as i32);
    }
    if u.im == 0.0 && u.re >= 0.0 && v.im == 0.0 {
        return C64::new(u.re.powf(v.re), 0.0);
    }
    u.powc(v)
}

fn simplify(n: Node) -> Node {
    match n {
        Node::Neg(a) => match simplify(*a) {
            Node::Num(z) => Node::Num(-z),
            a => Node::Neg(Box::new(a)),
        },
        Node::Bin(op, a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            if let (Node::Num(_), Node::Num(_)) = (&a, &b) {
                let folded = Node::Bin(op, Box::new(a), Box::new(b));
                return Node::Num(eval(&folded, 0.0));
            }
            Node::Bin(op, Box::new(a), Box::new(b))
        }
        Node::Call(f, a) => match simplify(*a) {
            Node::Num(z) => Node::Num(f.apply(z)),
            a => Node::Call(f, Box::new(a)),
        },
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                pos: start,
                msg: format!("bad number '{text}'"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^".contains(c) {
            if c == '*' && i + 1 < chars.len() && chars[i + 1] == '*' {
                out.push((Tok::Op('^'), i));
                i += 2;
            } else {
                out.push((Tok::Op(c), i));
                i += 1;
            }
        } else if c == '(' {
            out.push((Tok::LParen, i));
            i += 1;
        } else if c == ')' {
            out.push((Tok::RParen, i));
            i += 1;
        } else {
            return Err(Error::Parse {
                pos: i,
                msg: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.1)
            .unwrap_or_else(|| self.tokens.last().map(|t| t.1 + 1).unwrap_or(0))
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { Op::Add } else { Op::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { Op::Mul } else { Op::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let pos = self.here();
        let tok = self.peek().cloned().ok_or(Error::Parse {
            pos,
            msg: "unexpected end of expression".into(),
        })?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(C64::new(v, 0.0))),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Node::X),
                "i" | "I" => Ok(Node::Num(C64::new(0.0, 1.0))),
                "pi" | "PI" => Ok(Node::Num(C64::new(std::f64::consts::PI, 0.0))),
                "e" => Ok(Node::Num(C64::new(std::f64::consts::E, 0.0))),
                _ => {
                    let f = Func::lookup(&name).ok_or(Error::Parse {
                        pos,
                        msg: format!("unknown identifier '{name}'"),
                    })?;
                    if self.peek() != Some(&Tok::LParen) {
                        return Err(Error::Parse {
                            pos: self.here(),
                            msg: format!("expected '(' after {name}"),
                        });
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Node::Call(f, Box::new(arg)))
                }
            },
            _ => Err(Error::Parse {
                pos,
                msg: "expected a value".into(),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                pos: self.here(),
                msg: "expected ')'".into(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64) -> C64 {
        Expr::parse(s).unwrap().eval(x)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2*3", 0.0), C64::new(7.0, 0.0));
        assert_eq!(ev("-2^2", 0.0), C64::new(-4.0, 0.0));
        assert_eq!(ev("2^3^2", 0.0), C64::new(512.0, 0.0));
        assert!((ev("x^(-0.5)", 4.0) - C64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((ev("1e-3*x", 2.0) - C64::new(2e-3, 0.0)).norm() < 1e-18);
    }

    #[test]
    fn complex_values_and_functions() {
        let z = ev("exp(i*pi)", 0.0);
        assert!((z + 1.0).norm() < 1e-15);
        assert!((ev("0.3*cos(x) + 0.1*i", 0.0) - C64::new(0.3, 0.1)).norm() < 1e-15);
        assert_eq!(ev("step(x - 1)", 0.5), C64::new(0.0, 0.0));
        assert_eq!(ev("step(x - 1)", 1.0), C64::new(1.0, 0.0));
    }

    #[test]
    fn implicit_i_suffix_is_rejected() {
        assert!(Expr::parse("0.1i").is_err());
    }

    #[test]
    fn kinks_of_steps() {
        let e = Expr::parse("0.5*step(x-1) + abs(x-2)").unwrap();
        assert_eq!(e.kinks().len(), 2);
        assert!((e.kinks()[0] - 1.0).abs() < 1e-14);
        assert!((e.kinks()[1] - 2.0).abs() < 1e-14);
        assert!(Expr::parse("sin(x)").unwrap().kinks().is_empty());
    }

    #[test]
    fn zero_detection() {
        assert!(Expr::parse("0*x + 0").unwrap().is_zero() == false);
        assert!(Expr::parse("0").unwrap().is_zero());
        assert!(Expr::parse("2 - 2").unwrap().is_zero());
    }

    #[test]
    fn reports_position_of_errors() {
        match Expr::parse("sin(x") {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("foo(x)").is_err());
    }
}
