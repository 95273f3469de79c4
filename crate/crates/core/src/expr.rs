//! Small arithmetic expression language used by scenario files: initial
//! conditions `f(x, y)`, slab profiles `B(x)` and finite-dimensional model
//! entries `J_ij(z)`, `H(z, theta)`.
//!
//! Expressions are parsed against a fixed list of variable names and can be
//! differentiated symbolically, which the finite-dimensional Poisson checks
//! rely on.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Tanh => v.tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression over a fixed, ordered set of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vec<String>,
    source: String,
}

impl Expr {
    pub fn parse(source: &str, vars: &[&str]) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            vars,
        };
        let root = parser.expr()?;
        if parser.pos != tokens.len() {
            return Err(Error::Expr(format!(
                "unexpected trailing input in `{source}` at token {}",
                parser.pos
            )));
        }
        Ok(Self {
            root,
            vars: vars.iter().map(|s| s.to_string()).collect(),
            source: source.to_string(),
        })
    }

    pub fn constant(value: f64, vars: &[&str]) -> Self {
        Self {
            root: Node::Const(value),
            vars: vars.iter().map(|s| s.to_string()).collect(),
            source: format!("{value}"),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Evaluates the expression; `args` follows the variable order given to
    /// [`Expr::parse`].
    pub fn eval(&self, args: &[f64]) -> f64 {
        debug_assert_eq!(args.len(), self.vars.len());
        eval(&self.root, args)
    }

    /// True if the expression mentions variable `index`.
    pub fn depends_on(&self, index: usize) -> bool {
        mentions(&self.root, index)
    }

    /// Symbolic partial derivative with respect to variable `index`.
    pub fn diff(&self, index: usize) -> Expr {
        let root = simplify(diff(&self.root, index));
        Expr {
            source: format!("d({})/d{}", self.source, self.vars[index]),
            root,
            vars: self.vars.clone(),
        }
    }

    /// True if the expression is identically the constant zero after
    /// simplification.
    pub fn is_zero(&self) -> bool {
        matches!(self.root, Node::Const(c) if c == 0.0)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn eval(node: &Node, args: &[f64]) -> f64 {
    match node {
        Node::Const(c) => *c,
        Node::Var(i) => args[*i],
        Node::Neg(a) => -eval(a, args),
        Node::Add(a, b) => eval(a, args) + eval(b, args),
        Node::Sub(a, b) => eval(a, args) - eval(b, args),
        Node::Mul(a, b) => eval(a, args) * eval(b, args),
        Node::Div(a, b) => eval(a, args) / eval(b, args),
        Node::Pow(a, b) => {
            let base = eval(a, args);
            match b.as_ref() {
                Node::Const(e) if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 => {
                    base.powi(*e as i32)
                }
                _ => base.powf(eval(b, args)),
            }
        }
        Node::Call(func, a) => func.apply(eval(a, args)),
    }
}

fn mentions(node: &Node, index: usize) -> bool {
    match node {
        Node::Const(_) => false,
        Node::Var(i) => *i == index,
        Node::Neg(a) | Node::Call(_, a) => mentions(a, index),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            mentions(a, index) || mentions(b, index)
        }
    }
}

fn c(v: f64) -> Box<Node> {
    Box::new(Node::Const(v))
}

fn b(n: Node) -> Box<Node> {
    Box::new(n)
}

fn diff(node: &Node, k: usize) -> Node {
    match node {
        Node::Const(_) => Node::Const(0.0),
        Node::Var(i) => Node::Const(if *i == k { 1.0 } else { 0.0 }),
        Node::Neg(a) => Node::Neg(b(diff(a, k))),
        Node::Add(a, bb) => Node::Add(b(diff(a, k)), b(diff(bb, k))),
        Node::Sub(a, bb) => Node::Sub(b(diff(a, k)), b(diff(bb, k))),
        Node::Mul(a, bb) => Node::Add(
            b(Node::Mul(b(diff(a, k)), bb.clone())),
            b(Node::Mul(a.clone(), b(diff(bb, k)))),
        ),
        Node::Div(a, bb) => Node::Div(
            b(Node::Sub(
                b(Node::Mul(b(diff(a, k)), bb.clone())),
                b(Node::Mul(a.clone(), b(diff(bb, k)))),
            )),
            b(Node::Pow(bb.clone(), c(2.0))),
        ),
        Node::Pow(base, exp) => {
            if !mentions(exp, k) {
                // d(u^n) = n u^(n-1) u'
                Node::Mul(
                    b(Node::Mul(
                        exp.clone(),
                        b(Node::Pow(base.clone(), b(Node::Sub(exp.clone(), c(1.0))))),
                    )),
                    b(diff(base, k)),
                )
            } else {
                // d(u^v) = u^v (v' ln u + v u'/u)
                Node::Mul(
                    b(node.clone()),
                    b(Node::Add(
                        b(Node::Mul(b(diff(exp, k)), b(Node::Call(Func::Ln, base.clone())))),
                        b(Node::Div(b(Node::Mul(exp.clone(), b(diff(base, k)))), base.clone())),
                    )),
                )
            }
        }
        Node::Call(func, a) => {
            let inner = diff(a, k);
            let outer = match func {
                Func::Sin => Node::Call(Func::Cos, a.clone()),
                Func::Cos => Node::Neg(b(Node::Call(Func::Sin, a.clone()))),
                Func::Tan => Node::Div(
                    c(1.0),
                    b(Node::Pow(b(Node::Call(Func::Cos, a.clone())), c(2.0))),
                ),
                Func::Exp => Node::Call(Func::Exp, a.clone()),
                Func::Ln => Node::Div(c(1.0), a.clone()),
                Func::Sqrt => Node::Div(c(0.5), b(Node::Call(Func::Sqrt, a.clone()))),
                Func::Sinh => Node::Call(Func::Cosh, a.clone()),
                Func::Cosh => Node::Call(Func::Sinh, a.clone()),
                Func::Tanh => Node::Sub(
                    c(1.0),
                    b(Node::Pow(b(Node::Call(Func::Tanh, a.clone())), c(2.0))),
                ),
            };
            Node::Mul(b(outer), b(inner))
        }
    }
}

/// Constant folding and removal of additive/multiplicative identities. Keeps
/// derivative trees from growing without bound and makes `is_zero` useful.
fn simplify(node: Node) -> Node {
    use Node::*;
    match node {
        Neg(a) => match simplify(*a) {
            Const(v) => Const(-v),
            Neg(inner) => *inner,
            other => Neg(b(other)),
        },
        Add(x, y) => match (simplify(*x), simplify(*y)) {
            (Const(p), Const(q)) => Const(p + q),
            (Const(z), other) | (other, Const(z)) if z == 0.0 => other,
            (p, q) => Add(b(p), b(q)),
        },
        Sub(x, y) => match (simplify(*x), simplify(*y)) {
            (Const(p), Const(q)) => Const(p - q),
            (p, Const(z)) if z == 0.0 => p,
            (Const(z), q) if z == 0.0 => Neg(b(q)),
            (p, q) => Sub(b(p), b(q)),
        },
        Mul(x, y) => match (simplify(*x), simplify(*y)) {
            (Const(p), Const(q)) => Const(p * q),
            (Const(z), _) | (_, Const(z)) if z == 0.0 => Const(0.0),
            (Const(o), other) | (other, Const(o)) if o == 1.0 => other,
            (p, q) => Mul(b(p), b(q)),
        },
        Div(x, y) => match (simplify(*x), simplify(*y)) {
            (Const(p), Const(q)) if q != 0.0 => Const(p / q),
            (Const(z), _) if z == 0.0 => Const(0.0),
            (p, Const(o)) if o == 1.0 => p,
            (p, q) => Div(b(p), b(q)),
        },
        Pow(x, y) => match (simplify(*x), simplify(*y)) {
            (Const(p), Const(q)) => Const(p.powf(q)),
            (_, Const(z)) if z == 0.0 => Const(1.0),
            (p, Const(o)) if o == 1.0 => p,
            (p, q) => Pow(b(p), b(q)),
        },
        Call(f, a) => match simplify(*a) {
            Const(v) => Const(f.apply(v)),
            other => Call(f, b(other)),
        },
        leaf => leaf,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
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
            let value = text
                .parse::<f64>()
                .map_err(|_| Error::Expr(format!("bad number `{text}`")))?;
            out.push(Token::Num(value));
        } else if ch.is_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^".contains(ch) {
            out.push(Token::Op(ch));
            i += 1;
        } else if ch == '(' {
            out.push(Token::LParen);
            i += 1;
        } else if ch == ')' {
            out.push(Token::RParen);
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character `{ch}` in `{src}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(b(lhs), b(rhs))
            } else {
                Node::Sub(b(lhs), b(rhs))
            };
        }
        Ok(lhs)
    }

    // term := unary (('*'|'/') unary)*
    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(b(lhs), b(rhs))
            } else {
                Node::Div(b(lhs), b(rhs))
            };
        }
        Ok(lhs)
    }

    // unary := ('-'|'+') unary | power
    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(b(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // power := atom ('^' unary)?   (right associative)
    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(b(base), b(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Node::Const(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(Error::Expr("missing `)`".into())),
                }
            }
            Some(Token::Ident(name)) => {
                if let Some(func) = Func::from_name(&name) {
                    match self.next() {
                        Some(Token::LParen) => {}
                        _ => return Err(Error::Expr(format!("`{name}` must be called"))),
                    }
                    let arg = self.expr()?;
                    match self.next() {
                        Some(Token::RParen) => Ok(Node::Call(func, b(arg))),
                        _ => Err(Error::Expr(format!("missing `)` after {}(", func.name()))),
                    }
                } else if let Some(idx) = self.vars.iter().position(|v| *v == name) {
                    Ok(Node::Var(idx))
                } else {
                    match name.as_str() {
                        "pi" => Ok(Node::Const(std::f64::consts::PI)),
                        "e" => Ok(Node::Const(std::f64::consts::E)),
                        _ => Err(Error::Expr(format!(
                            "unknown identifier `{name}` (variables: {})",
                            self.vars.join(", ")
                        ))),
                    }
                }
            }
            other => Err(Error::Expr(format!("unexpected token {other:?}"))),
        }
    }
}
