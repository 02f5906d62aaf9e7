//! Inline Hamiltonians: a small recursive-descent parser with symbolic
//! differentiation.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' uint)?
//! atom   := number | name | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | sq
//! ```

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("expression error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

use Expr::*;

fn num(v: f64) -> Expr {
    Num(v)
}

// Constructors that fold the trivial cases, so derivatives stay small.
fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x + y),
        (Num(z), e) | (e, Num(z)) if z == 0.0 => e,
        (a, b) => Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x - y),
        (e, Num(0.0)) => e,
        (Num(0.0), e) => neg(e),
        (a, b) => Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x * y),
        (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
        (Num(o), e) | (e, Num(o)) if o == 1.0 => e,
        (a, b) => Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(0.0), _) => Num(0.0),
        (e, Num(1.0)) => e,
        (a, b) => Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Num(x) => Num(-x),
        Neg(e) => *e,
        e => Neg(Box::new(e)),
    }
}

fn pow(a: Expr, k: u32) -> Expr {
    match (a, k) {
        (_, 0) => Num(1.0),
        (e, 1) => e,
        (Num(x), k) => Num(x.powi(k as i32)),
        (e, k) => Pow(Box::new(e), k),
    }
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Num(v) => *v,
            Var(i) => x[*i],
            Neg(a) => -a.eval(x),
            Add(a, b) => a.eval(x) + b.eval(x),
            Sub(a, b) => a.eval(x) - b.eval(x),
            Mul(a, b) => a.eval(x) * b.eval(x),
            Div(a, b) => a.eval(x) / b.eval(x),
            Pow(a, k) => a.eval(x).powi(*k as i32),
            Sin(a) => a.eval(x).sin(),
            Cos(a) => a.eval(x).cos(),
        }
    }

    /// Partial derivative in variable `i`.
    pub fn diff(&self, i: usize) -> Expr {
        match self {
            Num(_) => num(0.0),
            Var(j) => num(if *j == i { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(i)),
            Add(a, b) => add(a.diff(i), b.diff(i)),
            Sub(a, b) => sub(a.diff(i), b.diff(i)),
            Mul(a, b) => add(mul(a.diff(i), (**b).clone()), mul((**a).clone(), b.diff(i))),
            Div(a, b) => div(
                sub(mul(a.diff(i), (**b).clone()), mul((**a).clone(), b.diff(i))),
                pow((**b).clone(), 2),
            ),
            Pow(a, k) => mul(mul(num(*k as f64), pow((**a).clone(), k - 1)), a.diff(i)),
            Sin(a) => mul(Cos(a.clone()), a.diff(i)),
            Cos(a) => neg(mul(Sin(a.clone()), a.diff(i))),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = Add(Box::new(acc), Box::new(self.term()?));
            } else if self.eat(b'-') {
                acc = Sub(Box::new(acc), Box::new(self.term()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = Mul(Box::new(acc), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                acc = Div(Box::new(acc), Box::new(self.unary()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match digits.parse::<u32>() {
            Ok(k) if k <= 16 => Ok(Pow(Box::new(base), k)),
            _ => {
                self.pos = start;
                self.err("exponent must be an integer between 0 and 16")
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => self.err(format!("unexpected character '{}'", c as char)),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) => Ok(Num(v)),
            Err(_) => {
                self.pos = start;
                self.err(format!("bad number '{text}'"))
            }
        }
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return Ok(Var(i));
        }
        let func: fn(Expr) -> Expr = match name {
            "sin" => |e| Sin(Box::new(e)),
            "cos" => |e| Cos(Box::new(e)),
            "sq" => |e| Pow(Box::new(e), 2),
            "pi" => return Ok(Num(std::f64::consts::PI)),
            _ => {
                self.pos = start;
                return self.err(format!("unknown name '{name}'"));
            }
        };
        if !self.eat(b'(') {
            return self.err(format!("expected '(' after {name}"));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return self.err("expected ')'");
        }
        Ok(func(arg))
    }
}

/// Parse `src` with variables `names[i] -> x_i`.
pub fn parse(src: &str, names: &[String]) -> Result<Expr, ParseError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, names };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}
