//! A small arithmetic grammar for densities over `x1`, `x2` and the boundary
//! distance `d`.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unexpected character {0:?} at offset {1}")]
    Char(char, usize),
    #[error("unexpected end of expression")]
    Eof,
    #[error("unknown identifier {0:?}")]
    Ident(String),
    #[error("{name} takes {expected} argument(s), got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("trailing input at offset {0}")]
    Trailing(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    Dist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Abs,
    Min,
    Max,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sqrt" => (Func::Sqrt, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "abs" => (Func::Abs, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Parsed expression; keeps its source text for serialisation.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(ExprError::Trailing(p.pos));
        }
        Ok(Self { source: src.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn uses(&self, v: Var) -> bool {
        fn walk(n: &Node, v: Var) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(w) => *w == v,
                Node::Neg(a) => walk(a, v),
                Node::Bin(_, a, b) => walk(a, v) || walk(b, v),
                Node::Call(_, args) => args.iter().any(|a| walk(a, v)),
            }
        }
        walk(&self.root, v)
    }

    pub fn eval(&self, x1: f64, x2: f64, d: f64) -> f64 {
        fn go(n: &Node, env: &[f64; 3]) -> f64 {
            match n {
                Node::Num(v) => *v,
                Node::Var(Var::X1) => env[0],
                Node::Var(Var::X2) => env[1],
                Node::Var(Var::Dist) => env[2],
                Node::Neg(a) => -go(a, env),
                Node::Bin(op, a, b) => {
                    let (a, b) = (go(a, env), go(b, env));
                    match op {
                        '+' => a + b,
                        '-' => a - b,
                        '*' => a * b,
                        '/' => a / b,
                        _ => a.powf(b),
                    }
                }
                Node::Call(f, args) => {
                    let a = go(&args[0], env);
                    match f {
                        Func::Sqrt => a.sqrt(),
                        Func::Exp => a.exp(),
                        Func::Ln => a.ln(),
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Tan => a.tan(),
                        Func::Abs => a.abs(),
                        Func::Min => a.min(go(&args[1], env)),
                        Func::Max => a.max(go(&args[1], env)),
                        Func::Pow => a.powf(go(&args[1], env)),
                    }
                }
            }
        }
        go(&self.root, &[x1, x2, d])
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        match self.peek() {
            Some(b) if b == c => {
                self.pos += 1;
                Ok(())
            }
            Some(b) => Err(ExprError::Char(b as char, self.pos)),
            None => Err(ExprError::Eof),
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(ExprError::Eof),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.s.len() {
                    let c = self.s[self.pos];
                    let exp_sign = (c == b'+' || c == b'-') && matches!(self.s[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                text.parse::<f64>().map(Node::Num).map_err(|_| ExprError::Char(c as char, start))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap().to_string();
                match name.as_str() {
                    "x1" => return Ok(Node::Var(Var::X1)),
                    "x2" => return Ok(Node::Var(Var::X2)),
                    "d" => return Ok(Node::Var(Var::Dist)),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    _ => {}
                }
                let (func, arity) = Func::lookup(&name).ok_or_else(|| ExprError::Ident(name.clone()))?;
                self.expect(b'(')?;
                let mut args = vec![self.expr()?];
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                self.expect(b')')?;
                if args.len() != arity {
                    return Err(ExprError::Arity { name, expected: arity, got: args.len() });
                }
                Ok(Node::Call(func, args))
            }
            Some(c) => Err(ExprError::Char(c as char, self.pos)),
        }
    }
}
