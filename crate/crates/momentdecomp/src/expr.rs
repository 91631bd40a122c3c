//! Arithmetic parameter expressions.
//!
//! Distribution parameters in a chain model are written as strings over real
//! literals, earlier variable names, `+ - * /`, unary minus, parentheses, and
//! the two-argument functions `min` and `max`. The grammar is small enough
//! for a hand-written recursive-descent parser with the usual precedence
//! (unary minus, then `* /`, then `+ -`, all left-associative), and keeping
//! it by hand means syntax errors carry an exact line and column.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := factor (("*" | "/") factor)*
//! factor  := "-" factor | primary
//! primary := NUMBER | IDENT | ("min" | "max") "(" expr "," expr ")" | "(" expr ")"
//! ```

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Parsed parameter expression.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamExpr {
    Num(f64),
    Var(String),
    Neg(Box<ParamExpr>),
    Add(Box<ParamExpr>, Box<ParamExpr>),
    Sub(Box<ParamExpr>, Box<ParamExpr>),
    Mul(Box<ParamExpr>, Box<ParamExpr>),
    Div(Box<ParamExpr>, Box<ParamExpr>),
    Min(Box<ParamExpr>, Box<ParamExpr>),
    Max(Box<ParamExpr>, Box<ParamExpr>),
}

impl ParamExpr {
    /// Parses `text` or reports a syntax error with line and column.
    pub fn parse(text: &str) -> Result<ParamExpr> {
        let tokens = lex(text)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expr()?;
        if parser.pos < parser.tokens.len() {
            let t = &parser.tokens[parser.pos];
            return Err(syntax(t.line, t.col, format!("unexpected `{}`", t.tok)));
        }
        Ok(expr)
    }

    /// Evaluates under a variable binding. Division by zero and non-finite
    /// results are errors; anything else is plain IEEE arithmetic.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        let v = self.eval_raw(lookup)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteResult(self.to_string()));
        }
        Ok(v)
    }

    fn eval_raw(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        Ok(match self {
            ParamExpr::Num(v) => *v,
            ParamExpr::Var(name) => {
                lookup(name).ok_or_else(|| Error::UnknownVariableReference {
                    name: name.clone(),
                    context: format!("`{self}`"),
                })?
            }
            ParamExpr::Neg(a) => -a.eval_raw(lookup)?,
            ParamExpr::Add(a, b) => a.eval_raw(lookup)? + b.eval_raw(lookup)?,
            ParamExpr::Sub(a, b) => a.eval_raw(lookup)? - b.eval_raw(lookup)?,
            ParamExpr::Mul(a, b) => a.eval_raw(lookup)? * b.eval_raw(lookup)?,
            ParamExpr::Div(a, b) => {
                let denom = b.eval_raw(lookup)?;
                if denom == 0.0 {
                    return Err(Error::DivisionByZero(self.to_string()));
                }
                a.eval_raw(lookup)? / denom
            }
            ParamExpr::Min(a, b) => a.eval_raw(lookup)?.min(b.eval_raw(lookup)?),
            ParamExpr::Max(a, b) => a.eval_raw(lookup)?.max(b.eval_raw(lookup)?),
        })
    }

    /// Every variable name referenced anywhere in the expression.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            ParamExpr::Num(_) => {}
            ParamExpr::Var(name) => {
                out.insert(name.clone());
            }
            ParamExpr::Neg(a) => a.collect_vars(out),
            ParamExpr::Add(a, b)
            | ParamExpr::Sub(a, b)
            | ParamExpr::Mul(a, b)
            | ParamExpr::Div(a, b)
            | ParamExpr::Min(a, b)
            | ParamExpr::Max(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            ParamExpr::Add(..) | ParamExpr::Sub(..) => 1,
            ParamExpr::Mul(..) | ParamExpr::Div(..) => 2,
            ParamExpr::Neg(..) => 3,
            ParamExpr::Num(_) | ParamExpr::Var(_) | ParamExpr::Min(..) | ParamExpr::Max(..) => 4,
        }
    }
}

/// Prints with the fewest parentheses that still re-parse to the same tree.
impl fmt::Display for ParamExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn side(f: &mut fmt::Formatter<'_>, child: &ParamExpr, min_prec: u8) -> fmt::Result {
            if child.precedence() < min_prec {
                write!(f, "({child})")
            } else {
                write!(f, "{child}")
            }
        }
        match self {
            ParamExpr::Num(v) => write!(f, "{v}"),
            ParamExpr::Var(name) => write!(f, "{name}"),
            ParamExpr::Neg(a) => {
                if a.precedence() == 4 {
                    write!(f, "-{a}")
                } else {
                    write!(f, "-({a})")
                }
            }
            ParamExpr::Add(a, b) => {
                side(f, a, 1)?;
                write!(f, " + ")?;
                side(f, b, 2)
            }
            ParamExpr::Sub(a, b) => {
                side(f, a, 1)?;
                write!(f, " - ")?;
                side(f, b, 2)
            }
            ParamExpr::Mul(a, b) => {
                side(f, a, 2)?;
                write!(f, " * ")?;
                side(f, b, 3)
            }
            ParamExpr::Div(a, b) => {
                side(f, a, 2)?;
                write!(f, " / ")?;
                side(f, b, 3)
            }
            ParamExpr::Min(a, b) => write!(f, "min({a}, {b})"),
            ParamExpr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "{v}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Plus => write!(f, "+"),
            Tok::Minus => write!(f, "-"),
            Tok::Star => write!(f, "*"),
            Tok::Slash => write!(f, "/"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Comma => write!(f, ","),
        }
    }
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, msg: String) -> Error {
    Error::Syntax { line, col, msg }
}

fn lex(text: &str) -> Result<Vec<Lexed>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let single = |c: char| match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            c if single(c).is_some() => {
                out.push(Lexed { tok: single(c).expect("matched above"), line: tline, col: tcol });
                i += 1;
                col += 1;
            }
            c if c.is_ascii_digit() || (c == '.' && matches!(chars.get(i + 1), Some(d) if d.is_ascii_digit())) => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
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
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(tline, tcol, format!("bad numeric literal `{text}`")))?;
                if !value.is_finite() {
                    return Err(syntax(tline, tcol, format!("numeric literal `{text}` out of range")));
                }
                col += i - start;
                out.push(Lexed { tok: Tok::Num(value), line: tline, col: tcol });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                col += i - start;
                out.push(Lexed { tok: Tok::Ident(name), line: tline, col: tcol });
            }
            other => {
                return Err(syntax(tline, tcol, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Lexed>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        match self.tokens.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => self
                .tokens
                .last()
                .map(|t| (t.line, t.col + t.tok.to_string().len()))
                .unwrap_or((1, 1)),
        }
    }

    fn bump(&mut self) -> Option<Tok> {
        let tok = self.tokens.get(self.pos).map(|t| t.tok.clone());
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        let (line, col) = self.here();
        match self.bump() {
            Some(tok) if tok == want => Ok(()),
            Some(tok) => Err(syntax(line, col, format!("expected `{want}`, found `{tok}`"))),
            None => Err(syntax(line, col, format!("expected `{want}`, found end of input"))),
        }
    }

    fn expr(&mut self) -> Result<ParamExpr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = ParamExpr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = ParamExpr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<ParamExpr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = ParamExpr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = ParamExpr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<ParamExpr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.pos += 1;
            return Ok(ParamExpr::Neg(Box::new(self.factor()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<ParamExpr> {
        let (line, col) = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(ParamExpr::Num(v)),
            Some(Tok::Ident(name)) if name == "min" || name == "max" => {
                self.expect(Tok::LParen)?;
                let a = self.expr()?;
                self.expect(Tok::Comma)?;
                let b = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(if name == "min" {
                    ParamExpr::Min(Box::new(a), Box::new(b))
                } else {
                    ParamExpr::Max(Box::new(a), Box::new(b))
                })
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    return Err(syntax(line, col, format!("unknown function `{name}`")));
                }
                Ok(ParamExpr::Var(name))
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Some(tok) => Err(syntax(line, col, format!("unexpected `{tok}`"))),
            None => Err(syntax(line, col, "unexpected end of input".into())),
        }
    }
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    /// Random trees over nonnegative literals (negatives are spelled with
    /// unary minus, as the parser would produce them).
    fn arb_expr() -> impl Strategy<Value = ParamExpr> {
        let leaf = prop_oneof![
            (0u32..4096).prop_map(|v| ParamExpr::Num(f64::from(v) / 64.0)),
            (0.0..1e6f64).prop_map(ParamExpr::Num),
            prop_oneof![Just("x1"), Just("x2"), Just("rate"), Just("_tmp9")]
                .prop_map(|s| ParamExpr::Var(s.to_string())),
        ];
        leaf.prop_recursive(6, 96, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| ParamExpr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| ParamExpr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| ParamExpr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| ParamExpr::Div(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| ParamExpr::Min(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| ParamExpr::Max(Box::new(a), Box::new(b))),
                inner.prop_map(|a| ParamExpr::Neg(Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn printing_then_parsing_is_the_identity(expr in arb_expr()) {
            let printed = expr.to_string();
            let reparsed = ParamExpr::parse(&printed).expect("printed expression parses");
            prop_assert_eq!(reparsed, expr);
        }
    }
}
