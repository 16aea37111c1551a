//! Line-oriented model files.
//!
//! ```text
//! species S
//! param k1 = 0.025
//! reaction 2 S -> 3 S : mass_action(k1)
//! reaction 0 -> S : 60
//! ```

use super::expr::Expr;
use super::{Propensity, Reaction, ReactionNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64, String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Arrow,
    Colon,
    Eq,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    col: usize,
}

fn lex(line: &str, lineno: usize) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |col: usize, msg: String| Error::Syntax { line: lineno, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), col });
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
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
            // exponent only when digits follow, so "2E" still lexes as 2 then E
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| err(col, format!("malformed number `{text}`")))?;
            out.push(Spanned { tok: Tok::Num(v, text), col });
            continue;
        }
        let tok = match c {
            '+' => Tok::Plus,
            '-' if chars.get(i + 1) == Some(&'>') => {
                i += 1;
                Tok::Arrow
            }
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ':' => Tok::Colon,
            '=' => Tok::Eq,
            _ => return Err(err(col, format!("unexpected character `{c}`"))),
        };
        i += 1;
        out.push(Spanned { tok, col });
    }
    Ok(out)
}

struct Symbols<'a> {
    species: &'a [String],
    params: &'a [String],
}

impl Symbols<'_> {
    fn resolve(&self, name: &str) -> Option<Expr> {
        if let Some(i) = self.species.iter().position(|s| s == name) {
            Some(Expr::Species(i))
        } else {
            self.params.iter().position(|s| s == name).map(Expr::Param)
        }
    }
}

struct Cursor<'a> {
    toks: &'a [Spanned],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |s| s.col)
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { line: self.line, col: self.col(), msg: msg.into() })
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<()> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<(String, usize)> {
        let col = self.col();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok((s.clone(), col))
            }
            _ => self.fail("expected identifier"),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expr(&mut self, syms: &Symbols) -> Result<Expr> {
        let mut lhs = self.mul(syms)?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.mul(syms)?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.mul(syms)?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn mul(&mut self, syms: &Symbols) -> Result<Expr> {
        let mut lhs = self.pow(syms)?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.pow(syms)?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.pow(syms)?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn pow(&mut self, syms: &Symbols) -> Result<Expr> {
        let base = self.atom(syms)?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let k = self.uint("exponent must be a nonnegative integer literal")?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn uint(&mut self, msg: &str) -> Result<u32> {
        match self.peek() {
            Some(Tok::Num(_, text)) if text.chars().all(|c| c.is_ascii_digit()) => {
                let k = text.parse::<u32>();
                match k {
                    Ok(k) => {
                        self.pos += 1;
                        Ok(k)
                    }
                    Err(_) => self.fail(msg),
                }
            }
            _ => self.fail(msg),
        }
    }

    fn atom(&mut self, syms: &Symbols) -> Result<Expr> {
        let col = self.col();
        match self.peek() {
            Some(Tok::Num(v, _)) => {
                self.pos += 1;
                Ok(Expr::Num(*v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                syms.resolve(name).ok_or_else(|| Error::UnknownIdent { name: name.clone(), line: self.line, col })
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr(syms)?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => self.fail("expected number, identifier or `(`"),
        }
    }

    fn side(&mut self, species: &[String]) -> Result<Vec<u32>> {
        let mut coeffs = vec![0u32; species.len()];
        if let Some(Tok::Num(_, text)) = self.peek() {
            if text == "0" && !matches!(self.toks.get(self.pos + 1).map(|s| &s.tok), Some(Tok::Ident(_))) {
                self.pos += 1;
                return Ok(coeffs);
            }
        }
        loop {
            let k = if matches!(self.peek(), Some(Tok::Num(..))) {
                self.uint("stoichiometric coefficient must be a nonnegative integer")?
            } else {
                1
            };
            let (name, col) = self.ident()?;
            let i = species
                .iter()
                .position(|s| *s == name)
                .ok_or(Error::UnknownIdent { name, line: self.line, col })?;
            coeffs[i] += k;
            if self.peek() == Some(&Tok::Plus) {
                self.pos += 1;
            } else {
                return Ok(coeffs);
            }
        }
    }
}

pub fn parse_model(text: &str) -> Result<ReactionNetwork> {
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let toks = lex(line, i + 1)?;
        if !toks.is_empty() {
            lines.push((i + 1, line.chars().count() + 1, toks));
        }
    }

    // declarations first, so reactions may reference names declared later
    let mut species: Vec<String> = Vec::new();
    let mut param_names: Vec<String> = Vec::new();
    let mut param_values: Vec<f64> = Vec::new();
    for (lineno, end_col, toks) in &lines {
        let mut cur = Cursor { toks, pos: 1, line: *lineno, end_col: *end_col };
        match &toks[0].tok {
            Tok::Ident(kw) if kw == "species" => {
                if cur.at_end() {
                    return cur.fail("expected at least one species name");
                }
                while !cur.at_end() {
                    let (name, _) = cur.ident()?;
                    if species.contains(&name) || param_names.contains(&name) {
                        return Err(Error::Syntax {
                            line: *lineno,
                            col: toks[cur.pos - 1].col,
                            msg: format!("`{name}` declared twice"),
                        });
                    }
                    species.push(name);
                }
            }
            Tok::Ident(kw) if kw == "param" => {
                let (name, col) = cur.ident()?;
                if species.contains(&name) || param_names.contains(&name) {
                    return Err(Error::Syntax { line: *lineno, col, msg: format!("`{name}` declared twice") });
                }
                cur.expect(&Tok::Eq, "`=`")?;
                let negative = cur.peek() == Some(&Tok::Minus);
                if negative {
                    cur.pos += 1;
                }
                let v = match cur.peek() {
                    Some(Tok::Num(v, _)) => *v,
                    _ => return cur.fail("expected number"),
                };
                cur.pos += 1;
                if !cur.at_end() {
                    return cur.fail("unexpected trailing input");
                }
                param_names.push(name);
                param_values.push(if negative { -v } else { v });
            }
            Tok::Ident(kw) if kw == "reaction" => {}
            _ => {
                return Err(Error::Syntax {
                    line: *lineno,
                    col: toks[0].col,
                    msg: "expected `species`, `param` or `reaction`".into(),
                })
            }
        }
    }

    let syms = Symbols { species: &species, params: &param_names };
    let mut reactions = Vec::new();
    for (lineno, end_col, toks) in &lines {
        if toks[0].tok != Tok::Ident("reaction".into()) {
            continue;
        }
        let mut cur = Cursor { toks, pos: 1, line: *lineno, end_col: *end_col };
        let nu_minus = cur.side(&species)?;
        cur.expect(&Tok::Arrow, "`->`")?;
        let nu_plus = cur.side(&species)?;
        cur.expect(&Tok::Colon, "`:`")?;
        let is_mass_action = matches!(cur.peek(), Some(Tok::Ident(s)) if s == "mass_action")
            && matches!(toks.get(cur.pos + 1).map(|s| &s.tok), Some(Tok::LParen));
        let propensity = if is_mass_action {
            cur.pos += 2;
            let k = cur.expr(&syms)?;
            cur.expect(&Tok::RParen, "`)`")?;
            if k.uses_species() {
                return Err(Error::Syntax {
                    line: *lineno,
                    col: toks[2].col,
                    msg: "mass_action rate constant must not depend on species".into(),
                });
            }
            let value = k.eval(&vec![0; species.len()], &param_values);
            if value < 0.0 || value.is_nan() {
                return Err(Error::NegativeRate { value, line: *lineno });
            }
            Propensity::MassAction(k)
        } else {
            Propensity::Expr(cur.expr(&syms)?)
        };
        if !cur.at_end() {
            return cur.fail("unexpected trailing input");
        }
        reactions.push(Reaction::new(nu_minus, nu_plus, propensity));
    }

    Ok(ReactionNetwork { species, param_names, param_values, reactions })
}

/// Parses a free-standing expression against a network's species and parameters.
pub fn parse_expr(net: &ReactionNetwork, text: &str) -> Result<Expr> {
    let toks = lex(text, 1)?;
    let mut cur = Cursor { toks: &toks, pos: 0, line: 1, end_col: text.chars().count() + 1 };
    let syms = Symbols { species: &net.species, params: &net.param_names };
    let e = cur.expr(&syms)?;
    if !cur.at_end() {
        return cur.fail("unexpected trailing input");
    }
    Ok(e)
}
