use std::fmt;

/// Arithmetic expression over species counts and named parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Species(usize),
    Param(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn eval(&self, x: &[u32], params: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Species(i) => x[*i] as f64,
            Expr::Param(i) => params[*i],
            Expr::Add(a, b) => a.eval(x, params) + b.eval(x, params),
            Expr::Sub(a, b) => a.eval(x, params) - b.eval(x, params),
            Expr::Mul(a, b) => a.eval(x, params) * b.eval(x, params),
            Expr::Div(a, b) => a.eval(x, params) / b.eval(x, params),
            Expr::Pow(a, k) => a.eval(x, params).powi(*k as i32),
        }
    }

    pub fn uses_species(&self) -> bool {
        match self {
            Expr::Species(_) => true,
            Expr::Num(_) | Expr::Param(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.uses_species() || b.uses_species()
            }
            Expr::Pow(a, _) => a.uses_species(),
        }
    }

    /// Writes the expression with every binary operation parenthesized, so the
    /// output re-parses to the same tree.
    pub fn write(&self, out: &mut dyn fmt::Write, species: &[String], params: &[String]) -> fmt::Result {
        let bin = |out: &mut dyn fmt::Write, a: &Expr, op: &str, b: &Expr| -> fmt::Result {
            out.write_char('(')?;
            a.write(out, species, params)?;
            write!(out, " {op} ")?;
            b.write(out, species, params)?;
            out.write_char(')')
        };
        match self {
            Expr::Num(v) => write!(out, "{v:?}"),
            Expr::Species(i) => out.write_str(&species[*i]),
            Expr::Param(i) => out.write_str(&params[*i]),
            Expr::Add(a, b) => bin(out, a, "+", b),
            Expr::Sub(a, b) => bin(out, a, "-", b),
            Expr::Mul(a, b) => bin(out, a, "*", b),
            Expr::Div(a, b) => bin(out, a, "/", b),
            Expr::Pow(a, k) => {
                out.write_char('(')?;
                a.write(out, species, params)?;
                write!(out, " ^ {k})")
            }
        }
    }

    pub fn to_text(&self, species: &[String], params: &[String]) -> String {
        let mut s = String::new();
        self.write(&mut s, species, params).expect("writing to a String cannot fail");
        s
    }
}
