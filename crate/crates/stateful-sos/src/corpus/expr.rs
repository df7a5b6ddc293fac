//! Arithmetic expressions over stores. Evaluation is total: subtraction
//! truncates at zero and the other operations saturate.

use std::fmt;

use super::store::Store;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(u64),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    /// Truncated subtraction: `a - b` is zero when `b >= a`.
    Monus(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn monus(a: Expr, b: Expr) -> Expr {
        Expr::Monus(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn eval(&self, store: &Store) -> u64 {
        match self {
            Expr::Const(n) => *n,
            Expr::Var(x) => store.get(x),
            Expr::Add(a, b) => a.eval(store).saturating_add(b.eval(store)),
            Expr::Monus(a, b) => a.eval(store).saturating_sub(b.eval(store)),
            Expr::Mul(a, b) => a.eval(store).saturating_mul(b.eval(store)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(_) | Expr::Var(_) => 2,
            Expr::Mul(_, _) => 1,
            Expr::Add(_, _) | Expr::Monus(_, _) => 0,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, parent: u8, rightmost: bool) -> fmt::Result {
        // parenthesize when binding looser than the parent, or equally on the
        // right of a left-associative operator
        let needs_parens =
            self.precedence() < parent || (rightmost && self.precedence() == parent && parent < 2);
        if needs_parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(n) => write!(f, "{n}"),
            Expr::Var(x) => write!(f, "{x}"),
            Expr::Add(a, b) => {
                a.fmt_child(f, 0, false)?;
                write!(f, " + ")?;
                b.fmt_child(f, 0, true)
            }
            Expr::Monus(a, b) => {
                a.fmt_child(f, 0, false)?;
                write!(f, " - ")?;
                b.fmt_child(f, 0, true)
            }
            Expr::Mul(a, b) => {
                a.fmt_child(f, 1, false)?;
                write!(f, " * ")?;
                b.fmt_child(f, 1, true)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let s = Store::empty().with("x", 0);
        assert_eq!(Expr::add(Expr::var("x"), Expr::Const(1)).eval(&s), 1);
        let s = Store::empty().with("x", 1);
        assert_eq!(Expr::mul(Expr::var("x"), Expr::Const(2)).eval(&s), 2);
    }

    #[test]
    fn subtraction_truncates_at_zero() {
        // 1 - 2 = 0 on naturals
        let e = Expr::monus(Expr::Const(1), Expr::Const(2));
        assert_eq!(e.eval(&Store::empty()), 0);
        assert_eq!(e.eval(&Store::empty().with("x", 9)), 0);
    }

    #[test]
    fn display_parenthesizes_by_precedence() {
        let e = Expr::mul(Expr::add(Expr::var("x"), Expr::Const(1)), Expr::Const(2));
        assert_eq!(e.to_string(), "(x + 1) * 2");
        let e = Expr::add(Expr::var("x"), Expr::mul(Expr::var("y"), Expr::Const(2)));
        assert_eq!(e.to_string(), "x + y * 2");
        let e = Expr::monus(Expr::var("x"), Expr::monus(Expr::var("y"), Expr::Const(1)));
        assert_eq!(e.to_string(), "x - (y - 1)");
    }
}
