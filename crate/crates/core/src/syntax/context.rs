use std::fmt;

use thiserror::Error;

use super::{Name, Term};

/// A path of 0-based child selectors from the root. For `App` child 0 is the
/// function and 1 the argument; for `Let` child 0 is the bound term and 1 the
/// body; `Lam` and `Bang` have the single child 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Position(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PositionError {
    #[error("position {0} is not valid in this term")]
    Invalid(Position),
}

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn child(&self, i: usize) -> Self {
        let mut p = self.0.clone();
        p.push(i);
        Position(p)
    }

    pub fn parent(&self) -> Option<Position> {
        let mut p = self.0.clone();
        p.pop().map(|_| Position(p))
    }

    pub fn is_prefix_of(&self, other: &Position) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// A term with exactly one hole.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Context {
    Hole,
    Lam(Name, Box<Context>),
    AppL(Box<Context>, Term),
    AppR(Term, Box<Context>),
    Bang(Box<Context>),
    LetBound(Name, Box<Context>, Term),
    LetBody(Name, Term, Box<Context>),
}

impl Context {
    pub fn plug(&self, t: Term) -> Term {
        match self {
            Context::Hole => t,
            Context::Lam(x, c) => Term::lam(x.clone(), c.plug(t)),
            Context::AppL(c, a) => Term::app(c.plug(t), a.clone()),
            Context::AppR(f, c) => Term::app(f.clone(), c.plug(t)),
            Context::Bang(c) => Term::bang(c.plug(t)),
            Context::LetBound(x, c, b) => Term::let_bang(x.clone(), c.plug(t), b.clone()),
            Context::LetBody(x, u, c) => Term::let_bang(x.clone(), u.clone(), c.plug(t)),
        }
    }

    pub fn position(&self) -> Position {
        let mut path = Vec::new();
        let mut c = self;
        loop {
            let (i, next) = match c {
                Context::Hole => return Position(path),
                Context::Lam(_, n) | Context::Bang(n) | Context::AppL(n, _) | Context::LetBound(_, n, _) => (0, n),
                Context::AppR(_, n) | Context::LetBody(_, _, n) => (1, n),
            };
            path.push(i);
            c = next;
        }
    }

    /// Number of boxes around the hole, regardless of their type.
    pub fn box_count(&self) -> usize {
        match self {
            Context::Hole => 0,
            Context::Bang(c) => 1 + c.box_count(),
            Context::Lam(_, c)
            | Context::AppL(c, _)
            | Context::AppR(_, c)
            | Context::LetBound(_, c, _)
            | Context::LetBody(_, _, c) => c.box_count(),
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.plug(Term::Const("[]".into())))
    }
}

pub fn split_at(t: &Term, pos: &Position) -> Result<(Context, Term), PositionError> {
    fn go(t: &Term, path: &[usize]) -> Option<(Context, Term)> {
        let Some((&i, rest)) = path.split_first() else {
            return Some((Context::Hole, t.clone()));
        };
        let (ctx, sub) = go(t.child(i)?, rest)?;
        let ctx = match (t, i) {
            (Term::Lam(x, _), 0) => Context::Lam(x.clone(), Box::new(ctx)),
            (Term::Bang(_), 0) => Context::Bang(Box::new(ctx)),
            (Term::App(_, a), 0) => Context::AppL(Box::new(ctx), (**a).clone()),
            (Term::App(f, _), 1) => Context::AppR((**f).clone(), Box::new(ctx)),
            (Term::Let(x, _, b), 0) => Context::LetBound(x.clone(), Box::new(ctx), (**b).clone()),
            (Term::Let(x, u, _), 1) => Context::LetBody(x.clone(), (**u).clone(), Box::new(ctx)),
            _ => return None,
        };
        Some((ctx, sub))
    }
    go(t, &pos.0).ok_or_else(|| PositionError::Invalid(pos.clone()))
}

impl Term {
    pub fn split_at(&self, pos: &Position) -> Result<(Context, Term), PositionError> {
        split_at(self, pos)
    }

    pub fn at(&self, pos: &Position) -> Option<&Term> {
        pos.0.iter().try_fold(self, |t, &i| t.child(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_open_term, RankedAlphabet};

    fn sigma() -> RankedAlphabet {
        RankedAlphabet::new([("S", 1), ("0", 0)]).unwrap()
    }

    #[test]
    fn split_root_is_hole() {
        let t = parse_open_term("f x", &sigma(), &["f", "x"]).unwrap();
        let (c, s) = t.split_at(&Position::root()).unwrap();
        assert_eq!(c, Context::Hole);
        assert_eq!(s, t);
    }

    #[test]
    fn split_function_child() {
        let t = parse_open_term("f x", &sigma(), &["f", "x"]).unwrap();
        let (c, s) = t.split_at(&Position(vec![0])).unwrap();
        assert_eq!(c, Context::AppL(Box::new(Context::Hole), Term::var("x")));
        assert_eq!(s, Term::var("f"));
        assert_eq!(c.plug(s), t);
    }

    #[test]
    fn split_under_binder() {
        let t = parse_open_term("\\x. S (f x)", &sigma(), &["f"]).unwrap();
        let pos = Position(vec![0, 1, 0]);
        let (c, s) = t.split_at(&pos).unwrap();
        assert_eq!(s, Term::var("f"));
        assert_eq!(c.to_string(), "\\x. S ([] x)");
        assert_eq!(c.position(), pos);
        assert_eq!(c.plug(s), t);
        assert!(t.split_at(&Position(vec![1])).is_err());
    }
}
