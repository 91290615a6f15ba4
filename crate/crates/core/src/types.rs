//! Types `o | A -o B | !A`, purity tiers, tape navigation and heights.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Base,
    Arrow(Arc<Type>, Arc<Type>),
    Bang(Arc<Type>),
}

/// Tiers, ordered by inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Classification {
    PurelyAffine,
    AlmostPurelyAffine,
    AlmostDepth1,
    General,
}

impl Classification {
    pub fn level(self) -> usize {
        self as usize
    }

    pub fn from_level(l: usize) -> Classification {
        match l {
            0 => Classification::PurelyAffine,
            1 => Classification::AlmostPurelyAffine,
            2 => Classification::AlmostDepth1,
            _ => Classification::General,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::PurelyAffine => "purely-affine",
            Classification::AlmostPurelyAffine => "almost-purely-affine",
            Classification::AlmostDepth1 => "almost-depth-1",
            Classification::General => "general",
        })
    }
}

/// Tape symbols: `p` (went into a function's result) and `o` (went into an
/// argument, written `∘`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tok {
    P,
    O,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tok::P => "p",
            Tok::O => "o",
        })
    }
}

impl Type {
    pub fn arrow(a: Type, b: Type) -> Type {
        Type::Arrow(Arc::new(a), Arc::new(b))
    }

    pub fn bang(a: Type) -> Type {
        Type::Bang(Arc::new(a))
    }

    /// `A1 -o ... -o An -o B`.
    pub fn arrows(args: impl IntoIterator<Item = Type, IntoIter: DoubleEndedIterator>, b: Type) -> Type {
        args.into_iter().rev().fold(b, |acc, a| Type::arrow(a, acc))
    }

    /// `o^k -o o`, the type of a letter of rank `k`.
    pub fn constant(rank: usize) -> Type {
        Type::arrows(std::iter::repeat_n(Type::Base, rank), Type::Base)
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Type::Base)
    }

    pub fn has_bang(&self) -> bool {
        match self {
            Type::Base => false,
            Type::Arrow(a, b) => a.has_bang() || b.has_bang(),
            Type::Bang(_) => true,
        }
    }

    /// Strips one outer `!`, if any.
    pub fn unbang(&self) -> &Type {
        match self {
            Type::Bang(a) => a,
            other => other,
        }
    }

    /// Arguments and final codomain of an arrow chain.
    pub fn uncurry(&self) -> (Vec<&Type>, &Type) {
        let mut args = Vec::new();
        let mut t = self;
        while let Type::Arrow(a, b) = t {
            args.push(&**a);
            t = b;
        }
        (args, t)
    }

    pub fn height(&self) -> usize {
        type_height(self)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Base => f.write_str("o"),
            Type::Bang(a) => match &**a {
                Type::Arrow(..) => write!(f, "!({a})"),
                _ => write!(f, "!{a}"),
            },
            Type::Arrow(a, b) => match &**a {
                Type::Arrow(..) => write!(f, "({a}) -o {b}"),
                _ => write!(f, "{a} -o {b}"),
            },
        }
    }
}

pub fn classify_type(a: &Type) -> Classification {
    fn apa(a: &Type) -> bool {
        match a {
            Type::Base => true,
            Type::Arrow(x, y) => apa(x) && apa(y),
            Type::Bang(x) => x.is_base(),
        }
    }
    fn ad1(a: &Type) -> bool {
        match a {
            Type::Base => true,
            Type::Arrow(x, y) => ad1(x) && ad1(y),
            Type::Bang(x) => apa(x),
        }
    }
    if !a.has_bang() {
        Classification::PurelyAffine
    } else if apa(a) {
        Classification::AlmostPurelyAffine
    } else if ad1(a) {
        Classification::AlmostDepth1
    } else {
        Classification::General
    }
}

/// `A ⚡ T`; `None` when the base type is reached with tape left over.
pub fn navigate<'a>(a: &'a Type, tape: impl IntoIterator<Item = Tok>) -> Option<&'a Type> {
    let mut cur = a;
    for tok in tape {
        loop {
            match cur {
                Type::Bang(x) => cur = x,
                _ => break,
            }
        }
        match (cur, tok) {
            (Type::Arrow(x, _), Tok::O) => cur = x,
            (Type::Arrow(_, y), Tok::P) => cur = y,
            _ => return None,
        }
    }
    Some(cur)
}

/// `navigate` followed by stripping `!`, so that the result of a successful
/// navigation that should land on `o` can be compared to `Type::Base`.
pub fn navigate_to_base(a: &Type, tape: impl IntoIterator<Item = Tok>) -> bool {
    navigate(a, tape).is_some_and(|t| {
        let mut t = t;
        while let Type::Bang(x) = t {
            t = x;
        }
        t.is_base()
    })
}

pub fn type_height(a: &Type) -> usize {
    match a {
        Type::Base => 0,
        Type::Arrow(x, y) => 1 + type_height(x).max(type_height(y)),
        Type::Bang(x) => type_height(x),
    }
}

/// `A{o := B}`.
pub fn subst_base(a: &Type, b: &Type) -> Type {
    match a {
        Type::Base => b.clone(),
        Type::Arrow(x, y) => Type::arrow(subst_base(x, b), subst_base(y, b)),
        Type::Bang(x) => Type::bang(subst_base(x, b)),
    }
}
