use std::collections::{BTreeSet, HashMap};

use super::Name;

/// Affine λ-terms with boxes and `let !x = t in u`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Const(Name),
    Var(Name),
    Lam(Name, Box<Term>),
    App(Box<Term>, Box<Term>),
    Bang(Box<Term>),
    Let(Name, Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(x: &str) -> Term {
        Term::Var(x.into())
    }

    pub fn cst(c: &str) -> Term {
        Term::Const(c.into())
    }

    pub fn lam(x: impl Into<Name>, body: Term) -> Term {
        Term::Lam(x.into(), Box::new(body))
    }

    pub fn lams<I, S>(xs: I, body: Term) -> Term
    where
        I: IntoIterator<Item = S>,
        I::IntoIter: DoubleEndedIterator,
        S: Into<Name>,
    {
        xs.into_iter().rev().fold(body, |b, x| Term::lam(x, b))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn apps(f: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(f, Term::app)
    }

    pub fn bang(t: Term) -> Term {
        Term::Bang(Box::new(t))
    }

    pub fn let_bang(x: impl Into<Name>, bound: Term, body: Term) -> Term {
        Term::Let(x.into(), Box::new(bound), Box::new(body))
    }

    /// Head and arguments of an application spine.
    pub fn spine(&self) -> (&Term, Vec<&Term>) {
        let mut args = Vec::new();
        let mut head = self;
        while let Term::App(f, a) = head {
            args.push(&**a);
            head = f;
        }
        args.reverse();
        (head, args)
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Const(_) | Term::Var(_) => vec![],
            Term::Lam(_, b) | Term::Bang(b) => vec![b],
            Term::App(f, a) => vec![f, a],
            Term::Let(_, u, b) => vec![u, b],
        }
    }

    pub fn child(&self, i: usize) -> Option<&Term> {
        self.children().get(i).copied()
    }

    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Term::size).sum::<usize>()
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Term::Const(_) => {}
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::Lam(x, b) => {
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
            Term::App(f, a) => {
                f.collect_free(bound, out);
                a.collect_free(bound, out);
            }
            Term::Bang(b) => b.collect_free(bound, out),
            Term::Let(x, u, b) => {
                u.collect_free(bound, out);
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Every identifier appearing anywhere in the term, bound, free or constant.
    pub fn all_names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| match t {
            Term::Const(x) | Term::Var(x) | Term::Lam(x, _) | Term::Let(x, _, _) => {
                out.insert(x.clone());
            }
            _ => {}
        });
        out
    }

    pub fn constants(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            if let Term::Const(c) = t {
                out.insert(c.clone());
            }
        });
        out
    }

    /// Preorder traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn occurrences(&self, x: &str) -> usize {
        match self {
            Term::Const(_) => 0,
            Term::Var(y) => usize::from(&**y == x),
            Term::Lam(y, b) => {
                if &**y == x {
                    0
                } else {
                    b.occurrences(x)
                }
            }
            Term::App(f, a) => f.occurrences(x) + a.occurrences(x),
            Term::Bang(b) => b.occurrences(x),
            Term::Let(y, u, b) => u.occurrences(x) + if &**y == x { 0 } else { b.occurrences(x) },
        }
    }

    /// Capture-avoiding `self{x := u}`.
    pub fn subst(&self, x: &str, u: &Term) -> Term {
        let fv = u.free_vars();
        self.subst_with(x, u, &fv)
    }

    fn subst_with(&self, x: &str, u: &Term, fv: &BTreeSet<Name>) -> Term {
        match self {
            Term::Const(_) => self.clone(),
            Term::Var(y) => {
                if &**y == x {
                    u.clone()
                } else {
                    self.clone()
                }
            }
            Term::Lam(y, b) => {
                if &**y == x || b.occurrences(x) == 0 {
                    return self.clone();
                }
                let (y, b) = avoid_capture(y, b, fv, u, self);
                Term::lam(y, b.subst_with(x, u, fv))
            }
            Term::App(f, a) => Term::app(f.subst_with(x, u, fv), a.subst_with(x, u, fv)),
            Term::Bang(b) => Term::bang(b.subst_with(x, u, fv)),
            Term::Let(y, bound, body) => {
                let bound = bound.subst_with(x, u, fv);
                if &**y == x || body.occurrences(x) == 0 {
                    return Term::Let(y.clone(), Box::new(bound), body.clone());
                }
                let (y, body) = avoid_capture(y, body, fv, u, self);
                Term::let_bang(y, bound, body.subst_with(x, u, fv))
            }
        }
    }

    /// Simultaneous replacement of constants by closed terms, in one pass.
    pub fn subst_consts(&self, map: &HashMap<Name, Term>) -> Term {
        match self {
            Term::Const(c) => map.get(c).cloned().unwrap_or_else(|| self.clone()),
            Term::Var(_) => self.clone(),
            Term::Lam(x, b) => Term::lam(x.clone(), b.subst_consts(map)),
            Term::App(f, a) => Term::app(f.subst_consts(map), a.subst_consts(map)),
            Term::Bang(b) => Term::bang(b.subst_consts(map)),
            Term::Let(x, u, b) => Term::let_bang(x.clone(), u.subst_consts(map), b.subst_consts(map)),
        }
    }

    /// Renames the binder `y` of body `b` to a fresh name when it is free in
    /// the substituted term.
    pub fn rename_bound(y: &Name, b: &Term, avoid: &BTreeSet<Name>) -> (Name, Term) {
        let z = fresh(y, avoid);
        let b = b.subst(y, &Term::Var(z.clone()));
        (z, b)
    }

    /// Deterministic α-renaming: binders become `x1`, `x2`, ... in preorder,
    /// skipping names already used freely or as constants.
    pub fn canonical(&self) -> Term {
        let mut reserved = self.free_vars();
        reserved.extend(self.constants());
        let mut counter = 0usize;
        self.canon(&mut Vec::new(), &reserved, &mut counter)
    }

    fn canon(&self, env: &mut Vec<(Name, Name)>, reserved: &BTreeSet<Name>, counter: &mut usize) -> Term {
        let next = |counter: &mut usize| loop {
            *counter += 1;
            let n: Name = format!("x{counter}").into();
            if !reserved.contains(&n) {
                break n;
            }
        };
        match self {
            Term::Const(_) => self.clone(),
            Term::Var(x) => match env.iter().rev().find(|(o, _)| o == x) {
                Some((_, n)) => Term::Var(n.clone()),
                None => self.clone(),
            },
            Term::Lam(x, b) => {
                let n = next(counter);
                env.push((x.clone(), n.clone()));
                let b = b.canon(env, reserved, counter);
                env.pop();
                Term::lam(n, b)
            }
            Term::App(f, a) => {
                let f = f.canon(env, reserved, counter);
                Term::app(f, a.canon(env, reserved, counter))
            }
            Term::Bang(b) => Term::bang(b.canon(env, reserved, counter)),
            Term::Let(x, u, b) => {
                let u = u.canon(env, reserved, counter);
                let n = next(counter);
                env.push((x.clone(), n.clone()));
                let b = b.canon(env, reserved, counter);
                env.pop();
                Term::let_bang(n, u, b)
            }
        }
    }
}

fn avoid_capture(y: &Name, b: &Term, fv: &BTreeSet<Name>, u: &Term, whole: &Term) -> (Name, Term) {
    if fv.contains(y) {
        let mut avoid = fv.clone();
        avoid.extend(whole.all_names());
        avoid.extend(u.all_names());
        Term::rename_bound(y, b, &avoid)
    } else {
        (y.clone(), b.clone())
    }
}

/// A variant of `base` not in `avoid`.
pub fn fresh(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let stem = match base.rfind('_') {
        Some(i) if base[i + 1..].chars().all(|c| c.is_ascii_digit()) && i + 1 < base.len() => &base[..i],
        _ => base,
    };
    (1..)
        .map(|n| Name::from(format!("{stem}_{n}")))
        .find(|n| !avoid.contains(n))
        .expect("unbounded search")
}

/// α-equivalence: same shape, constants and free variables equal, bound
/// variables matched by binder.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    fn go(a: &Term, b: &Term, env: &mut Vec<(Name, Name)>) -> bool {
        match (a, b) {
            (Term::Const(x), Term::Const(y)) => x == y,
            (Term::Var(x), Term::Var(y)) => {
                let bx = env.iter().rposition(|(l, _)| l == x);
                let by = env.iter().rposition(|(_, r)| r == y);
                match (bx, by) {
                    (Some(i), Some(j)) => i == j,
                    (None, None) => x == y,
                    _ => false,
                }
            }
            (Term::Lam(x, s), Term::Lam(y, t)) => {
                env.push((x.clone(), y.clone()));
                let r = go(s, t, env);
                env.pop();
                r
            }
            (Term::App(f, s), Term::App(g, t)) => go(f, g, env) && go(s, t, env),
            (Term::Bang(s), Term::Bang(t)) => go(s, t, env),
            (Term::Let(x, u, s), Term::Let(y, v, t)) => {
                if !go(u, v, env) {
                    return false;
                }
                env.push((x.clone(), y.clone()));
                let r = go(s, t, env);
                env.pop();
                r
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subst_avoids_capture() {
        // (\y. x y){x := y} must not capture y.
        let t = Term::lam("y", Term::app(Term::var("x"), Term::var("y")));
        let r = t.subst("x", &Term::var("y"));
        let expected = Term::lam("z", Term::app(Term::var("y"), Term::var("z")));
        assert!(alpha_eq(&r, &expected), "{r}");
        assert!(!alpha_eq(&r, &Term::lam("y", Term::app(Term::var("y"), Term::var("y")))));
    }

    #[test]
    fn subst_stops_at_shadowing() {
        let t = Term::let_bang("x", Term::var("x"), Term::var("x"));
        let r = t.subst("x", &Term::cst("c"));
        assert_eq!(r, Term::let_bang("x", Term::cst("c"), Term::var("x")));
    }

    #[test]
    fn alpha_eq_respects_binding() {
        let a = Term::lam("x", Term::lam("y", Term::var("x")));
        let b = Term::lam("y", Term::lam("x", Term::var("y")));
        let c = Term::lam("y", Term::lam("x", Term::var("x")));
        assert!(alpha_eq(&a, &b));
        assert!(!alpha_eq(&a, &c));
        assert!(alpha_eq(&a.canonical(), &a));
    }

    #[test]
    fn fresh_skips_used_names() {
        let avoid: BTreeSet<Name> = ["x_1".into(), "x_2".into()].into_iter().collect();
        assert_eq!(&*fresh("x", &avoid), "x_3");
        assert_eq!(&*fresh("x_1", &avoid), "x_3");
    }

    #[test]
    fn spine_collects_arguments() {
        let t = Term::apps(Term::cst("a"), [Term::cst("b"), Term::cst("c")]);
        let (h, args) = t.spine();
        assert_eq!(h, &Term::cst("a"));
        assert_eq!(args.len(), 2);
    }
}
