//! β-reduction at a distance and normalization.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::syntax::{fresh, Name, Term};
use crate::typing::{classify_term, AnnotatedTerm};
use crate::types::{classify_type, Classification};

pub const DEFAULT_FUEL: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("normalization did not finish within {0} steps")]
    FuelExhausted(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    LeftmostOutermost,
    RightmostInnermost,
}

/// `L ::= [] | let !x = t in L`, outermost binder first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LetPrefix(pub Vec<(Name, Term)>);

impl LetPrefix {
    /// Splits `t` into `L⟨core⟩` with `L` maximal.
    pub fn peel(t: &Term) -> (LetPrefix, &Term) {
        let mut lets = Vec::new();
        let mut cur = t;
        while let Term::Let(x, u, b) = cur {
            lets.push((x.clone(), (**u).clone()));
            cur = b;
        }
        (LetPrefix(lets), cur)
    }

    pub fn plug(&self, core: Term) -> Term {
        self.0
            .iter()
            .rev()
            .fold(core, |acc, (x, u)| Term::let_bang(x.clone(), u.clone(), acc))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Renames the let binders of the prefix of `t` that belong to `avoid`, so
/// that plugging a term with those free variables is capture-free.
fn freshen_prefix(t: &Term, avoid: &BTreeSet<Name>) -> Term {
    match t {
        Term::Let(x, u, b) => {
            if avoid.contains(x) {
                let mut all = avoid.clone();
                all.extend(t.all_names());
                let z = fresh(x, &all);
                let b = b.subst(x, &Term::Var(z.clone()));
                Term::let_bang(z, (**u).clone(), freshen_prefix(&b, avoid))
            } else {
                Term::let_bang(x.clone(), (**u).clone(), freshen_prefix(b, avoid))
            }
        }
        other => other.clone(),
    }
}

/// Contracts `t` if it is itself a redex.
pub fn contract(t: &Term) -> Option<Term> {
    match t {
        Term::App(f, a) => {
            let (_, core) = LetPrefix::peel(f);
            if !matches!(core, Term::Lam(..)) {
                return None;
            }
            let f = freshen_prefix(f, &a.free_vars());
            let (prefix, core) = LetPrefix::peel(&f);
            let Term::Lam(x, body) = core else { unreachable!() };
            Some(prefix.plug(body.subst(x, a)))
        }
        Term::Let(x, bound, body) => {
            let (_, core) = LetPrefix::peel(bound);
            if !matches!(core, Term::Bang(_)) {
                return None;
            }
            let mut avoid = body.free_vars();
            avoid.remove(x);
            let bound = freshen_prefix(bound, &avoid);
            let (prefix, core) = LetPrefix::peel(&bound);
            let Term::Bang(u) = core else { unreachable!() };
            Some(prefix.plug(body.subst(x, u)))
        }
        _ => None,
    }
}

fn rebuild(t: &Term, i: usize, child: Term) -> Term {
    match (t, i) {
        (Term::Lam(x, _), 0) => Term::lam(x.clone(), child),
        (Term::Bang(_), 0) => Term::bang(child),
        (Term::App(_, a), 0) => Term::app(child, (**a).clone()),
        (Term::App(f, _), 1) => Term::app((**f).clone(), child),
        (Term::Let(x, _, b), 0) => Term::let_bang(x.clone(), child, (**b).clone()),
        (Term::Let(x, u, _), 1) => Term::let_bang(x.clone(), (**u).clone(), child),
        _ => unreachable!("invalid child index"),
    }
}

/// One β-step under the given strategy; `None` on normal forms.
pub fn beta_step_with(t: &Term, strategy: Strategy) -> Option<Term> {
    let n = t.children().len();
    match strategy {
        Strategy::LeftmostOutermost => contract(t).or_else(|| {
            (0..n).find_map(|i| beta_step_with(t.child(i)?, strategy).map(|c| rebuild(t, i, c)))
        }),
        Strategy::RightmostInnermost => (0..n)
            .rev()
            .find_map(|i| beta_step_with(t.child(i)?, strategy).map(|c| rebuild(t, i, c)))
            .or_else(|| contract(t)),
    }
}

/// One leftmost-outermost β-step.
pub fn beta_step(t: &Term) -> Option<Term> {
    beta_step_with(t, Strategy::LeftmostOutermost)
}

pub fn is_normal(t: &Term) -> bool {
    contract(t).is_none() && t.children().into_iter().all(is_normal)
}

/// Normal form by repeated single steps of `strategy`; counts every step.
pub fn normalize_stepwise(t: &Term, strategy: Strategy, fuel: u64) -> Result<(Term, u64), ReduceError> {
    let mut cur = t.clone();
    let mut steps = 0;
    while let Some(next) = beta_step_with(&cur, strategy) {
        steps += 1;
        if steps > fuel {
            return Err(ReduceError::FuelExhausted(fuel));
        }
        cur = next;
    }
    Ok((cur, steps))
}

/// Normal-order normalization without re-traversing from the root after
/// each step: head redexes first, then functions before arguments.
pub fn normalize_term(t: &Term, fuel: u64) -> Result<Term, ReduceError> {
    let mut used = 0u64;
    nf(t.clone(), fuel, &mut used)
}

fn tick(used: &mut u64, fuel: u64) -> Result<(), ReduceError> {
    *used += 1;
    if *used > fuel {
        Err(ReduceError::FuelExhausted(fuel))
    } else {
        Ok(())
    }
}

fn nf(mut t: Term, fuel: u64, used: &mut u64) -> Result<Term, ReduceError> {
    loop {
        if let Some(r) = contract(&t) {
            tick(used, fuel)?;
            t = r;
            continue;
        }
        return match t {
            Term::Const(_) | Term::Var(_) => Ok(t),
            Term::Lam(x, b) => Ok(Term::lam(x, nf(*b, fuel, used)?)),
            Term::Bang(b) => Ok(Term::bang(nf(*b, fuel, used)?)),
            Term::App(f, a) => {
                let f = nf(*f, fuel, used)?;
                let t2 = Term::App(Box::new(f), a);
                if contract(&t2).is_some() {
                    t = t2;
                    continue;
                }
                let Term::App(f, a) = t2 else { unreachable!() };
                Ok(Term::App(f, Box::new(nf(*a, fuel, used)?)))
            }
            Term::Let(x, u, b) => {
                let u = nf(*u, fuel, used)?;
                let t2 = Term::Let(x, Box::new(u), b);
                if contract(&t2).is_some() {
                    t = t2;
                    continue;
                }
                let Term::Let(x, u, b) = t2 else { unreachable!() };
                Ok(Term::Let(x, u, Box::new(nf(*b, fuel, used)?)))
            }
        };
    }
}

/// Normal form of a well-typed term.
pub fn normalize(t: &AnnotatedTerm, fuel: u64) -> Result<Term, ReduceError> {
    normalize_term(t.term(), fuel)
}

/// For a normal term: whether its tier is at most the tier of its type and
/// of its free variables' types.
pub fn normal_form_classification_check(t: &AnnotatedTerm) -> bool {
    let ctx = t.context();
    let bound = ctx
        .unrestricted
        .iter()
        .chain(&ctx.affine)
        .map(|(_, ty)| classify_type(ty))
        .chain(std::iter::once(classify_type(t.ty(t.root()))))
        .max()
        .unwrap_or(Classification::PurelyAffine);
    classify_term(t) <= bound
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq, parse_open_term, parse_term, RankedAlphabet};
    use crate::typing::{check_type, constant_types, TypingContext};
    use crate::syntax::parse_type;

    fn sigma() -> RankedAlphabet {
        RankedAlphabet::new([("S", 1), ("0", 0), ("cons", 2), ("nil", 0)]).unwrap()
    }

    #[test]
    fn reduction_at_a_distance() {
        let t = parse_open_term(
            "(let !x = u in let !y = v in \\z. z x y) t",
            &sigma(),
            &["u", "v", "t"],
        )
        .unwrap();
        let expected = parse_open_term("let !x = u in let !y = v in t x y", &sigma(), &["u", "v", "t"]).unwrap();
        let (nf, _) = normalize_stepwise(&t, Strategy::LeftmostOutermost, 100).unwrap();
        assert!(alpha_eq(&nf, &expected), "{nf}");
    }

    #[test]
    fn prefix_binders_are_renamed_on_clash() {
        // The argument mentions a free `x`, which must not be captured by the
        // let binder `x` of the prefix.
        let t = parse_open_term("(let !x = u in \\z. z x) x", &sigma(), &["u", "x"]).unwrap();
        let r = beta_step(&t).unwrap();
        let expected = parse_open_term("let !w = u in x w", &sigma(), &["u", "x"]).unwrap();
        assert!(alpha_eq(&r, &expected), "{r}");
    }

    #[test]
    fn let_redex_renames_prefix() {
        let t = parse_open_term("let !x = (let !y = v in !y) in y x", &sigma(), &["v", "y"]).unwrap();
        let r = beta_step(&t).unwrap();
        let expected = parse_open_term("let !w = v in y w", &sigma(), &["v", "y"]).unwrap();
        assert!(alpha_eq(&r, &expected), "{r}");
    }

    #[test]
    fn normal_forms_have_no_redex() {
        let t = parse_term("\\x. x", &sigma()).unwrap();
        assert_eq!(beta_step(&t), None);
        assert!(is_normal(&t));
    }

    #[test]
    fn two_leftmost_steps() {
        let t = parse_term("(\\f. f 0) (\\x. x)", &sigma()).unwrap();
        let s1 = beta_step(&t).unwrap();
        assert_eq!(s1.to_string(), "(\\x. x) 0");
        let s2 = beta_step(&s1).unwrap();
        assert_eq!(s2.to_string(), "0");
        assert_eq!(beta_step(&s2), None);
    }

    #[test]
    fn normalizes_count_example() {
        let src = "(\\f. f 0) ((\\l.\\r.\\x. l (r x)) ((\\f.\\x. S (f x)) S) S)";
        let t = parse_term(src, &sigma()).unwrap();
        let nf = normalize_term(&t, DEFAULT_FUEL).unwrap();
        assert_eq!(nf.to_string(), "S (S (S 0))");
        let (nf2, _) = normalize_stepwise(&t, Strategy::RightmostInnermost, DEFAULT_FUEL).unwrap();
        assert!(alpha_eq(&nf, &nf2));
    }

    #[test]
    fn let_of_box_normalizes_to_identity() {
        let t = parse_term("let !z = !(\\x. x) in z", &sigma()).unwrap();
        let nf = normalize_term(&t, 10).unwrap();
        assert_eq!(nf.to_string(), "\\x. x");
        let ty = parse_type("o -o o").unwrap();
        let a = check_type(&TypingContext::empty(), &nf, &ty, &constant_types(&sigma())).unwrap();
        assert!(normal_form_classification_check(&a));
        assert_eq!(a.classify(), Classification::PurelyAffine);
    }

    #[test]
    fn fuel_runs_out_on_omega() {
        let t = parse_term("(\\x. x x) (\\x. x x)", &sigma()).unwrap();
        assert_eq!(normalize_term(&t, 50), Err(ReduceError::FuelExhausted(50)));
    }
}
