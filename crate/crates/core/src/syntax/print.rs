use std::fmt::{self, Write};

use super::{Position, Term};

/// Token direction marker used when rendering machine configurations:
/// `>t<` for a token going down into `t`, `<t>` for one leaving `t` upwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Marker {
    Down,
    Up,
}

const TERM: u8 = 0;
const APP: u8 = 1;
const ATOM: u8 = 2;

fn needed_level(t: &Term) -> u8 {
    match t {
        Term::Lam(..) | Term::Let(..) => TERM,
        Term::App(..) => APP,
        _ => ATOM,
    }
}

struct Printer<'a> {
    out: String,
    path: Vec<usize>,
    mark: Option<(&'a [usize], Marker)>,
}

impl Printer<'_> {
    fn go(&mut self, t: &Term, level: u8) {
        let marked = match self.mark {
            Some((p, m)) if p == self.path.as_slice() => Some(m),
            _ => None,
        };
        let parens = needed_level(t) < level;
        match marked {
            Some(Marker::Down) => self.out.push('>'),
            Some(Marker::Up) => self.out.push('<'),
            None => {}
        }
        if parens {
            self.out.push('(');
        }
        match t {
            Term::Const(c) => self.out.push_str(c),
            Term::Var(x) => self.out.push_str(x),
            Term::Lam(x, b) => {
                let _ = write!(self.out, "\\{x}.");
                let chained = matches!(**b, Term::Lam(..)) && !self.is_marked_child(0);
                if !chained {
                    self.out.push(' ');
                }
                self.child(0, b, TERM);
            }
            Term::App(f, a) => {
                self.child(0, f, APP);
                self.out.push(' ');
                self.child(1, a, ATOM);
            }
            Term::Bang(b) => {
                self.out.push('!');
                self.child(0, b, ATOM);
            }
            Term::Let(x, u, b) => {
                let _ = write!(self.out, "let !{x} = ");
                self.child(0, u, TERM);
                self.out.push_str(" in ");
                self.child(1, b, TERM);
            }
        }
        if parens {
            self.out.push(')');
        }
        match marked {
            Some(Marker::Down) => self.out.push('<'),
            Some(Marker::Up) => self.out.push('>'),
            None => {}
        }
    }

    fn is_marked_child(&self, i: usize) -> bool {
        match self.mark {
            Some((p, _)) => p.len() == self.path.len() + 1 && p.starts_with(&self.path) && p[self.path.len()] == i,
            None => false,
        }
    }

    fn child(&mut self, i: usize, t: &Term, level: u8) {
        self.path.push(i);
        self.go(t, level);
        self.path.pop();
    }
}

/// Renders `t` with the subterm at `pos` wrapped in the direction marker.
pub fn render_marked(t: &Term, pos: &Position, marker: Marker) -> String {
    let mut p = Printer { out: String::new(), path: Vec::new(), mark: Some((&pos.0, marker)) };
    p.go(t, TERM);
    p.out
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut p = Printer { out: String::new(), path: Vec::new(), mark: None };
        p.go(self, TERM);
        f.write_str(&p.out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq, parse_open_term, parse_term, RankedAlphabet};
    use proptest::prelude::*;

    fn sigma() -> RankedAlphabet {
        RankedAlphabet::new([("S", 1), ("0", 0), ("a", 2)]).unwrap()
    }

    #[test]
    fn prints_with_minimal_parens() {
        for s in [
            "\\f. f 0",
            "\\l.\\r.\\x. l (r x)",
            "(\\x. x) 0",
            "S (S 0)",
            "let !x = S 0 in a x !(S x)",
            "a (\\x. x) 0",
            "(let !x = 0 in \\y. y) 0",
            "!(\\x. x)",
        ] {
            let t = parse_term(s, &sigma()).unwrap();
            assert_eq!(t.to_string(), s);
        }
    }

    #[test]
    fn marks_subterms() {
        let t = parse_term("\\l.\\r.\\x. l (r x)", &sigma()).unwrap();
        let pos = Position(vec![0, 0, 0, 0]);
        assert_eq!(render_marked(&t, &pos, Marker::Down), "\\l.\\r.\\x. >l< (r x)");
        let t = parse_term("(\\f. f 0) S", &sigma()).unwrap();
        assert_eq!(render_marked(&t, &Position(vec![0]), Marker::Up), "<(\\f. f 0)> S");
        assert_eq!(render_marked(&t, &Position(vec![0, 0]), Marker::Down), "(\\f. >f 0<) S");
        let t = parse_term("\\a.\\b. a b", &sigma()).unwrap();
        assert_eq!(render_marked(&t, &Position(vec![0]), Marker::Down), "\\a. >\\b. a b<");
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        let names = prop::sample::select(vec!["x", "y", "z"]);
        let leaf = prop_oneof![
            names.clone().prop_map(Term::var),
            prop::sample::select(vec!["S", "0", "a"]).prop_map(Term::cst),
        ];
        leaf.prop_recursive(5, 40, 2, move |inner| {
            prop_oneof![
                (names.clone(), inner.clone()).prop_map(|(x, b)| Term::lam(x, b)),
                (inner.clone(), inner.clone()).prop_map(|(f, a)| Term::app(f, a)),
                inner.clone().prop_map(Term::bang),
                (names.clone(), inner.clone(), inner).prop_map(|(x, u, b)| Term::let_bang(x, u, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(t in arb_term()) {
            let printed = t.to_string();
            let back = parse_open_term(&printed, &sigma(), &["x", "y", "z"]).unwrap();
            prop_assert!(alpha_eq(&back, &t), "{} vs {}", printed, back);
        }

        #[test]
        fn canonical_is_alpha_equal(t in arb_term()) {
            prop_assert!(alpha_eq(&t.canonical(), &t));
        }
    }
}
