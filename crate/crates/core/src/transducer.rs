//! λ-transducers, their evaluation, composition, GLS-transducers and the
//! reduction of GLS-transducers to λ-transducers, and the `?`-translation of
//! almost affine terms.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use indexmap::IndexMap;
use thiserror::Error;

use crate::format::{spec_lines, split_eq, SpecError, SpecLine};
use crate::iam::{iam_run, IamError, Variant};
use crate::reduction::{normalize_term, ReduceError};
use crate::syntax::{
    decode_tree, fresh, instantiate, parse_alphabet, parse_term, parse_type, DecodeError, Name, RankedAlphabet, Term,
    Tree, TreeError,
};
use crate::types::{classify_type, subst_base, Classification, Type};
use crate::typing::{check_type, check_type_with, constant_types, AnnotatedTerm, CheckOptions, NodeKind, TypeError, TypingContext};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransducerError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{what}: {source}")]
    Type {
        what: String,
        #[source]
        source: TypeError,
    },
    #[error("no rule for letter `{0}`")]
    MissingRule(String),
    #[error("rule for `{0}`, which is not an input letter")]
    UnknownLetter(String),
    #[error("invalid input tree: {0}")]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Iam(#[from] IamError),
    #[error("output alphabet {0} differs from input alphabet {1}")]
    AlphabetMismatch(String, String),
    #[error("not almost affine: {0}")]
    NotAlmostAffine(String),
    #[error("{0}")]
    Gls(String),
}

fn type_err(what: impl Into<String>) -> impl FnOnce(TypeError) -> TransducerError {
    let what = what.into();
    move |source| TransducerError::Type { what, source }
}

fn spec_err(line: usize) -> impl Fn(crate::syntax::ParseError) -> SpecError {
    move |source| SpecError::Parse { line, source }
}

/// A λ-transducer `Γ → Σ` with memory type `A`: one closed term
/// `t_a : A^rk(a) -o A` per input letter and an output term `u : A -o o`.
/// Rules are kept in normal form.
#[derive(Debug, Clone)]
pub struct LambdaTransducerSpec {
    pub input: RankedAlphabet,
    pub output: RankedAlphabet,
    pub memory: Type,
    pub rules: IndexMap<Name, Term>,
    pub out: Term,
    pub source_rules: IndexMap<Name, Term>,
    pub source_out: Term,
}

impl LambdaTransducerSpec {
    /// Type-checks and normalizes the rules.
    pub fn new(
        input: RankedAlphabet,
        output: RankedAlphabet,
        memory: Type,
        rules: IndexMap<Name, Term>,
        out: Term,
    ) -> Result<Self, TransducerError> {
        for a in rules.keys() {
            if !input.contains(a) {
                return Err(TransducerError::UnknownLetter(a.to_string()));
            }
        }
        let consts = constant_types(&output);
        let mut normal = IndexMap::new();
        for (a, rank) in input.letters() {
            let t = rules.get(a).ok_or_else(|| TransducerError::MissingRule(a.to_string()))?;
            let ty = Type::arrows(std::iter::repeat_n(memory.clone(), rank), memory.clone());
            check_type(&TypingContext::empty(), t, &ty, &consts).map_err(type_err(format!("rule {a}")))?;
            normal.insert(a.clone(), normalize_term(t, crate::reduction::DEFAULT_FUEL)?);
        }
        let out_ty = Type::arrow(memory.clone(), Type::Base);
        check_type(&TypingContext::empty(), &out, &out_ty, &consts).map_err(type_err("out"))?;
        let out_nf = normalize_term(&out, crate::reduction::DEFAULT_FUEL)?;
        let source_rules = input.letters().map(|(a, _)| (a.clone(), rules[a].clone())).collect();
        Ok(LambdaTransducerSpec { input, output, memory, rules: normal, out: out_nf, source_rules, source_out: out })
    }

    pub fn parse(text: &str) -> Result<Self, TransducerError> {
        let lines = spec_lines(text)?;
        let mut input = None;
        let mut output = None;
        let mut memory = None;
        let mut out = None;
        let mut pending_rules: Vec<(&SpecLine, Name, String)> = Vec::new();
        for l in &lines {
            match l.keyword.as_str() {
                "input" => input = Some(parse_alphabet(&l.rest).map_err(spec_err(l.line))?),
                "output" => output = Some(parse_alphabet(&l.rest).map_err(spec_err(l.line))?),
                "memory" => memory = Some(parse_type(&l.rest).map_err(spec_err(l.line))?),
                "rule" => {
                    let (a, t) = split_eq(l)?;
                    if a.is_empty() || a.contains(char::is_whitespace) {
                        return Err(SpecError::syntax(l.line, format!("bad rule head `{a}`")).into());
                    }
                    pending_rules.push((l, Name::from(a), t.to_string()));
                }
                "out" => {
                    let (lhs, t) = split_eq(l)?;
                    if !lhs.is_empty() {
                        return Err(SpecError::syntax(l.line, "expected `out = TERM`").into());
                    }
                    out = Some((l.line, t.to_string()));
                }
                other => return Err(SpecError::syntax(l.line, format!("unknown declaration `{other}`")).into()),
            }
        }
        let missing = |w: &str| SpecError::Invalid(format!("missing `{w}` declaration"));
        let input = input.ok_or_else(|| missing("input"))?;
        let output = output.ok_or_else(|| missing("output"))?;
        let memory = memory.ok_or_else(|| missing("memory"))?;
        let (out_line, out_src) = out.ok_or_else(|| missing("out"))?;
        let mut rules = IndexMap::new();
        for (l, a, src) in pending_rules {
            let t = parse_term(&src, &output).map_err(spec_err(l.line))?;
            if rules.insert(a.clone(), t).is_some() {
                return Err(SpecError::syntax(l.line, format!("second rule for `{a}`")).into());
            }
        }
        let out = parse_term(&out_src, &output).map_err(spec_err(out_line))?;
        Self::new(input, output, memory, rules, out)
    }

    /// The spec in file syntax, with the normalized rules.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "input {}", self.input).unwrap();
        writeln!(s, "output {}", self.output).unwrap();
        writeln!(s, "memory {}", self.memory).unwrap();
        for (a, t) in &self.rules {
            writeln!(s, "rule {a} = {t}").unwrap();
        }
        writeln!(s, "out = {}", self.out).unwrap();
        s
    }

    fn consts(&self) -> HashMap<Name, Type> {
        constant_types(&self.output)
    }

    pub fn rule_type(&self, a: &str) -> Type {
        let k = self.input.rank(a).unwrap_or(0);
        Type::arrows(std::iter::repeat_n(self.memory.clone(), k), self.memory.clone())
    }

    pub fn annotated_rule(&self, a: &str) -> AnnotatedTerm {
        check_type(&TypingContext::empty(), &self.rules[a], &self.rule_type(a), &self.consts())
            .expect("normal forms of typed rules are typed")
    }

    pub fn annotated_out(&self) -> AnnotatedTerm {
        let ty = Type::arrow(self.memory.clone(), Type::Base);
        check_type(&TypingContext::empty(), &self.out, &ty, &self.consts()).expect("normal forms of typed rules are typed")
    }

    /// The least tier containing every (normalized) rule and the output term.
    pub fn classification(&self) -> Classification {
        self.input
            .letters()
            .map(|(a, _)| self.annotated_rule(a).classify())
            .chain(std::iter::once(self.annotated_out().classify()))
            .max()
            .unwrap_or(Classification::PurelyAffine)
    }

    pub fn memory_classification(&self) -> Classification {
        classify_type(&self.memory)
    }

    /// `u (t_τ)`: the program whose normal form encodes the output.
    pub fn program(&self, tau: &Tree) -> Result<Term, TransducerError> {
        tau.validate(&self.input)?;
        let family: HashMap<Name, Term> = self.rules.iter().map(|(a, t)| (a.clone(), t.clone())).collect();
        let body = instantiate(tau, &family).map_err(|e| TransducerError::MissingRule(e.to_string()))?;
        Ok(Term::app(self.out.clone(), body))
    }

    pub fn annotated_program(&self, tau: &Tree) -> Result<AnnotatedTerm, TransducerError> {
        let v = self.program(tau)?;
        check_type(&TypingContext::empty(), &v, &Type::Base, &self.consts()).map_err(type_err("program"))
    }

    pub fn eval_normalize(&self, tau: &Tree, fuel: u64) -> Result<Tree, TransducerError> {
        let v = self.program(tau)?;
        let nf = normalize_term(&v, fuel)?;
        Ok(decode_tree(&nf, &self.output)?)
    }

    pub fn eval_iam(&self, tau: &Tree, variant: Variant, fuel: u64) -> Result<Tree, TransducerError> {
        let v = self.annotated_program(tau)?;
        Ok(iam_run(&v, variant, fuel)?)
    }
}

/// `g ∘ f`: memory `A_f{o := A_g}`, rules `t_a{c := t'_c}`, and output
/// `λx. u' (u{c := t'_c} x)`.
pub fn compose(f: &LambdaTransducerSpec, g: &LambdaTransducerSpec) -> Result<LambdaTransducerSpec, TransducerError> {
    if f.output != g.input {
        return Err(TransducerError::AlphabetMismatch(f.output.to_string(), g.input.to_string()));
    }
    let map: HashMap<Name, Term> = g.rules.iter().map(|(c, t)| (c.clone(), t.clone())).collect();
    let rules = f.rules.iter().map(|(a, t)| (a.clone(), t.subst_consts(&map))).collect();
    let x = Name::from("x");
    let out = Term::lam(
        x.clone(),
        Term::app(g.out.clone(), Term::app(f.out.subst_consts(&map), Term::Var(x))),
    );
    LambdaTransducerSpec::new(f.input.clone(), g.output.clone(), subst_base(&f.memory, &g.memory), rules, out)
}

/// The identity transducer on `sigma`, with memory `o`.
pub fn identity(sigma: &RankedAlphabet) -> LambdaTransducerSpec {
    let rules = sigma
        .letters()
        .map(|(a, k)| {
            let xs: Vec<Name> = (1..=k).map(|i| Name::from(format!("x{i}"))).collect();
            let body = Term::apps(Term::Const(a.clone()), xs.iter().map(|x| Term::Var(x.clone())));
            (a.clone(), Term::lams(xs, body))
        })
        .collect();
    LambdaTransducerSpec::new(sigma.clone(), sigma.clone(), Type::Base, rules, Term::lam("x", Term::var("x")))
        .expect("identity transducer is well-typed")
}

/// A rule `q⟨a(x1..xk)⟩ → t q1⟨x1⟩ ... qk⟨xk⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlsRule {
    pub term: Term,
    pub children: Vec<Name>,
}

/// A GLS-transducer: states with purely affine types, an initial state and
/// a partial rule table.
#[derive(Debug, Clone)]
pub struct GlsSpec {
    pub input: RankedAlphabet,
    pub output: RankedAlphabet,
    pub states: IndexMap<Name, Type>,
    pub init: Name,
    pub out: Term,
    pub rules: IndexMap<(Name, Name), GlsRule>,
}

impl GlsSpec {
    pub fn new(
        input: RankedAlphabet,
        output: RankedAlphabet,
        states: IndexMap<Name, Type>,
        init: Name,
        out: Term,
        rules: IndexMap<(Name, Name), GlsRule>,
    ) -> Result<Self, TransducerError> {
        let consts = constant_types(&output);
        for (q, ty) in &states {
            if classify_type(ty) != Classification::PurelyAffine {
                return Err(TransducerError::Gls(format!("state {q} has type {ty}, which is not purely affine")));
            }
        }
        let a0 = states.get(&init).ok_or_else(|| TransducerError::Gls(format!("unknown initial state {init}")))?;
        check_type(&TypingContext::empty(), &out, &Type::arrow(a0.clone(), Type::Base), &consts).map_err(type_err("out"))?;
        let mut normal = IndexMap::new();
        for ((q, a), r) in rules {
            let rank = input.rank(&a).ok_or_else(|| TransducerError::UnknownLetter(a.to_string()))?;
            if r.children.len() != rank {
                return Err(TransducerError::Gls(format!("rule {q} {a} names {} states, rank is {rank}", r.children.len())));
            }
            let ty_of = |s: &Name| states.get(s).cloned().ok_or_else(|| TransducerError::Gls(format!("unknown state {s}")));
            let args = r.children.iter().map(ty_of).collect::<Result<Vec<_>, _>>()?;
            let ty = Type::arrows(args, ty_of(&q)?);
            check_type(&TypingContext::empty(), &r.term, &ty, &consts).map_err(type_err(format!("rule {q} {a}")))?;
            let term = normalize_term(&r.term, crate::reduction::DEFAULT_FUEL)?;
            normal.insert((q, a), GlsRule { term, children: r.children });
        }
        let out = normalize_term(&out, crate::reduction::DEFAULT_FUEL)?;
        Ok(GlsSpec { input, output, states, init, out, rules: normal })
    }

    pub fn parse(text: &str) -> Result<Self, TransducerError> {
        let lines = spec_lines(text)?;
        let mut input = None;
        let mut output = None;
        let mut states = IndexMap::new();
        let mut init = None;
        let mut out_src = None;
        let mut rule_src = Vec::new();
        for l in &lines {
            match l.keyword.as_str() {
                "input" => input = Some(parse_alphabet(&l.rest).map_err(spec_err(l.line))?),
                "output" => output = Some(parse_alphabet(&l.rest).map_err(spec_err(l.line))?),
                "state" => {
                    let (q, ty) = l
                        .rest
                        .split_once(':')
                        .ok_or_else(|| SpecError::syntax(l.line, "expected `state NAME : TYPE`"))?;
                    let ty = parse_type(ty.trim()).map_err(spec_err(l.line))?;
                    states.insert(Name::from(q.trim()), ty);
                }
                "init" => init = Some(Name::from(l.rest.trim())),
                "out" => out_src = Some((l.line, split_eq(l)?.1.to_string())),
                "rule" => {
                    let (head, t) = split_eq(l)?;
                    let (lhs, rhs) = head.split_once("->").unwrap_or((head, ""));
                    let lhs: Vec<&str> = lhs.split_whitespace().collect();
                    let [q, a] = lhs[..] else {
                        return Err(SpecError::syntax(l.line, "expected `rule STATE LETTER [-> STATES] = TERM`").into());
                    };
                    let children = rhs.split_whitespace().map(Name::from).collect();
                    rule_src.push((l.line, Name::from(q), Name::from(a), children, t.to_string()));
                }
                other => return Err(SpecError::syntax(l.line, format!("unknown declaration `{other}`")).into()),
            }
        }
        let missing = |w: &str| SpecError::Invalid(format!("missing `{w}` declaration"));
        let input = input.ok_or_else(|| missing("input"))?;
        let output = output.ok_or_else(|| missing("output"))?;
        let init = init.ok_or_else(|| missing("init"))?;
        let (ol, os) = out_src.ok_or_else(|| missing("out"))?;
        let out = parse_term(&os, &output).map_err(spec_err(ol))?;
        let mut rules = IndexMap::new();
        for (line, q, a, children, src) in rule_src {
            let term = parse_term(&src, &output).map_err(spec_err(line))?;
            if rules.insert((q.clone(), a.clone()), GlsRule { term, children }).is_some() {
                return Err(SpecError::syntax(line, format!("second rule for {q} {a}")).into());
            }
        }
        Self::new(input, output, states, init, out, rules)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "input {}", self.input).unwrap();
        writeln!(s, "output {}", self.output).unwrap();
        for (q, ty) in &self.states {
            writeln!(s, "state {q} : {ty}").unwrap();
        }
        writeln!(s, "init {}", self.init).unwrap();
        writeln!(s, "out = {}", self.out).unwrap();
        for ((q, a), r) in &self.rules {
            write!(s, "rule {q} {a}").unwrap();
            if !r.children.is_empty() {
                write!(s, " ->").unwrap();
                for c in &r.children {
                    write!(s, " {c}").unwrap();
                }
            }
            writeln!(s, " = {}", r.term).unwrap();
        }
        s
    }

    /// A λ-transducer seen as a GLS-transducer with one state `q`.
    pub fn from_transducer(spec: &LambdaTransducerSpec) -> GlsSpec {
        let q = Name::from("q");
        let rules = spec
            .rules
            .iter()
            .map(|(a, t)| {
                let k = spec.input.rank(a).unwrap_or(0);
                ((q.clone(), a.clone()), GlsRule { term: t.clone(), children: vec![q.clone(); k] })
            })
            .collect();
        GlsSpec {
            input: spec.input.clone(),
            output: spec.output.clone(),
            states: IndexMap::from([(q.clone(), spec.memory.clone())]),
            init: q,
            out: spec.out.clone(),
            rules,
        }
    }

    /// `q⟨τ⟩⇓`, or an error naming the first node without a rule.
    pub fn build(&self, q: &Name, tau: &Tree) -> Result<Term, TransducerError> {
        let r = self
            .rules
            .get(&(q.clone(), tau.label.clone()))
            .ok_or_else(|| TransducerError::Gls(format!("no rule for state {q} on letter {}", tau.label)))?;
        r.children
            .iter()
            .zip(&tau.children)
            .try_fold(r.term.clone(), |acc, (qi, c)| Ok(Term::app(acc, self.build(qi, c)?)))
    }

    pub fn run(&self, tau: &Tree, fuel: u64) -> Result<Tree, TransducerError> {
        tau.validate(&self.input)?;
        let v = Term::app(self.out.clone(), self.build(&self.init, tau)?);
        let nf = normalize_term(&v, fuel)?;
        Ok(decode_tree(&nf, &self.output)?)
    }
}

pub fn gls_run(spec: &GlsSpec, tau: &Tree, fuel: u64) -> Result<Tree, TransducerError> {
    spec.run(tau, fuel)
}

/// The single type `A` of the type-constant encoding, with the injections
/// `ι_q : A_q -o A` and casts `cast_q : A -o A_q`.
#[derive(Debug, Clone)]
pub struct TypeConstant {
    pub ty: Type,
    pub iota: IndexMap<Name, Term>,
    pub cast: IndexMap<Name, Term>,
}

/// `λx1..xn. ℓ` for `C = D1 -o ... -o Dn -o o`.
pub fn dummy(c: &Type, ell: &Name) -> Term {
    let n = c.uncurry().0.len();
    Term::lams((1..=n).map(|i| format!("d{i}")), Term::Const(ell.clone()))
}

pub fn type_constant_encoding(spec: &GlsSpec) -> Result<TypeConstant, TransducerError> {
    let ell = spec
        .output
        .nullary()
        .next()
        .cloned()
        .ok_or_else(|| TransducerError::Gls("the output alphabet has no letter of rank 0".into()))?;
    let mut slots: Vec<Type> = Vec::new();
    let mut ranges = IndexMap::new();
    for (q, ty) in &spec.states {
        let (args, res) = ty.uncurry();
        if !res.is_base() {
            return Err(TransducerError::Gls(format!("state {q} has type {ty}, which does not end in o")));
        }
        let start = slots.len();
        slots.extend(args.into_iter().cloned());
        ranges.insert(q.clone(), start..slots.len());
    }
    let n = slots.len();
    let ty = Type::arrows(slots.clone(), Type::Base);
    let x = |i: usize| Name::from(format!("x{i}"));
    let mut iota = IndexMap::new();
    let mut cast = IndexMap::new();
    for (q, r) in &ranges {
        let own = Term::apps(Term::var("z"), r.clone().map(|i| Term::Var(x(i + 1))));
        iota.insert(q.clone(), Term::lam("z", Term::lams((1..=n).map(x), own)));
        let args = (0..n).map(|i| if r.contains(&i) { Term::Var(x(i + 1 - r.start)) } else { dummy(&slots[i], &ell) });
        let body = Term::apps(Term::var("y"), args);
        cast.insert(q.clone(), Term::lam("y", Term::lams((1..=r.len()).map(x), body)));
    }
    Ok(TypeConstant { ty, iota, cast })
}

/// The same transduction with every state of type `A`: rules become
/// `λy1..yk. ι_q (t (cast_q1 y1) ... (cast_qk yk))` and the output term
/// `λz. u (cast_q0 z)`.
pub fn make_type_constant(spec: &GlsSpec) -> Result<GlsSpec, TransducerError> {
    let enc = type_constant_encoding(spec)?;
    let mut rules = IndexMap::new();
    for ((q, a), r) in &spec.rules {
        let ys: Vec<Name> = (1..=r.children.len()).map(|i| Name::from(format!("y{i}"))).collect();
        let args = r.children.iter().zip(&ys).map(|(qi, y)| Term::app(enc.cast[qi].clone(), Term::Var(y.clone())));
        let body = Term::app(enc.iota[q].clone(), Term::apps(r.term.clone(), args));
        rules.insert((q.clone(), a.clone()), GlsRule { term: Term::lams(ys, body), children: r.children.clone() });
    }
    let out = Term::lam("z", Term::app(spec.out.clone(), Term::app(enc.cast[&spec.init].clone(), Term::var("z"))));
    let states = spec.states.keys().map(|q| (q.clone(), enc.ty.clone())).collect();
    GlsSpec::new(spec.input.clone(), spec.output.clone(), states, spec.init.clone(), out, rules)
}

/// Name of the relabeled letter for `a` read in state `q`.
pub fn relabeled_letter(a: &str, q: &str) -> Name {
    Name::from(format!("{a}@{q}"))
}

/// The top-down relabeling `a ↦ a@q` that records the state each node is
/// visited in.
#[derive(Debug, Clone)]
pub struct StateRelabeling {
    pub input: RankedAlphabet,
    pub output: RankedAlphabet,
    pub init: Name,
    pub children: IndexMap<(Name, Name), Vec<Name>>,
}

impl StateRelabeling {
    pub fn relabel(&self, tau: &Tree) -> Result<Tree, TransducerError> {
        tau.validate(&self.input)?;
        self.go(&self.init, tau)
    }

    fn go(&self, q: &Name, tau: &Tree) -> Result<Tree, TransducerError> {
        let qs = self
            .children
            .get(&(q.clone(), tau.label.clone()))
            .ok_or_else(|| TransducerError::Gls(format!("no rule for state {q} on letter {}", tau.label)))?;
        let children = qs.iter().zip(&tau.children).map(|(qi, c)| self.go(qi, c)).collect::<Result<_, _>>()?;
        Ok(Tree::new(relabeled_letter(&tau.label, q), children))
    }
}

/// Splits a GLS-transducer whose states all share one type into a
/// relabeling and a λ-transducer over the relabeled alphabet.
pub fn split_state_relabeling(spec: &GlsSpec) -> Result<(StateRelabeling, LambdaTransducerSpec), TransducerError> {
    let mut tys = spec.states.values();
    let ty = tys.next().cloned().ok_or_else(|| TransducerError::Gls("no states".into()))?;
    if tys.any(|t| *t != ty) {
        return Err(TransducerError::Gls("states have different types; apply make_type_constant first".into()));
    }
    let mut letters = Vec::new();
    let mut rules = IndexMap::new();
    let mut children = IndexMap::new();
    for ((q, a), r) in &spec.rules {
        let l = relabeled_letter(a, q);
        letters.push((l.clone(), r.children.len()));
        rules.insert(l, r.term.clone());
        children.insert((q.clone(), a.clone()), r.children.clone());
    }
    let relabeled = RankedAlphabet::new(letters).map_err(|e| TransducerError::Gls(e.to_string()))?;
    let relabel = StateRelabeling {
        input: spec.input.clone(),
        output: relabeled.clone(),
        init: spec.init.clone(),
        children,
    };
    let lt = LambdaTransducerSpec::new(relabeled, spec.output.clone(), ty, rules, spec.out.clone())?;
    Ok((relabel, lt))
}

/// The η-long form of a β-normal, `!`-free term of type `ty` whose free
/// variables and constants have the types in `env` and `consts`.
pub fn eta_long(t: &Term, ty: &Type, consts: &HashMap<Name, Type>) -> Option<Term> {
    fn go(t: &Term, ty: &Type, env: &mut Vec<(Name, Type)>, consts: &HashMap<Name, Type>, avoid: &mut BTreeSet<Name>) -> Option<Term> {
        match (t, ty) {
            (Term::Lam(x, b), Type::Arrow(a, r)) => {
                env.push((x.clone(), (**a).clone()));
                let b = go(b, r, env, consts, avoid);
                env.pop();
                Some(Term::lam(x.clone(), b?))
            }
            (_, Type::Arrow(..)) => {
                let x = fresh("e", avoid);
                avoid.insert(x.clone());
                go(&Term::lam(x.clone(), Term::app(t.clone(), Term::Var(x))), ty, env, consts, avoid)
            }
            (_, Type::Base) => {
                let (head, args) = t.spine();
                let hty = match head {
                    Term::Var(x) => env.iter().rev().find(|(y, _)| y == x)?.1.clone(),
                    Term::Const(c) => consts.get(c)?.clone(),
                    _ => return None,
                };
                let (params, _) = hty.uncurry();
                if params.len() != args.len() {
                    return None;
                }
                let mut out = head.clone();
                for (a, p) in args.iter().zip(params) {
                    out = Term::app(out, go(a, p, env, consts, avoid)?);
                }
                Some(out)
            }
            _ => None,
        }
    }
    let mut avoid = t.all_names();
    go(t, ty, &mut Vec::new(), consts, &mut avoid)
}

/// Binders (λ or let) whose variable is never used.
pub fn discarded_variables(t: &Term) -> Vec<Name> {
    let mut out = Vec::new();
    t.visit(&mut |s| match s {
        Term::Lam(x, b) | Term::Let(x, _, b) if b.occurrences(x) == 0 => out.push(x.clone()),
        _ => {}
    });
    out
}

/// The `?`-translation of an almost affine `!`-free term: variables and
/// λ-binders of type `o` are boxed, constants are lifted to `!o`.
pub fn wn_translate(t: &AnnotatedTerm) -> Result<Term, TransducerError> {
    for id in 0..t.len() {
        let n = t.node(id);
        match &n.kind {
            NodeKind::Bang | NodeKind::Let(_) => {
                return Err(TransducerError::NotAlmostAffine("the term contains `!` or `let`".into()))
            }
            NodeKind::Lam(x) => {
                let Type::Arrow(a, _) = &n.ty else { unreachable!("λ has an arrow type") };
                if n.occurrences.len() > 1 && !a.is_base() {
                    return Err(TransducerError::NotAlmostAffine(format!("`{x}` of type {a} is used more than once")));
                }
            }
            _ => {}
        }
    }
    let mut avoid = t.term().all_names();
    avoid.extend(t.term().constants());
    Ok(wn(t, t.root(), &mut avoid))
}

/// `λ!x. body = λy. let !x = y in body`.
fn lam_bang(x: Name, body: Term, avoid: &mut BTreeSet<Name>) -> Term {
    let y = fresh("w", avoid);
    avoid.insert(y.clone());
    Term::lam(y.clone(), Term::let_bang(x, Term::Var(y), body))
}

fn wn(t: &AnnotatedTerm, id: usize, avoid: &mut BTreeSet<Name>) -> Term {
    let n = t.node(id);
    match &n.kind {
        NodeKind::Const(c) => {
            let k = n.ty.uncurry().0.len();
            let xs: Vec<Name> = (0..k)
                .map(|_| {
                    let x = fresh("v", avoid);
                    avoid.insert(x.clone());
                    x
                })
                .collect();
            let body = Term::bang(Term::apps(Term::Const(c.clone()), xs.iter().map(|x| Term::Var(x.clone()))));
            xs.into_iter().rev().fold(body, |b, x| lam_bang(x, b, avoid))
        }
        NodeKind::Var(x) if n.ty.is_base() => Term::bang(Term::Var(x.clone())),
        NodeKind::Var(x) => Term::Var(x.clone()),
        NodeKind::Lam(x) => {
            let Type::Arrow(a, _) = &n.ty else { unreachable!("λ has an arrow type") };
            let body = wn(t, n.children[0], avoid);
            if a.is_base() {
                lam_bang(x.clone(), body, avoid)
            } else {
                Term::lam(x.clone(), body)
            }
        }
        NodeKind::App => {
            let f = wn(t, n.children[0], avoid);
            Term::app(f, wn(t, n.children[1], avoid))
        }
        NodeKind::Bang | NodeKind::Let(_) => unreachable!("rejected before translation"),
    }
}

/// Type-checks an almost affine term (variables of type `o` may be reused).
pub fn check_almost_affine(t: &Term, ty: &Type, sigma: &RankedAlphabet) -> Result<AnnotatedTerm, TransducerError> {
    check_type_with(&TypingContext::empty(), t, ty, &constant_types(sigma), CheckOptions { almost_affine: true })
        .map_err(type_err("almost affine term"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::DEFAULT_FUEL;
    use crate::syntax::{alpha_eq, parse_tree};

    const COUNT: &str = "\
input { a:2, b:1, c:0 }
output { S:1, 0:0 }
memory o -o o
rule a = \\l.\\r.\\x. l (r x)
rule b = \\f.\\x. S (f x)
rule c = S
out = \\f. f 0
";

    const SEQ_NAT: &str = "\
input { S:1, 0:0 }
output { S:1, 0:0, cons:2, nil:0 }
memory !o -o o
rule 0 = \\x. nil
rule S = \\g.\\x. let !y = x in cons y (g !(S y))
out = \\g. g !(S 0)
";

    fn tree(s: &str, sigma: &RankedAlphabet) -> Tree {
        parse_tree(s, sigma).unwrap()
    }

    #[test]
    fn count_example() {
        let spec = LambdaTransducerSpec::parse(COUNT).unwrap();
        let tau = tree("a(b(c),c)", &spec.input);
        assert_eq!(spec.eval_normalize(&tau, DEFAULT_FUEL).unwrap().to_string(), "S(S(S(0)))");
        assert_eq!(spec.eval_iam(&tau, Variant::Auto, DEFAULT_FUEL).unwrap().to_string(), "S(S(S(0)))");
        assert_eq!(spec.classification(), Classification::PurelyAffine);
        assert_eq!(
            spec.program(&tau).unwrap().to_string(),
            "(\\f. f 0) ((\\l.\\r.\\x. l (r x)) ((\\f.\\x. S (f x)) S) S)"
        );
    }

    #[test]
    fn seq_nat_example() {
        let spec = LambdaTransducerSpec::parse(SEQ_NAT).unwrap();
        assert_eq!(spec.classification(), Classification::AlmostPurelyAffine);
        let tau = tree("S(S(0))", &spec.input);
        let expected = "cons(S(0),cons(S(S(0)),nil))";
        assert_eq!(spec.eval_normalize(&tau, DEFAULT_FUEL).unwrap().to_string(), expected);
        assert_eq!(spec.eval_iam(&tau, Variant::Auto, DEFAULT_FUEL).unwrap().to_string(), expected);
        let zero = tree("0", &spec.input);
        assert_eq!(spec.eval_normalize(&zero, DEFAULT_FUEL).unwrap().to_string(), "nil");
    }

    #[test]
    fn text_round_trip() {
        let spec = LambdaTransducerSpec::parse(SEQ_NAT).unwrap();
        let again = LambdaTransducerSpec::parse(&spec.to_text()).unwrap();
        for (a, t) in &spec.rules {
            assert!(alpha_eq(t, &again.rules[a]));
        }
        assert_eq!(again.memory, spec.memory);
    }

    #[test]
    fn rejects_ill_typed_rules() {
        let bad = COUNT.replace("rule c = S", "rule c = 0");
        assert!(matches!(LambdaTransducerSpec::parse(&bad), Err(TransducerError::Type { .. })));
        let missing = COUNT.replace("rule c = S\n", "");
        assert!(matches!(LambdaTransducerSpec::parse(&missing), Err(TransducerError::MissingRule(_))));
        let dup = COUNT.replace("rule c = S", "rule c = S\nrule c = S");
        assert!(matches!(LambdaTransducerSpec::parse(&dup), Err(TransducerError::Spec(_))));
    }

    #[test]
    fn composition_with_identity() {
        let count = LambdaTransducerSpec::parse(COUNT).unwrap();
        let id = identity(&count.output);
        let c = compose(&count, &id).unwrap();
        let tau = tree("a(a(c,c),b(c))", &count.input);
        assert_eq!(c.eval_normalize(&tau, DEFAULT_FUEL).unwrap(), count.eval_normalize(&tau, DEFAULT_FUEL).unwrap());
    }

    #[test]
    fn count_then_seq_nat() {
        let count = LambdaTransducerSpec::parse(COUNT).unwrap();
        let seq = LambdaTransducerSpec::parse(SEQ_NAT).unwrap();
        let c = compose(&count, &seq).unwrap();
        assert_eq!(c.memory.to_string(), "(!o -o o) -o !o -o o");
        assert_eq!(c.memory_classification(), Classification::AlmostPurelyAffine);
        let tau = tree("a(c,c)", &count.input);
        assert_eq!(c.eval_normalize(&tau, DEFAULT_FUEL).unwrap().to_string(), "cons(S(0),cons(S(S(0)),nil))");
        assert_eq!(c.eval_iam(&tau, Variant::Auto, DEFAULT_FUEL).unwrap().to_string(), "cons(S(0),cons(S(S(0)),nil))");
    }

    #[test]
    fn single_state_gls_agrees() {
        let count = LambdaTransducerSpec::parse(COUNT).unwrap();
        let g = GlsSpec::from_transducer(&count);
        let tau = tree("a(b(c),a(c,c))", &count.input);
        assert_eq!(g.run(&tau, DEFAULT_FUEL).unwrap(), count.eval_normalize(&tau, DEFAULT_FUEL).unwrap());
        let again = GlsSpec::parse(&g.to_text()).unwrap();
        assert_eq!(again.run(&tau, DEFAULT_FUEL).unwrap(), count.eval_normalize(&tau, DEFAULT_FUEL).unwrap());
    }

    #[test]
    fn eta_long_expands_by_type() {
        let sigma = RankedAlphabet::new([("a", 2), ("c", 0)]).unwrap();
        let t = parse_term("a", &sigma).unwrap();
        let e = eta_long(&t, &Type::constant(2), &constant_types(&sigma)).unwrap();
        assert!(alpha_eq(&e, &parse_term("\\x.\\y. a x y", &sigma).unwrap()), "{e}");
    }

    #[test]
    fn discards_are_found() {
        let sigma = RankedAlphabet::new([("c", 0)]).unwrap();
        let t = parse_term("\\x.\\y. y", &sigma).unwrap();
        assert_eq!(discarded_variables(&t), vec![Name::from("x")]);
    }

    #[test]
    fn wn_translation_of_duplicating_term() {
        let sigma = RankedAlphabet::new([("a", 2), ("b", 1), ("c", 0)]).unwrap();
        let src = "(\\y.\\f.\\g. (\\x. f x x) (g y y)) (b c) a (\\p.\\q. a q p)";
        let t = parse_term(src, &sigma).unwrap();
        let at = check_almost_affine(&t, &Type::Base, &sigma).unwrap();
        let q = wn_translate(&at).unwrap();
        let ty = Type::bang(Type::Base);
        let typed = check_type(&TypingContext::empty(), &q, &ty, &constant_types(&sigma)).unwrap();
        assert!(typed.classify() <= Classification::AlmostPurelyAffine);
        let nf = normalize_term(&q, DEFAULT_FUEL).unwrap();
        let expected = normalize_term(&t, DEFAULT_FUEL).unwrap();
        assert_eq!(nf, Term::bang(expected.clone()));
        assert_eq!(decode_tree(&expected, &sigma).unwrap().to_string(), "a(a(b(c),b(c)),a(b(c),b(c)))");
    }

    #[test]
    fn wn_rejects_shared_functions() {
        let sigma = RankedAlphabet::new([("b", 1), ("c", 0)]).unwrap();
        let t = parse_term("(\\f. f (f c)) b", &sigma).unwrap();
        assert!(check_almost_affine(&t, &Type::Base, &sigma).is_err());
    }
}
