//! Seeded random trees and terms, and differential testing of the
//! evaluation backends against normalization.

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::compile::{compile_to_iptt, compile_to_twt, CompileError};
use crate::iam::{Iam, SingleStack, Variant};
use crate::syntax::{Name, RankedAlphabet, Term, Tree};
use crate::transducer::{make_type_constant, split_state_relabeling, GlsSpec, LambdaTransducerSpec, TransducerError};
use crate::treegen::{Frontier, MachineResult, Trace};
use crate::types::{Classification, Type};
use crate::walking::{iptt_run, twt_run, IpttSpec, TreeIndex, TwtSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("the alphabet has no letter of rank 0")]
    NoNullaryLetter,
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Transducer(#[from] TransducerError),
}

/// Seeded generator of trees of size at most `bound`. Letters are drawn in
/// proportion to their weight (1 unless set).
#[derive(Debug, Clone)]
pub struct TreeGen {
    pub seed: u64,
    pub alphabet: RankedAlphabet,
    pub bound: usize,
    pub weights: HashMap<Name, u32>,
}

impl TreeGen {
    pub fn new(seed: u64, alphabet: RankedAlphabet, bound: usize) -> Self {
        TreeGen { seed, alphabet, bound, weights: HashMap::new() }
    }

    pub fn weight(mut self, letter: &str, w: u32) -> Self {
        self.weights.insert(Name::from(letter), w);
        self
    }

    /// `n` trees from one stream seeded by `seed`.
    pub fn sample(&self, n: usize) -> Result<Vec<Tree>, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..n).map(|_| self.next(&mut rng)).collect()
    }

    /// One tree; the target size is uniform in `1..=bound`.
    pub fn next(&self, rng: &mut impl Rng) -> Result<Tree, HarnessError> {
        if self.alphabet.nullary().next().is_none() {
            return Err(HarnessError::NoNullaryLetter);
        }
        let target = rng.gen_range(1..=self.bound.max(1));
        Ok(self.grow(rng, target))
    }

    fn pick<'a>(&self, rng: &mut impl Rng, letters: &[(&'a Name, usize)]) -> Option<(&'a Name, usize)> {
        letters
            .choose_weighted(rng, |(a, _)| self.weights.get(*a).copied().unwrap_or(1))
            .ok()
            .copied()
    }

    fn grow(&self, rng: &mut impl Rng, budget: usize) -> Tree {
        let inner: Vec<(&Name, usize)> = self.alphabet.letters().filter(|&(_, k)| k > 0 && k < budget).collect();
        let leaves: Vec<(&Name, usize)> = self.alphabet.letters().filter(|&(_, k)| k == 0).collect();
        let (a, k) = match self.pick(rng, &inner) {
            Some(l) => l,
            None => self
                .pick(rng, &leaves)
                .or_else(|| leaves.first().copied())
                .expect("checked: a nullary letter exists"),
        };
        // Split the rest of the budget into k positive parts.
        let rest = budget - 1;
        let mut cuts: Vec<usize> = (1..rest).collect();
        cuts.shuffle(rng);
        let mut cuts: Vec<usize> = cuts.into_iter().take(k.saturating_sub(1)).collect();
        cuts.sort_unstable();
        let mut prev = 0;
        let mut children = Vec::with_capacity(k);
        for i in 0..k {
            let end = if i + 1 == k { rest } else { cuts[i] };
            children.push(self.grow(rng, end - prev));
            prev = end;
        }
        Tree::new(a.clone(), children)
    }
}

pub fn gen_tree(gen: &TreeGen) -> Result<Tree, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
    gen.next(&mut rng)
}

/// Seeded generator of closed, well-typed terms over an output alphabet,
/// with β-redexes and, when `bangs` is set, boxes and `let !`.
pub struct TermGen {
    rng: ChaCha8Rng,
    sigma: RankedAlphabet,
    bangs: bool,
    fresh: usize,
}

#[derive(Default)]
struct Env {
    affine: Vec<(Name, Type, bool)>,
    unrestricted: Vec<(Name, Type)>,
}

/// The arguments `f : A1 -o .. -o An -o ty` takes to reach `ty`.
fn args_to<'a>(f: &'a Type, ty: &Type) -> Option<Vec<&'a Type>> {
    let mut args = Vec::new();
    let mut t = f;
    loop {
        if t == ty {
            return Some(args);
        }
        match t {
            Type::Arrow(a, b) => {
                args.push(&**a);
                t = b;
            }
            _ => return None,
        }
    }
}

impl TermGen {
    pub fn new(seed: u64, sigma: RankedAlphabet, bangs: bool) -> Self {
        TermGen { rng: ChaCha8Rng::seed_from_u64(seed), sigma, bangs, fresh: 0 }
    }

    /// A small random type.
    pub fn small_type(&mut self) -> Type {
        let o = || Type::Base;
        let oo = || Type::arrow(Type::Base, Type::Base);
        let mut pool = vec![o(), oo(), Type::arrow(oo(), o()), Type::arrows([o(), o()], o())];
        if self.bangs {
            pool.extend([Type::bang(o()), Type::arrow(Type::bang(o()), o()), Type::bang(oo())]);
        }
        pool.choose(&mut self.rng).cloned().expect("pool is not empty")
    }

    /// A closed term of type `ty` with roughly `size` constructors.
    pub fn term(&mut self, ty: &Type, size: usize) -> Term {
        self.gen(ty, size, &mut Env::default())
    }

    fn name(&mut self) -> Name {
        self.fresh += 1;
        Name::from(format!("x{}", self.fresh))
    }

    fn gen(&mut self, ty: &Type, size: usize, env: &mut Env) -> Term {
        // Heads: variables whose type ends in `ty`.
        let mut heads: Vec<(Name, Vec<Type>, Option<usize>)> = Vec::new();
        for (i, (x, t, used)) in env.affine.iter().enumerate() {
            if let Some(args) = args_to(t, ty).filter(|_| !used) {
                heads.push((x.clone(), args.into_iter().cloned().collect(), Some(i)));
            }
        }
        for (x, t) in &env.unrestricted {
            if let Some(args) = args_to(t, ty) {
                heads.push((x.clone(), args.into_iter().cloned().collect(), None));
            }
        }
        if size > 0 && !heads.is_empty() {
            heads.retain(|h| h.1.len() < size);
        } else {
            heads.retain(|h| h.1.is_empty());
        }
        let choice = if size <= 1 {
            if heads.is_empty() { 1 } else { self.rng.gen_range(0..2) }
        } else {
            self.rng.gen_range(0..if self.bangs { 5 } else { 4 })
        };
        match choice {
            0 if !heads.is_empty() => {
                let (x, args, lin) = heads.swap_remove(self.rng.gen_range(0..heads.len()));
                if let Some(i) = lin {
                    env.affine[i].2 = true;
                }
                let per = size.saturating_sub(1) / args.len().max(1);
                let args: Vec<Term> = args.iter().map(|a| self.gen(a, per, env)).collect();
                Term::apps(Term::Var(x), args)
            }
            2 => {
                let a = self.small_type();
                let x = self.name();
                env.affine.push((x.clone(), a.clone(), false));
                let body = self.gen(ty, size / 2, env);
                env.affine.pop();
                let arg = self.gen(&a, size / 2, env);
                Term::app(Term::lam(x, body), arg)
            }
            4 => {
                let a = self.small_type();
                let x = self.name();
                let bound = self.gen(&Type::bang(a.clone()), size / 3, env);
                env.unrestricted.push((x.clone(), a));
                let body = self.gen(ty, size - size / 3 - 1, env);
                env.unrestricted.pop();
                Term::let_bang(x, bound, body)
            }
            _ => self.intro(ty, size, env),
        }
    }

    fn intro(&mut self, ty: &Type, size: usize, env: &mut Env) -> Term {
        match ty {
            Type::Arrow(a, b) => {
                let x = self.name();
                env.affine.push((x.clone(), (**a).clone(), false));
                let body = self.gen(b, size.saturating_sub(1), env);
                env.affine.pop();
                Term::lam(x, body)
            }
            Type::Bang(a) => {
                let mut boxed = Env { affine: Vec::new(), unrestricted: env.unrestricted.clone() };
                Term::bang(self.gen(a, size.saturating_sub(1), &mut boxed))
            }
            Type::Base => {
                let letters: Vec<(Name, usize)> = self
                    .sigma
                    .letters()
                    .filter(|&(_, k)| if size <= 1 { k == 0 } else { k < size })
                    .map(|(a, k)| (a.clone(), k))
                    .collect();
                let (c, k) = letters
                    .choose(&mut self.rng)
                    .cloned()
                    .or_else(|| self.sigma.nullary().next().map(|a| (a.clone(), 0)))
                    .expect("the alphabet has a letter of rank 0");
                let per = size.saturating_sub(1) / k.max(1);
                let args: Vec<Term> = (0..k).map(|_| self.gen(&Type::Base, per, env)).collect();
                Term::apps(Term::Const(c), args)
            }
        }
    }
}

/// An evaluation route for a spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Normalize,
    Iam,
    SingleStack,
    Twt,
    Iptt,
    Gls,
    GlsTypeConstant,
    GlsSplit,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Normalize => "normalize",
            Backend::Iam => "iam",
            Backend::SingleStack => "single-stack",
            Backend::Twt => "twt",
            Backend::Iptt => "iptt",
            Backend::Gls => "gls",
            Backend::GlsTypeConstant => "gls-type-constant",
            Backend::GlsSplit => "gls-split",
        })
    }
}

/// Every backend that applies to a λ-transducer, with the compiled
/// walkers built once.
pub struct Backends<'a> {
    spec: &'a LambdaTransducerSpec,
    twt: Option<TwtSpec>,
    iptt: Option<IpttSpec>,
    list: Vec<Backend>,
}

impl<'a> Backends<'a> {
    pub fn new(spec: &'a LambdaTransducerSpec) -> Result<Self, HarnessError> {
        let class = spec.classification();
        let mut list = vec![Backend::Normalize];
        let mut twt = None;
        let mut iptt = None;
        if class <= Classification::AlmostDepth1 {
            list.extend([Backend::Iam, Backend::SingleStack]);
            iptt = Some(compile_to_iptt(spec)?);
            list.push(Backend::Iptt);
        }
        if class <= Classification::AlmostPurelyAffine {
            twt = Some(compile_to_twt(spec)?);
            list.push(Backend::Twt);
        }
        Ok(Backends { spec, twt, iptt, list })
    }

    pub fn list(&self) -> &[Backend] {
        &self.list
    }

    pub fn run(&self, b: Backend, tau: &Tree, fuel: u64) -> Result<Tree, String> {
        let s = self.spec;
        match b {
            Backend::Normalize => s.eval_normalize(tau, fuel).map_err(|e| e.to_string()),
            Backend::Iam => s.eval_iam(tau, Variant::Auto, fuel).map_err(|e| e.to_string()),
            Backend::SingleStack => s.eval_iam(tau, Variant::SingleStack, fuel).map_err(|e| e.to_string()),
            Backend::Twt => twt_run(self.twt.as_ref().ok_or("not compiled")?, tau, fuel).map_err(|e| e.to_string()),
            Backend::Iptt => iptt_run(self.iptt.as_ref().ok_or("not compiled")?, tau, fuel).map_err(|e| e.to_string()),
            _ => Err(format!("{b} does not apply to λ-transducers")),
        }
    }

    /// The first step at which the run of `b` commits output that is not
    /// part of `expected`, or the last step if it never finishes.
    pub fn divergence(&self, b: Backend, tau: &Tree, expected: &Tree, fuel: u64) -> Option<String> {
        let t = TreeIndex::new(tau);
        match b {
            Backend::Iam | Backend::SingleStack => {
                let v = self.spec.annotated_program(tau).ok()?;
                if b == Backend::SingleStack {
                    let m = SingleStack::new(&v);
                    first_divergence(&m.trace(fuel), expected, &|c| m.show(c))
                } else {
                    let variant = Variant::for_tier(v.classify())?;
                    let m = Iam::new(&v, variant);
                    first_divergence(&m.trace(fuel), expected, &|c| m.show(c))
                }
            }
            Backend::Twt => first_divergence(&self.twt.as_ref()?.trace(tau, fuel), expected, &|c| c.show(&t)),
            Backend::Iptt => first_divergence(&self.iptt.as_ref()?.trace(tau, fuel), expected, &|c| c.show(&t)),
            _ => None,
        }
    }
}

fn compatible<K>(f: &Frontier<K>, t: &Tree) -> bool {
    match f {
        Frontier::Pending(_) => true,
        Frontier::Node(a, cs) => {
            *a == t.label && cs.len() == t.children.len() && cs.iter().zip(&t.children).all(|(c, u)| compatible(c, u))
        }
    }
}

pub fn first_divergence<K>(trace: &Trace<K>, expected: &Tree, show: &dyn Fn(&K) -> String) -> Option<String> {
    let bad = trace.entries.iter().position(|e| !compatible(&e.frontier, expected));
    let i = match (bad, &trace.result) {
        (Some(i), _) => i,
        (None, MachineResult::Output(_)) => return None,
        (None, _) => trace.entries.len().checked_sub(1)?,
    };
    Some(format!("step {i}: {}", trace.entries[i].frontier.render(show)))
}

#[derive(Debug, Clone)]
pub struct Mismatch {
    pub case: usize,
    pub input: Tree,
    pub reference: Backend,
    pub expected: Result<Tree, String>,
    pub backend: Backend,
    pub got: Result<Tree, String>,
    pub divergence: Option<String>,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |r: &Result<Tree, String>| match r {
            Ok(t) => t.to_string(),
            Err(e) => format!("error: {e}"),
        };
        writeln!(f, "case {}: input {}", self.case, self.input)?;
        writeln!(f, "  {}: {}", self.reference, show(&self.expected))?;
        write!(f, "  {}: {}", self.backend, show(&self.got))?;
        if let Some(d) = &self.divergence {
            write!(f, "\n  first divergence at {d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DiffReport {
    pub backends: Vec<Backend>,
    pub cases: usize,
    pub agreed: usize,
    pub mismatches: Vec<Mismatch>,
}

impl DiffReport {
    pub fn ok(&self) -> bool {
        self.agreed == self.cases
    }
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.mismatches {
            writeln!(f, "{m}")?;
        }
        let names: Vec<String> = self.backends.iter().map(|b| b.to_string()).collect();
        write!(f, "{}/{} agree ({})", self.agreed, self.cases, names.join(", "))
    }
}

/// A size bound for random inputs that keeps outputs small: almost
/// depth-1 transducers can grow doubly exponentially.
pub fn default_max_size(spec: &LambdaTransducerSpec) -> usize {
    if spec.classification() >= Classification::AlmostDepth1 {
        4
    } else {
        12
    }
}

fn collect(
    inputs: Vec<Tree>,
    backends: Vec<Backend>,
    run: impl Fn(Backend, &Tree) -> Result<Tree, String>,
    explain: impl Fn(Backend, &Tree, &Tree) -> Option<String>,
) -> DiffReport {
    let mut report = DiffReport { backends: backends.clone(), cases: inputs.len(), agreed: 0, mismatches: Vec::new() };
    let (reference, others) = backends.split_first().expect("at least one backend");
    for (case, tau) in inputs.into_iter().enumerate() {
        let expected = run(*reference, &tau);
        let mut agree = expected.is_ok();
        for &b in others {
            let got = run(b, &tau);
            if expected.is_err() || got != expected {
                agree = false;
                let divergence = expected.as_ref().ok().and_then(|e| explain(b, &tau, e));
                report.mismatches.push(Mismatch {
                    case,
                    input: tau.clone(),
                    reference: *reference,
                    expected: expected.clone(),
                    backend: b,
                    got,
                    divergence,
                });
            }
        }
        report.agreed += usize::from(agree);
    }
    report
}

/// Runs `cases` random inputs through every applicable backend and
/// compares each against normalization.
pub fn difftest(
    spec: &LambdaTransducerSpec,
    seed: u64,
    cases: usize,
    max_size: usize,
    fuel: u64,
) -> Result<DiffReport, HarnessError> {
    let inputs = TreeGen::new(seed, spec.input.clone(), max_size).sample(cases)?;
    let b = Backends::new(spec)?;
    Ok(collect(inputs, b.list().to_vec(), |k, t| b.run(k, t, fuel), |k, t, e| b.divergence(k, t, e, fuel)))
}

/// Compares a GLS-transducer with its type-constant form and with the
/// relabeling followed by the resulting λ-transducer.
pub fn gls_difftest(spec: &GlsSpec, seed: u64, cases: usize, max_size: usize, fuel: u64) -> Result<DiffReport, HarnessError> {
    let inputs = TreeGen::new(seed, spec.input.clone(), max_size).sample(cases)?;
    let constant = make_type_constant(spec)?;
    let (relabel, lt) = split_state_relabeling(&constant)?;
    let run = |b: Backend, tau: &Tree| -> Result<Tree, String> {
        let r = match b {
            Backend::Gls => spec.run(tau, fuel),
            Backend::GlsTypeConstant => constant.run(tau, fuel),
            _ => relabel.relabel(tau).and_then(|t| lt.eval_normalize(&t, fuel)),
        };
        r.map_err(|e| e.to_string())
    };
    let backends = vec![Backend::Gls, Backend::GlsTypeConstant, Backend::GlsSplit];
    Ok(collect(inputs, backends, run, |_, _, _| None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::reduction::DEFAULT_FUEL;
    use crate::syntax::parse_alphabet;
    use crate::typing::{check_type, constant_types, TypingContext};
    use proptest::prelude::*;

    fn abc() -> RankedAlphabet {
        parse_alphabet("{ a:2, b:1, c:0 }").unwrap()
    }

    #[test]
    fn tree_examples() {
        let only_c = parse_alphabet("{ c:0 }").unwrap();
        assert_eq!(gen_tree(&TreeGen::new(1, only_c, 1)).unwrap().to_string(), "c");
        let no_leaf = parse_alphabet("{ b:1 }").unwrap();
        assert!(matches!(gen_tree(&TreeGen::new(1, no_leaf, 5)), Err(HarnessError::NoNullaryLetter)));
    }

    #[test]
    fn weights_steer_letters() {
        let g = TreeGen::new(3, abc(), 20).weight("a", 0);
        for t in g.sample(50).unwrap() {
            assert!(!t.to_string().contains('a'), "{t}");
        }
    }

    proptest! {
        #[test]
        fn trees_are_valid_bounded_and_deterministic(seed in any::<u64>(), bound in 1usize..40) {
            let g = TreeGen::new(seed, abc(), bound);
            let t = gen_tree(&g).unwrap();
            prop_assert!(t.size() <= bound);
            prop_assert!(t.validate(&g.alphabet).is_ok());
            prop_assert_eq!(t, gen_tree(&g).unwrap());
        }

        #[test]
        fn generated_terms_typecheck(seed in any::<u64>(), bangs in any::<bool>()) {
            let mut g = TermGen::new(seed, abc(), bangs);
            let ty = g.small_type();
            let t = g.term(&ty, 12);
            let consts = constant_types(&abc());
            prop_assert!(check_type(&TypingContext::empty(), &t, &ty, &consts).is_ok(), "{} : {}", t, ty);
        }
    }

    #[test]
    fn corpus_difftests_agree() {
        for (name, text) in corpus::TRANSDUCERS {
            let spec = LambdaTransducerSpec::parse(text).unwrap();
            let r = difftest(&spec, 7, 10, default_max_size(&spec), DEFAULT_FUEL).unwrap();
            assert!(r.ok(), "{name}:\n{r}");
        }
    }

    #[test]
    fn backends_follow_the_tier() {
        let count = LambdaTransducerSpec::parse(corpus::COUNT).unwrap();
        let bin = LambdaTransducerSpec::parse(corpus::BIN2BIN).unwrap();
        assert!(Backends::new(&count).unwrap().list().contains(&Backend::Twt));
        let b = Backends::new(&bin).unwrap();
        assert!(!b.list().contains(&Backend::Twt));
        assert!(b.list().contains(&Backend::Iptt));
    }

    #[test]
    fn mismatches_name_the_first_bad_step() {
        let count = LambdaTransducerSpec::parse(corpus::COUNT).unwrap();
        let b = Backends::new(&count).unwrap();
        let tau = Tree::new("b", vec![Tree::leaf("c")]);
        let wrong = Tree::new("S", vec![Tree::leaf("0")]);
        let d = b.divergence(Backend::Twt, &tau, &wrong, 1000).unwrap();
        assert!(d.starts_with("step ") && d.contains(": S(S("), "{d}");
    }

    #[test]
    fn gls_demo_agrees() {
        let spec = GlsSpec::parse(corpus::MIRROR_GLS).unwrap();
        let r = gls_difftest(&spec, 11, 20, 12, DEFAULT_FUEL).unwrap();
        assert!(r.ok(), "{r}");
    }
}
