//! One line per acceptance criterion. Runs as a plain binary so the lines
//! always show; exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::time::Instant;

use lamtree::compile::{compile_to_iptt, compile_to_twt};
use lamtree::corpus;
use lamtree::harness::{default_max_size, difftest, gls_difftest, TermGen, TreeGen};
use lamtree::iam::{assert_invariants, Iam, IamConfig, SingleStack, Variant};
use lamtree::reduction::{normalize_term, DEFAULT_FUEL};
use lamtree::syntax::{alpha_eq, decode_tree, encode_tree, parse_alphabet, parse_tree, Term, Tree};
use lamtree::transducer::{
    check_almost_affine, compose, eta_long, type_constant_encoding, wn_translate, GlsSpec, LambdaTransducerSpec,
};
use lamtree::types::{classify_type, Classification, Type};
use lamtree::typing::{check_type, constant_types, TypingContext};
use lamtree::walking::{check_reversible, iptt_run, predecessor, twt_run, Move, Provenance, TreeIndex, TwtSpec};

type Outcome = Result<String, String>;

fn lt(text: &str) -> LambdaTransducerSpec {
    LambdaTransducerSpec::parse(text).expect("corpus spec loads")
}

fn tree(s: &str, spec: &LambdaTransducerSpec) -> Tree {
    parse_tree(s, &spec.input).expect("tree parses")
}

fn same(what: &str, got: Result<Tree, String>, want: &Tree) -> Result<(), String> {
    match got {
        Ok(t) if t == *want => Ok(()),
        Ok(t) => Err(format!("{what}: got {t}, want {want}")),
        Err(e) => Err(format!("{what}: {e}")),
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// S^n(0) and the list [S(0), ..., S^n(0)].
fn unary(n: usize) -> String {
    (0..n).fold("0".to_string(), |acc, _| format!("S({acc})"))
}

fn seq_list(n: usize) -> String {
    (1..=n).rev().fold("nil".to_string(), |acc, i| format!("cons({},{acc})", unary(i)))
}

fn examples() -> Outcome {
    let count = lt(corpus::COUNT);
    let hand = TwtSpec::parse(corpus::COUNT_TWT).map_err(e2s)?;
    let ctwt = compile_to_twt(&count).map_err(e2s)?;
    let tau = tree("a(b(c),c)", &count);
    let want = parse_tree("S(S(S(0)))", &count.output).map_err(e2s)?;
    same("count normalize", count.eval_normalize(&tau, DEFAULT_FUEL).map_err(e2s), &want)?;
    same("count apaiam", count.eval_iam(&tau, Variant::AlmostPurelyAffine, DEFAULT_FUEL).map_err(e2s), &want)?;
    same("count compiled twt", twt_run(&ctwt, &tau, DEFAULT_FUEL).map_err(e2s), &want)?;
    same("count hand twt", twt_run(&hand, &tau, DEFAULT_FUEL).map_err(e2s), &want)?;

    let seq = lt(corpus::SEQ_NAT);
    let stwt = compile_to_twt(&seq).map_err(e2s)?;
    for n in 0..=6 {
        let tau = tree(&unary(n), &seq);
        let want = parse_tree(&seq_list(n), &seq.output).map_err(e2s)?;
        same("seq-nat normalize", seq.eval_normalize(&tau, DEFAULT_FUEL).map_err(e2s), &want)?;
        same("seq-nat apaiam", seq.eval_iam(&tau, Variant::AlmostPurelyAffine, DEFAULT_FUEL).map_err(e2s), &want)?;
        same("seq-nat compiled twt", twt_run(&stwt, &tau, DEFAULT_FUEL).map_err(e2s), &want)?;
    }

    let bin = lt(corpus::BIN2BIN);
    let iptt = compile_to_iptt(&bin).map_err(e2s)?;
    let tau = tree("0(0(1(0(e))))", &bin);
    let want = parse_tree("a(a(c,c),a(c,c))", &bin.output).map_err(e2s)?;
    same("bin2bin normalize", bin.eval_normalize(&tau, DEFAULT_FUEL).map_err(e2s), &want)?;
    same("bin2bin depth-1 iam", bin.eval_iam(&tau, Variant::Depth1, DEFAULT_FUEL).map_err(e2s), &want)?;
    same("bin2bin single stack", bin.eval_iam(&tau, Variant::SingleStack, DEFAULT_FUEL).map_err(e2s), &want)?;
    same("bin2bin compiled iptt", iptt_run(&iptt, &tau, DEFAULT_FUEL).map_err(e2s), &want)?;
    Ok("count (4 backends), seq-nat n<=6 (3 backends), bin2bin (4 backends)".into())
}

const IAM_GOLDEN: [(usize, &str); 10] = [
    (0, r#"(>(\f. f 0) ((\l.\r.\x. l (r x)) ((\f.\x. S (f x)) S) S)<, "")"#),
    (1, r#"(>(\f. f 0)< ((\l.\r.\x. l (r x)) ((\f.\x. S (f x)) S) S), "p")"#),
    (2, r#"((\f. >f 0<) ((\l.\r.\x. l (r x)) ((\f.\x. S (f x)) S) S), "")"#),
    (3, r#"((\f. >f< 0) ((\l.\r.\x. l (r x)) ((\f.\x. S (f x)) S) S), "p")"#),
    (4, r#"(<(\f. f 0)> ((\l.\r.\x. l (r x)) ((\f.\x. S (f x)) S) S), "op")"#),
    (5, r#"((\f. f 0) >((\l.\r.\x. l (r x)) ((\f.\x. S (f x)) S) S)<, "p")"#),
    (7, r#"((\f. f 0) (>(\l.\r.\x. l (r x))< ((\f.\x. S (f x)) S) S), "ppp")"#),
    (11, r#"((\f. f 0) ((\l.\r.\x. >l< (r x)) ((\f.\x. S (f x)) S) S), "p")"#),
    (12, r#"((\f. f 0) (<(\l.\r.\x. l (r x))> ((\f.\x. S (f x)) S) S), "op")"#),
    (14, r#"((\f. f 0) ((\l.\r.\x. l (r x)) (>(\f.\x. S (f x))< S) S), "pp")"#),
];

const TWT_GOLDEN: [(usize, &str); 20] = [
    (0, "(I, ↻, a1)"),
    (1, r#"(U[down,">(\f. f 0)< <>1","p"], ↻, a1)"#),
    (4, r#"(U[up,"<(\f. f 0)> <>1","op"], ↻, a1)"#),
    (5, r#"(Nabla["p"], ↻, a1)"#),
    (6, r#"(T[down,">(\l.\r.\x. l (r x)) <>1< <>2","pp"], ↻, a1)"#),
    (11, r#"(T[down,"(\l.\r.\x. >l< (r x)) <>1 <>2","p"], ↻, a1)"#),
    (12, r#"(T[up,"<(\l.\r.\x. l (r x))> <>1 <>2","op"], ↻, a1)"#),
    (13, r#"(Nabla["p"], ↓•, b2)"#),
    (14, r#"(T[down,">(\f.\x. S (f x))< <>1","pp"], ↻, b2)"#),
    (17, r#"(T[down,"(\f.\x. >S< (f x)) <>1","p"], ↻, b2)"#),
    (18, r#"S((T[up,"(\f.\x. <S> (f x)) <>1","o"], ↻, b2))"#),
    (37, r#"S(S((Nabla["p"], ↓•, c4)))"#),
    (38, r#"S(S(S((Delta["o"], ↑2, a1))))"#),
    (39, r#"S(S(S((T[down,">(\l.\r.\x. l (r x)) <>1< <>2","oo"], ↻, a1))))"#),
    (46, r#"S(S(S((T[up,"<(\l.\r.\x. l (r x))> <>1 <>2","ppo"], ↻, a1))))"#),
    (48, r#"S(S(S((Delta["o"], ↻, a1))))"#),
    (49, r#"S(S(S((U[down,">(\f. f 0)< <>1","oo"], ↻, a1))))"#),
    (51, r#"S(S(S((U[down,"(\f. f >0<) <>1",""], ↻, a1))))"#),
    (52, "S(S(S(0)))"),
    (53, ""),
];

fn golden() -> Outcome {
    let count = lt(corpus::COUNT);
    let tau = tree("a(b(c),c)", &count);
    let v = count.annotated_program(&tau).map_err(e2s)?;
    let m = Iam::new(&v, Variant::PurelyAffine);
    let tr = m.trace(DEFAULT_FUEL);
    for (i, want) in IAM_GOLDEN {
        let got = tr.entries[i].frontier.render(&|c| m.show(c));
        if got != want {
            return Err(format!("iam step {i}: got {got}, want {want}"));
        }
    }
    let twt = compile_to_twt(&count).map_err(e2s)?;
    let t = TreeIndex::new(&tau);
    let tr = twt.trace(&tau, DEFAULT_FUEL);
    for (i, want) in TWT_GOLDEN {
        let got = tr.entries.get(i).map(|e| e.frontier.render(&|c| c.show(&t))).unwrap_or_default();
        if got != want {
            return Err(format!("twt step {i}: got {got}, want {want}"));
        }
    }
    Ok(format!("10 iam steps and {} twt steps match", TWT_GOLDEN.len() - 1))
}

fn encodings() -> Outcome {
    let sigma = parse_alphabet("{ a:2, b:1, c:0 }").map_err(e2s)?;
    let consts = constant_types(&sigma);
    let trees = TreeGen::new(2024, sigma.clone(), 30).sample(100).map_err(e2s)?;
    for tau in &trees {
        let v = check_type(&TypingContext::empty(), &encode_tree(tau), &Type::Base, &consts).map_err(e2s)?;
        same(&format!("encode {tau}"), Iam::new(&v, Variant::PurelyAffine).run(DEFAULT_FUEL).map(|r| r.0).map_err(e2s), tau)?;
    }
    let largest = trees.iter().map(Tree::size).max().unwrap_or(0);
    Ok(format!("100 trees reproduced, largest size {largest}"))
}

fn invariants() -> Outcome {
    let mut runs = 0;
    let mut configs = 0;
    for (name, text) in corpus::TRANSDUCERS {
        let spec = lt(text);
        let mut inputs = TreeGen::new(99, spec.input.clone(), default_max_size(&spec)).sample(20).map_err(e2s)?;
        if name == "bin2bin" {
            inputs.push(tree("0(0(1(0(e))))", &spec));
        }
        for tau in inputs {
            let v = spec.annotated_program(&tau).map_err(e2s)?;
            let variant = Variant::for_tier(v.classify()).ok_or("no machine for this tier")?;
            let mut seen: Vec<IamConfig> = Vec::new();
            Iam::new(&v, variant).run_observed(DEFAULT_FUEL, |c| seen.push(c.clone()));
            configs += assert_invariants(&v, variant, &seen).map_err(|e| format!("{name} on {tau}: {e:?}"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} runs, {configs} configurations, 0 violations"))
}

fn reversibility() -> Outcome {
    let count = lt(corpus::COUNT);
    let twt = compile_to_twt(&count).map_err(e2s)?;
    let idx = check_reversible(&twt).map_err(e2s)?;
    let tau = tree("a(b(c),c)", &count);
    let t = TreeIndex::new(&tau);
    let mut fired = Vec::new();
    twt.run_observed(&tau, DEFAULT_FUEL, |c| fired.push(c.clone()));
    let mut back = vec![fired.last().ok_or("empty run")?.clone()];
    while let Some(p) = predecessor(&idx, &t, back.last().expect("nonempty")) {
        back.push(p);
    }
    back.reverse();
    if back != fired {
        return Err(format!("backward walk has {} configurations, forward run {}", back.len(), fired.len()));
    }
    let seq = TwtSpec::parse(corpus::SEQ_NAT_TWT).map_err(e2s)?;
    let w = match check_reversible(&seq) {
        Ok(_) => return Err("seq-nat walker passed the check".into()),
        Err(w) => w,
    };
    let provs = [w.first.prov, w.second.prov];
    if w.leaf != ("num".into(), Move::ToParent) || provs != [Provenance::Here, Provenance::FromChild(1)] {
        return Err(format!("unexpected witness: {w}"));
    }
    Ok(format!("{} configurations walked back; seq-nat witness {w}", fired.len()))
}

/// Binary numerals, most significant bit at the root.
fn binary(n: usize) -> String {
    if n == 0 {
        return "e".into();
    }
    let bits = format!("{n:b}");
    bits.chars().rev().fold("e".to_string(), |acc, b| format!("{b}({acc})"))
}

fn bisimulation() -> Outcome {
    let bin = lt(corpus::BIN2BIN);
    let mut steps = Vec::new();
    for n in 0..=4 {
        let tau = tree(&binary(n), &bin);
        let v = bin.annotated_program(&tau).map_err(e2s)?;
        let (two, n2) = Iam::new(&v, Variant::Depth1).run(DEFAULT_FUEL).map_err(e2s)?;
        let (one, n1) = SingleStack::new(&v).run(DEFAULT_FUEL).map_err(e2s)?;
        if two != one || n1 != n2 {
            return Err(format!("n={n}: two stacks {two} in {n2} steps, one stack {one} in {n1}"));
        }
        if two.size() != (1 << (n + 1)) - 1 {
            return Err(format!("n={n}: output size {}", two.size()));
        }
        steps.push(n1);
    }
    Ok(format!("n=0..4 agree, steps {steps:?}, sizes 1,3,7,15,31"))
}

fn composition() -> Outcome {
    let count = lt(corpus::COUNT);
    let seq = lt(corpus::SEQ_NAT);
    let count_list = lt(corpus::COUNT_LIST);
    // seq-nat then count-list.
    let sc = compose(&seq, &count_list).map_err(e2s)?;
    for k in 0..=6 {
        let tau = tree(&unary(k), &seq);
        let mid = seq.eval_normalize(&tau, DEFAULT_FUEL).map_err(e2s)?;
        let want = count_list.eval_normalize(&mid, DEFAULT_FUEL).map_err(e2s)?;
        same(&format!("seq-nat;count-list on {tau}"), sc.eval_normalize(&tau, DEFAULT_FUEL).map_err(e2s), &want)?;
    }
    // count then seq-nat.
    let cs = compose(&count, &seq).map_err(e2s)?;
    let inputs = TreeGen::new(5, count.input.clone(), 10).sample(20).map_err(e2s)?;
    for tau in &inputs {
        let mid = count.eval_normalize(tau, DEFAULT_FUEL).map_err(e2s)?;
        let want = seq.eval_normalize(&mid, DEFAULT_FUEL).map_err(e2s)?;
        same(&format!("count;seq-nat on {tau}"), cs.eval_normalize(tau, DEFAULT_FUEL).map_err(e2s), &want)?;
    }
    let c1 = classify_type(&sc.memory);
    let c2 = classify_type(&cs.memory);
    if c1 > Classification::AlmostDepth1 || c2 != Classification::AlmostPurelyAffine {
        return Err(format!("memory tiers {c1} and {c2}"));
    }
    Ok(format!("seq-nat;count-list memory {} is {c1}; count;seq-nat memory {} is {c2}", sc.memory, cs.memory))
}

fn gls() -> Outcome {
    let spec = GlsSpec::parse(corpus::MIRROR_GLS).map_err(e2s)?;
    let enc = type_constant_encoding(&spec).map_err(e2s)?;
    let consts = constant_types(&spec.output);
    let mut checked = 0;
    for (i, (q, ty)) in spec.states.iter().enumerate() {
        let mut g = TermGen::new(500 + i as u64, spec.output.clone(), false);
        for _ in 0..10 {
            let t = normalize_term(&g.term(ty, 10), DEFAULT_FUEL).map_err(e2s)?;
            let roundtrip = Term::app(enc.cast[q].clone(), Term::app(enc.iota[q].clone(), t.clone()));
            let nf = normalize_term(&roundtrip, DEFAULT_FUEL).map_err(e2s)?;
            let want = eta_long(&t, ty, &consts).ok_or_else(|| format!("{t} has no η-long form at {ty}"))?;
            if !alpha_eq(&nf, &want) {
                return Err(format!("state {q}: cast(ι({t})) = {nf}, want {want}"));
            }
            checked += 1;
        }
    }
    let r = gls_difftest(&spec, 8, 20, 15, DEFAULT_FUEL).map_err(e2s)?;
    if !r.ok() {
        return Err(r.to_string());
    }
    Ok(format!("{checked} casts round-trip; {r}"))
}

fn wn() -> Outcome {
    let count = lt(corpus::COUNT);
    let seq = lt(corpus::SEQ_NAT);
    let sigma = seq.output.clone();
    let templates = [
        "\\x. cons x x",
        "\\x.\\y. cons x (cons y x)",
        "\\x. (\\g. g x) (\\y. cons y (S x))",
        "\\x.\\y. (\\p. cons p (cons y p)) (S x)",
    ];
    let trees = TreeGen::new(31, count.input.clone(), 8).sample(40).map_err(e2s)?;
    for i in 0..20 {
        let tmpl = lamtree::syntax::parse_term(templates[i % templates.len()], &sigma).map_err(e2s)?;
        let arity = match &tmpl {
            Term::Lam(_, b) if matches!(&**b, Term::Lam(..)) => 2,
            _ => 1,
        };
        let args = (0..arity).map(|j| count.program(&trees[2 * i + j])).collect::<Result<Vec<_>, _>>().map_err(e2s)?;
        let t = Term::apps(tmpl, args);
        let at = check_almost_affine(&t, &Type::Base, &sigma).map_err(|e| format!("term {i}: {e}"))?;
        let q = wn_translate(&at).map_err(e2s)?;
        check_type(&TypingContext::empty(), &q, &Type::bang(Type::Base), &constant_types(&sigma))
            .map_err(|e| format!("?t for term {i} does not have type !o: {e}"))?;
        let nf = normalize_term(&t, DEFAULT_FUEL).map_err(e2s)?;
        decode_tree(&nf, &sigma).map_err(e2s)?;
        let qnf = normalize_term(&q, DEFAULT_FUEL).map_err(e2s)?;
        if qnf != Term::bang(nf.clone()) {
            return Err(format!("term {i}: ?t normalizes to {qnf}, t to {nf}"));
        }
    }
    Ok("20 terms".into())
}

fn fuzz() -> Outcome {
    let start = Instant::now();
    let mut total = 0;
    let mut counts = HashMap::new();
    for (i, (name, text)) in corpus::TRANSDUCERS.into_iter().enumerate() {
        let spec = lt(text);
        let r = difftest(&spec, 1000 + i as u64, 75, default_max_size(&spec), DEFAULT_FUEL).map_err(e2s)?;
        if !r.ok() {
            return Err(format!("{name}: {r}"));
        }
        total += r.cases;
        counts.insert(name, r.backends.len());
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 60.0 {
        return Err(format!("{total} cases took {secs:.1}s"));
    }
    Ok(format!("{total}/{total} agree in {secs:.1}s"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("example reproduction", examples),
        ("golden traces", golden),
        ("encodings reproduced by the machine", encodings),
        ("machine invariants", invariants),
        ("reversibility", reversibility),
        ("two-stack and one-stack bisimulation", bisimulation),
        ("composition", composition),
        ("GLS reduction", gls),
        ("?-translation", wn),
        ("differential fuzz", fuzz),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
