use lamtree::corpus;
use lamtree::harness::{TermGen, TreeGen};
use lamtree::reduction::{beta_step, normalize_stepwise, normalize_term, Strategy, DEFAULT_FUEL};
use lamtree::syntax::{alpha_eq, decode_tree, parse_alphabet, RankedAlphabet, Term};
use lamtree::transducer::LambdaTransducerSpec;
use lamtree::types::Type;
use lamtree::typing::{check_type, constant_types, TypingContext};
use proptest::prelude::*;

fn abc() -> RankedAlphabet {
    parse_alphabet("{ a:2, b:1, c:0 }").unwrap()
}

fn typechecks(t: &Term, ty: &Type) -> bool {
    check_type(&TypingContext::empty(), t, ty, &constant_types(&abc())).is_ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn every_step_preserves_the_type(seed in any::<u64>()) {
        let mut g = TermGen::new(seed, abc(), true);
        let ty = g.small_type();
        let mut t = g.term(&ty, 14);
        prop_assert!(typechecks(&t, &ty), "generated {} : {}", t, ty);
        let mut steps = 0;
        while let Some(next) = beta_step(&t) {
            prop_assert!(typechecks(&next, &ty), "{} ~> {} loses type {}", t, next, ty);
            t = next;
            steps += 1;
            prop_assert!(steps < 10_000);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn purely_affine_steps_never_grow(seed in any::<u64>()) {
        let mut g = TermGen::new(seed, abc(), false);
        let ty = g.small_type();
        let mut t = g.term(&ty, 16);
        while let Some(next) = beta_step(&t) {
            prop_assert!(next.size() <= t.size(), "{} ~> {}", t, next);
            t = next;
        }
    }

    #[test]
    fn strategies_meet_at_base_type(seed in any::<u64>(), bangs in any::<bool>()) {
        let mut g = TermGen::new(seed, abc(), bangs);
        let t = g.term(&Type::Base, 16);
        let (lo, _) = normalize_stepwise(&t, Strategy::LeftmostOutermost, DEFAULT_FUEL).unwrap();
        let (ri, _) = normalize_stepwise(&t, Strategy::RightmostInnermost, DEFAULT_FUEL).unwrap();
        prop_assert!(alpha_eq(&lo, &ri), "{} vs {}", lo, ri);
        prop_assert!(decode_tree(&lo, &abc()).is_ok());
        prop_assert!(alpha_eq(&lo, &normalize_term(&t, DEFAULT_FUEL).unwrap()));
    }
}

#[test]
fn corpus_programs_finish_within_quadratic_fuel() {
    for (name, text) in corpus::TRANSDUCERS {
        let spec = LambdaTransducerSpec::parse(text).unwrap();
        let bound = if name == "bin2bin" { 4 } else { 12 };
        for tau in TreeGen::new(17, spec.input.clone(), bound).sample(30).unwrap() {
            let p = spec.program(&tau).unwrap();
            let fuel = 10 * (p.size() as u64).pow(2);
            let (nf, _) = normalize_stepwise(&p, Strategy::LeftmostOutermost, fuel)
                .unwrap_or_else(|e| panic!("{name} on {tau}: {e}"));
            assert!(decode_tree(&nf, &spec.output).is_ok());
        }
    }
}

#[test]
fn generated_terms_have_work_to_do() {
    let mut with_redex = 0;
    let mut with_box = 0;
    for seed in 0..200 {
        let mut g = TermGen::new(seed, abc(), true);
        let ty = g.small_type();
        let t = g.term(&ty, 14);
        with_redex += usize::from(beta_step(&t).is_some());
        with_box += usize::from(t.to_string().contains('!'));
    }
    assert!(with_redex > 100, "{with_redex}");
    assert!(with_box > 50, "{with_box}");
}
