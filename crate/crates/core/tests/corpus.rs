use lamtree::compile::{compile_to_iptt, compile_to_twt};
use lamtree::corpus;
use lamtree::harness::TreeGen;
use lamtree::reduction::DEFAULT_FUEL;
use lamtree::syntax::{parse_tree, Tree};
use lamtree::transducer::LambdaTransducerSpec;
use lamtree::walking::{check_reversible, iptt_run, IpttSpec};

fn lt(text: &str) -> LambdaTransducerSpec {
    LambdaTransducerSpec::parse(text).unwrap()
}

/// S(x) becomes a(x,x) and 0 becomes c.
fn unary_to_tree(t: &Tree) -> Tree {
    match (&*t.label, t.children.as_slice()) {
        ("S", [x]) => {
            let x = unary_to_tree(x);
            Tree::new("a", vec![x.clone(), x])
        }
        _ => Tree::leaf("c"),
    }
}

#[test]
fn bin2unary_explains_bin2bin() {
    let pebbles = IpttSpec::parse(corpus::BIN2UNARY_IPTT).unwrap();
    let bin = lt(corpus::BIN2BIN);
    for tau in TreeGen::new(4, bin.input.clone(), 5).sample(40).unwrap() {
        let unary = iptt_run(&pebbles, &tau, DEFAULT_FUEL).unwrap();
        assert_eq!(unary_to_tree(&unary), bin.eval_normalize(&tau, DEFAULT_FUEL).unwrap(), "on {tau}");
    }
}

#[test]
fn compiled_bin2bin_sizes() {
    let bin = lt(corpus::BIN2BIN);
    let iptt = compile_to_iptt(&bin).unwrap();
    for (n, s) in [(1, "1(e)"), (2, "1(0(e))"), (3, "1(1(e))"), (4, "1(0(0(e)))")] {
        let tau = parse_tree(s, &bin.input).unwrap();
        let out = iptt_run(&iptt, &tau, DEFAULT_FUEL).unwrap();
        assert_eq!(out.size(), (1 << (n + 1)) - 1, "n = {n}");
        assert_eq!(out, bin.eval_normalize(&tau, DEFAULT_FUEL).unwrap());
    }
}

#[test]
fn compiled_seq_nat_on_numerals() {
    let seq = lt(corpus::SEQ_NAT);
    let twt = compile_to_twt(&seq).unwrap();
    let iptt = compile_to_iptt(&seq).unwrap();
    let mut s = "0".to_string();
    for _ in 0..=6 {
        let tau = parse_tree(&s, &seq.input).unwrap();
        let want = seq.eval_normalize(&tau, DEFAULT_FUEL).unwrap();
        assert_eq!(lamtree::walking::twt_run(&twt, &tau, DEFAULT_FUEL).unwrap(), want);
        assert_eq!(iptt_run(&iptt, &tau, DEFAULT_FUEL).unwrap(), want);
        s = format!("S({s})");
    }
    // Only purely affine memory guarantees a reversible result.
    assert!(check_reversible(&twt).is_err());
}

#[test]
fn classifications_of_the_corpus() {
    let tiers: Vec<String> = corpus::TRANSDUCERS.iter().map(|(_, t)| lt(t).classification().to_string()).collect();
    assert_eq!(tiers, ["purely-affine", "almost-purely-affine", "almost-depth-1", "purely-affine"]);
}
