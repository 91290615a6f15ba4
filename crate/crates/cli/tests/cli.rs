use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn lamtree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lamtree")).current_dir(root()).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_count_on_every_machine() {
    for m in ["normalize", "iam", "twt", "iptt"] {
        let o = lamtree(&["run", "--machine", m, "corpus/count.lt", "a(b(c),c)"]);
        assert!(o.status.success(), "{m}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o), "S(S(S(0)))\n", "{m}");
    }
}

#[test]
fn hand_written_walkers_run_directly() {
    let o = lamtree(&["run", "corpus/count.twt", "a(b(c),c)"]);
    assert_eq!(stdout(&o), "S(S(S(0)))\n");
    let o = lamtree(&["run", "corpus/bin2unary.iptt", "0(1(0(1(e))))"]);
    assert_eq!(stdout(&o), "S(S(S(S(S(0)))))\n");
}

#[test]
fn tree_from_a_file() {
    let dir = std::env::temp_dir().join(format!("lamtree-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("input.tree");
    std::fs::write(&f, "a(b(c),c)\n").unwrap();
    let arg = format!("@{}", f.display());
    let o = lamtree(&["run", "corpus/count.lt", &arg]);
    assert_eq!(stdout(&o), "S(S(S(0)))\n");
}

#[test]
fn classify_and_typecheck() {
    let o = lamtree(&["classify", "corpus/bin2bin.lt"]);
    assert_eq!(stdout(&o), "almost-depth-1\n");
    let o = lamtree(&["typecheck", "corpus/seq-nat.lt"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("ok: memory"));
}

#[test]
fn normalize_prints_the_encoded_output() {
    let o = lamtree(&["normalize", "corpus/count.lt", "b(c)"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "S (S 0)");
}

#[test]
fn difftest_reports_agreement() {
    let o = lamtree(&["difftest", "--seed", "1", "--cases", "100", "corpus/count.lt"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("100/100 agree"), "{}", stdout(&o));
    let o = lamtree(&["difftest", "--seed", "3", "--cases", "20", "corpus/mirror.gls"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("20/20 agree"));
}

#[test]
fn compiled_output_round_trips() {
    let dir = std::env::temp_dir().join(format!("lamtree-compile-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for (target, ext) in [("twt", "twt"), ("iptt", "iptt")] {
        let out = dir.join(format!("count.{ext}"));
        let o = lamtree(&["compile", "--target", target, "corpus/count.lt", "-o", out.to_str().unwrap()]);
        assert!(o.status.success());
        let o = lamtree(&["run", out.to_str().unwrap(), "a(b(c),c)"]);
        assert_eq!(stdout(&o), "S(S(S(0)))\n", "{target}");
    }
}

#[test]
fn compose_then_run() {
    let dir = std::env::temp_dir().join(format!("lamtree-compose-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("composed.lt");
    let o = lamtree(&["compose", "corpus/seq-nat.lt", "corpus/count-list.lt", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = lamtree(&["run", out.to_str().unwrap(), "S(S(S(0)))"]);
    assert!(o.status.success());
    // seq-nat on 3 lists 1, 2, 3; the counter adds one per S, per 0 and for nil.
    assert_eq!(stdout(&o).matches('S').count(), (1 + 2 + 3) + 3 + 1);
}

#[test]
fn reversibility_verdicts() {
    let o = lamtree(&["reversible", "corpus/count.twt"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "reversible\n");
    let o = lamtree(&["reversible", "corpus/seq-nat.lt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("not reversible"));
}

#[test]
fn golden_traces_are_byte_stable() {
    for (machine, golden) in [("iam", "count_iam.jsonl"), ("twt", "count_twt.jsonl")] {
        let want = std::fs::read_to_string(root().join("crates/cli/tests/golden").join(golden)).unwrap();
        let a = stdout(&lamtree(&["trace", "--machine", machine, "corpus/count.lt", "a(b(c),c)"]));
        let b = stdout(&lamtree(&["trace", "--machine", machine, "corpus/count.lt", "a(b(c),c)"]));
        assert_eq!(a, b);
        assert_eq!(a, want, "{machine}");
        assert!(a.lines().last().unwrap().contains("S(S(S(0)))"));
    }
}

#[test]
fn exit_codes() {
    assert_eq!(lamtree(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lamtree(&["run", "--machine", "abacus", "corpus/count.lt", "c"]).status.code(), Some(2));
    let o = lamtree(&["run", "corpus/missing.lt", "c"]);
    assert_eq!(o.status.code(), Some(1));
    let o = lamtree(&["run", "corpus/count.lt", "a(c)"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("input tree"));
    let o = lamtree(&["run", "--machine", "iam", "corpus/count.twt", "c"]);
    assert_eq!(o.status.code(), Some(1));
}
