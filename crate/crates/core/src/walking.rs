//! Tree-walking transducers (TWT), reversibility, and invisible pebble tree
//! transducers (IPTT).

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use indexmap::{IndexMap, IndexSet};
use thiserror::Error;

use crate::format::{names, spec_lines, take_name, SpecError};
use crate::syntax::{parse_alphabet, Name, RankedAlphabet, Tree, TreeError};
use crate::treegen::{self, Frontier, MachineResult, Policy};

/// Where the head came from: `↓•` (from the parent), `↻` (it stayed), or
/// `↑i` (from child `i`, 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    FromParent,
    Here,
    FromChild(usize),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::FromParent => f.write_str("↓•"),
            Provenance::Here => f.write_str("↻"),
            Provenance::FromChild(i) => write!(f, "↑{i}"),
        }
    }
}

impl Provenance {
    fn token(&self) -> String {
        match self {
            Provenance::FromParent => "from-parent".into(),
            Provenance::Here => "self".into(),
            Provenance::FromChild(i) => format!("from-child {i}"),
        }
    }
}

/// Head moves; `Put` and `Remove` only occur in pebble transducers and
/// leave the head in place.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    ToParent,
    Stay,
    ToChild(usize),
    Put(Name),
    Remove,
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::ToParent => f.write_str("to-parent"),
            Move::Stay => f.write_str("stay"),
            Move::ToChild(i) => write!(f, "to-child {i}"),
            Move::Put(c) => write!(f, "put {c}"),
            Move::Remove => f.write_str("remove"),
        }
    }
}

/// Right-hand side: an output tree whose pending leaves are `(state, move)`.
pub type Rhs = Frontier<(Name, Move)>;

pub fn show_rhs(r: &Rhs) -> String {
    r.render(&|(q, m)| format!("({q}, {m})"))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WalkError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("invalid input tree: {0}")]
    Tree(#[from] TreeError),
    #[error("no transition from {0}")]
    Stuck(String),
    #[error("did not finish within {0} steps")]
    Diverged(u64),
}

/// Parent links and children of an input tree, nodes numbered in preorder.
#[derive(Debug, Clone)]
pub struct TreeIndex {
    pub labels: Vec<Name>,
    pub parent: Vec<Option<(usize, usize)>>,
    pub children: Vec<Vec<usize>>,
}

impl TreeIndex {
    pub fn new(tau: &Tree) -> Self {
        let pre = tau.preorder();
        let mut children = vec![Vec::new(); pre.len()];
        for (i, (_, p)) in pre.iter().enumerate() {
            if let Some((par, _)) = p {
                children[*par].push(i);
            }
        }
        TreeIndex {
            labels: pre.iter().map(|(t, _)| t.label.clone()).collect(),
            parent: pre.iter().map(|(_, p)| *p).collect(),
            children,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_root(&self, n: usize) -> bool {
        self.parent[n].is_none()
    }

    /// `a1`, `b2`, ...: label and 1-based preorder number.
    pub fn show(&self, n: usize) -> String {
        format!("{}{}", self.labels[n], n + 1)
    }

    /// The node reached by `m` from `n`, with the new provenance.
    fn target(&self, n: usize, m: &Move) -> Option<(usize, Provenance)> {
        match m {
            Move::ToParent => self.parent[n].map(|(p, j)| (p, Provenance::FromChild(j))),
            Move::ToChild(i) => self.children[n].get(i.checked_sub(1)?).map(|&c| (c, Provenance::FromParent)),
            Move::Stay | Move::Put(_) | Move::Remove => Some((n, Provenance::Here)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TwtKey {
    pub letter: Name,
    pub state: Name,
    pub prov: Provenance,
}

impl fmt::Display for TwtKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.letter, self.state, self.prov.token())
    }
}

impl TwtKey {
    pub fn new(letter: impl Into<Name>, state: impl Into<Name>, prov: Provenance) -> Self {
        TwtKey { letter: letter.into(), state: state.into(), prov }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TwtConfig {
    pub state: Name,
    pub prov: Provenance,
    pub node: usize,
}

impl TwtConfig {
    pub fn show(&self, t: &TreeIndex) -> String {
        format!("({}, {}, {})", self.state, self.prov, t.show(self.node))
    }
}

/// A tree-walking transducer with separate transition tables for the root
/// and for the other nodes.
#[derive(Debug, Clone)]
pub struct TwtSpec {
    pub input: RankedAlphabet,
    pub output: RankedAlphabet,
    pub states: IndexSet<Name>,
    pub init: Name,
    pub delta: IndexMap<TwtKey, Rhs>,
    pub delta_root: IndexMap<TwtKey, Rhs>,
}

impl TwtSpec {
    pub fn parse(text: &str) -> Result<Self, WalkError> {
        let p = parse_walker(text, false)?;
        let mut delta = IndexMap::new();
        let mut delta_root = IndexMap::new();
        for (line, root, key, rhs) in p.rules {
            let DeltaKey { letter, state, prov, .. } = key;
            let table = if root { &mut delta_root } else { &mut delta };
            if table.insert(TwtKey { letter, state, prov }, rhs).is_some() {
                return Err(SpecError::syntax(line, "second transition for the same key").into());
            }
        }
        let spec = TwtSpec { input: p.input, output: p.output, states: p.states, init: p.init, delta, delta_root };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks ranks, declared states, and that the root table never moves up.
    pub fn validate(&self) -> Result<(), SpecError> {
        for (root, table) in [(false, &self.delta), (true, &self.delta_root)] {
            for (k, rhs) in table {
                let at = format!("{} {} {}", k.letter, k.state, k.prov.token());
                check_entry(&self.input, &self.output, &self.states, &k.letter, &k.state, k.prov, root, rhs, &at)?;
                if rhs.pending().iter().any(|(_, m)| matches!(m, Move::Put(_) | Move::Remove)) {
                    return Err(SpecError::Invalid(format!("{at}: pebble moves in a tree-walking transducer")));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "input {}", self.input).unwrap();
        writeln!(s, "output {}", self.output).unwrap();
        for q in &self.states {
            writeln!(s, "state {q}{}", if *q == self.init { " init" } else { "" }).unwrap();
        }
        for (kw, table) in [("delta", &self.delta), ("delta-root", &self.delta_root)] {
            for (k, rhs) in table {
                writeln!(s, "{kw} {} {} {} = {}", k.letter, k.state, k.prov.token(), show_rhs(rhs)).unwrap();
            }
        }
        s
    }

    pub fn initial(&self) -> TwtConfig {
        TwtConfig { state: self.init.clone(), prov: Provenance::Here, node: 0 }
    }

    pub fn table(&self, root: bool) -> &IndexMap<TwtKey, Rhs> {
        if root {
            &self.delta_root
        } else {
            &self.delta
        }
    }

    pub fn step(&self, t: &TreeIndex, c: &TwtConfig) -> Option<Frontier<TwtConfig>> {
        let key = TwtKey { letter: t.labels[c.node].clone(), state: c.state.clone(), prov: c.prov };
        let rhs = self.table(t.is_root(c.node)).get(&key)?;
        instantiate_rhs(rhs, &mut |(q, m)| {
            let (node, prov) = t.target(c.node, m)?;
            Some(TwtConfig { state: q.clone(), prov, node })
        })
    }

    pub fn run_observed(&self, tau: &Tree, fuel: u64, observe: impl FnMut(&TwtConfig)) -> (MachineResult<TwtConfig>, u64) {
        let t = TreeIndex::new(tau);
        treegen::run_observed(|c| self.step(&t, c), self.initial(), fuel, Policy::Leftmost, observe)
    }

    pub fn trace(&self, tau: &Tree, fuel: u64) -> treegen::Trace<TwtConfig> {
        let t = TreeIndex::new(tau);
        treegen::trace(|c| self.step(&t, c), self.initial(), fuel)
    }

    pub fn transitions(&self) -> usize {
        self.delta.len() + self.delta_root.len()
    }
}

pub fn twt_run(spec: &TwtSpec, tau: &Tree, fuel: u64) -> Result<Tree, WalkError> {
    tau.validate(&spec.input)?;
    let t = TreeIndex::new(tau);
    match spec.run_observed(tau, fuel, |_| {}).0 {
        MachineResult::Output(o) => Ok(o),
        MachineResult::Diverged(n) => Err(WalkError::Diverged(n)),
        MachineResult::Stuck(c, _) => Err(WalkError::Stuck(c.show(&t))),
    }
}

fn instantiate_rhs<K>(rhs: &Rhs, f: &mut impl FnMut(&(Name, Move)) -> Option<K>) -> Option<Frontier<K>> {
    Some(match rhs {
        Frontier::Pending(l) => Frontier::Pending(f(l)?),
        Frontier::Node(a, cs) => {
            Frontier::Node(a.clone(), cs.iter().map(|c| instantiate_rhs(c, f)).collect::<Option<_>>()?)
        }
    })
}

/// Two keys of one table whose images share a leaf.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not reversible: leaf ({}, {}) appears under both `{first}` and `{second}`{}", leaf.0, leaf.1, if *root { " (root table)" } else { "" })]
pub struct ReversibilityWitness {
    pub root: bool,
    pub leaf: (Name, Move),
    pub first: TwtKey,
    pub second: TwtKey,
}

/// For each table and letter, the key owning each leaf.
#[derive(Debug, Clone)]
pub struct ReverseIndex {
    owner: HashMap<(bool, Name, Name, Move), TwtKey>,
}

/// Every leaf `(q, m)` appears at most once across the images of one
/// letter's table, separately for the root table.
pub fn check_reversible(spec: &TwtSpec) -> Result<ReverseIndex, ReversibilityWitness> {
    let mut owner = HashMap::new();
    for root in [false, true] {
        for (k, rhs) in spec.table(root) {
            for (q, m) in rhs.pending() {
                let slot = (root, k.letter.clone(), q.clone(), m.clone());
                if let Some(prev) = owner.insert(slot, k.clone()) {
                    return Err(ReversibilityWitness { root, leaf: (q.clone(), m.clone()), first: prev, second: k.clone() });
                }
            }
        }
    }
    Ok(ReverseIndex { owner })
}

/// The unique configuration whose step produced `c`, if any.
pub fn predecessor(index: &ReverseIndex, t: &TreeIndex, c: &TwtConfig) -> Option<TwtConfig> {
    let (node, m) = match c.prov {
        Provenance::FromParent => {
            let (p, j) = t.parent[c.node]?;
            (p, Move::ToChild(j))
        }
        Provenance::Here => (c.node, Move::Stay),
        Provenance::FromChild(i) => (*t.children[c.node].get(i - 1)?, Move::ToParent),
    };
    let key = index.owner.get(&(t.is_root(node), t.labels[node].clone(), c.state.clone(), m))?;
    Some(TwtConfig { state: key.state.clone(), prov: key.prov, node })
}

/// What the head must see on the current node: no pebble, a pebble of a
/// given color on top of the stack, or anything.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PebbleTest {
    None,
    Color(Name),
    Any,
}

impl fmt::Display for PebbleTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PebbleTest::None => f.write_str("NONE"),
            PebbleTest::Color(c) => write!(f, "{c}"),
            PebbleTest::Any => f.write_str("any"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IpttKey {
    pub letter: Name,
    pub state: Name,
    pub prov: Provenance,
    pub root: bool,
    pub pebble: PebbleTest,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IpttConfig {
    pub state: Name,
    pub prov: Provenance,
    pub node: usize,
    /// Pebbles bottom-first, each with the node it lies on.
    pub stack: Vec<(Name, usize)>,
}

impl IpttConfig {
    pub fn show(&self, t: &TreeIndex) -> String {
        let stack: Vec<String> = self.stack.iter().map(|(c, n)| format!("{c}@{}", t.show(*n))).collect();
        format!("({}, {}, {}, [{}])", self.state, self.prov, t.show(self.node), stack.join(" "))
    }

    /// The color of the top pebble if it lies on the current node.
    pub fn visible(&self) -> Option<&Name> {
        self.stack.last().filter(|(_, n)| *n == self.node).map(|(c, _)| c)
    }
}

/// An invisible pebble tree transducer: pebbles form a stack and only the
/// top one can be seen or lifted, from the node it lies on.
#[derive(Debug, Clone)]
pub struct IpttSpec {
    pub input: RankedAlphabet,
    pub output: RankedAlphabet,
    pub states: IndexSet<Name>,
    pub init: Name,
    pub colors: IndexSet<Name>,
    pub delta: IndexMap<IpttKey, Rhs>,
}

impl IpttSpec {
    pub fn parse(text: &str) -> Result<Self, WalkError> {
        let p = parse_walker(text, true)?;
        let mut delta = IndexMap::new();
        for (line, root, key, rhs) in p.rules {
            let DeltaKey { letter, state, prov, pebble } = key;
            let key = IpttKey { letter, state, prov, root, pebble: pebble.unwrap_or(PebbleTest::Any) };
            if delta.insert(key, rhs).is_some() {
                return Err(SpecError::syntax(line, "second transition for the same key").into());
            }
        }
        let spec = IpttSpec { input: p.input, output: p.output, states: p.states, init: p.init, colors: p.colors, delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        for (k, rhs) in &self.delta {
            let at = format!("{} {} {}", k.letter, k.state, k.prov.token());
            check_entry(&self.input, &self.output, &self.states, &k.letter, &k.state, k.prov, k.root, rhs, &at)?;
            if let PebbleTest::Color(c) = &k.pebble {
                if !self.colors.contains(c) {
                    return Err(SpecError::Invalid(format!("{at}: unknown color {c}")));
                }
            }
            for (_, m) in rhs.pending() {
                match m {
                    Move::Put(c) if !self.colors.contains(c) => {
                        return Err(SpecError::Invalid(format!("{at}: unknown color {c}")))
                    }
                    Move::Remove if !matches!(k.pebble, PebbleTest::Color(_)) => {
                        return Err(SpecError::Invalid(format!("{at}: `remove` needs a visible pebble")))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "input {}", self.input).unwrap();
        writeln!(s, "output {}", self.output).unwrap();
        let colors: Vec<&str> = self.colors.iter().map(|c| &**c).collect();
        writeln!(s, "colors {{ {} }}", colors.join(", ")).unwrap();
        for q in &self.states {
            writeln!(s, "state {q}{}", if *q == self.init { " init" } else { "" }).unwrap();
        }
        for (k, rhs) in &self.delta {
            writeln!(
                s,
                "delta {} {} {} {} pebble {} = {}",
                k.letter,
                k.state,
                k.prov.token(),
                if k.root { "root" } else { "nonroot" },
                k.pebble,
                show_rhs(rhs)
            )
            .unwrap();
        }
        s
    }

    pub fn initial(&self) -> IpttConfig {
        IpttConfig { state: self.init.clone(), prov: Provenance::Here, node: 0, stack: Vec::new() }
    }

    /// The transition for `c`: an exact pebble match first, then `any`.
    pub fn lookup(&self, t: &TreeIndex, c: &IpttConfig) -> Option<&Rhs> {
        let seen = match c.visible() {
            Some(col) => PebbleTest::Color(col.clone()),
            None => PebbleTest::None,
        };
        let mut key = IpttKey {
            letter: t.labels[c.node].clone(),
            state: c.state.clone(),
            prov: c.prov,
            root: t.is_root(c.node),
            pebble: seen,
        };
        self.delta.get(&key).or_else(|| {
            key.pebble = PebbleTest::Any;
            self.delta.get(&key)
        })
    }

    pub fn step(&self, t: &TreeIndex, c: &IpttConfig) -> Option<Frontier<IpttConfig>> {
        let rhs = self.lookup(t, c)?;
        instantiate_rhs(rhs, &mut |(q, m)| {
            let (node, prov) = t.target(c.node, m)?;
            let mut stack = c.stack.clone();
            match m {
                Move::Put(col) => stack.push((col.clone(), c.node)),
                Move::Remove => {
                    c.visible()?;
                    stack.pop();
                }
                _ => {}
            }
            Some(IpttConfig { state: q.clone(), prov, node, stack })
        })
    }

    pub fn run_observed(&self, tau: &Tree, fuel: u64, observe: impl FnMut(&IpttConfig)) -> (MachineResult<IpttConfig>, u64) {
        let t = TreeIndex::new(tau);
        treegen::run_observed(|c| self.step(&t, c), self.initial(), fuel, Policy::Leftmost, observe)
    }

    pub fn trace(&self, tau: &Tree, fuel: u64) -> treegen::Trace<IpttConfig> {
        let t = TreeIndex::new(tau);
        treegen::trace(|c| self.step(&t, c), self.initial(), fuel)
    }
}

pub fn iptt_run(spec: &IpttSpec, tau: &Tree, fuel: u64) -> Result<Tree, WalkError> {
    tau.validate(&spec.input)?;
    let t = TreeIndex::new(tau);
    match spec.run_observed(tau, fuel, |_| {}).0 {
        MachineResult::Output(o) => Ok(o),
        MachineResult::Diverged(n) => Err(WalkError::Diverged(n)),
        MachineResult::Stuck(c, _) => Err(WalkError::Stuck(c.show(&t))),
    }
}

#[allow(clippy::too_many_arguments)]
fn check_entry(
    input: &RankedAlphabet,
    output: &RankedAlphabet,
    states: &IndexSet<Name>,
    letter: &Name,
    state: &Name,
    prov: Provenance,
    root: bool,
    rhs: &Rhs,
    at: &str,
) -> Result<(), SpecError> {
    let bad = |m: String| Err(SpecError::Invalid(format!("{at}: {m}")));
    let Some(rank) = input.rank(letter) else { return bad(format!("unknown input letter {letter}")) };
    if !states.contains(state) {
        return bad(format!("undeclared state {state}"));
    }
    match prov {
        Provenance::FromParent if root => return bad("the root has no parent".into()),
        Provenance::FromChild(i) if i == 0 || i > rank => return bad(format!("no child {i}")),
        _ => {}
    }
    fn shape(f: &Rhs, output: &RankedAlphabet) -> Result<(), String> {
        match f {
            Frontier::Pending(_) => Ok(()),
            Frontier::Node(a, cs) => match output.rank(a) {
                Some(r) if r == cs.len() => cs.iter().try_for_each(|c| shape(c, output)),
                Some(r) => Err(format!("output letter {a} has rank {r}, given {}", cs.len())),
                None => Err(format!("unknown output letter {a}")),
            },
        }
    }
    if let Err(m) = shape(rhs, output) {
        return bad(m);
    }
    for (q, m) in rhs.pending() {
        if !states.contains(q) {
            return bad(format!("undeclared state {q}"));
        }
        match m {
            Move::ToParent if root => return bad("the root has no parent".into()),
            Move::ToChild(i) if *i == 0 || *i > rank => return bad(format!("no child {i}")),
            _ => {}
        }
    }
    Ok(())
}

struct DeltaKey {
    letter: Name,
    state: Name,
    prov: Provenance,
    pebble: Option<PebbleTest>,
}

struct Parsed {
    input: RankedAlphabet,
    output: RankedAlphabet,
    states: IndexSet<Name>,
    init: Name,
    colors: IndexSet<Name>,
    rules: Vec<(usize, bool, DeltaKey, Rhs)>,
}

fn parse_walker(text: &str, pebbles: bool) -> Result<Parsed, SpecError> {
    let mut input = None;
    let mut output = None;
    let mut states = IndexSet::new();
    let mut init = None;
    let mut colors = IndexSet::new();
    let mut rules = Vec::new();
    for l in spec_lines(text)? {
        let line = l.line;
        let err = |m: &str| SpecError::syntax(line, m);
        match l.keyword.as_str() {
            "input" => input = Some(parse_alphabet(&l.rest).map_err(|source| SpecError::Parse { line, source })?),
            "output" => output = Some(parse_alphabet(&l.rest).map_err(|source| SpecError::Parse { line, source })?),
            "state" => {
                let toks = names(&l.rest).ok_or_else(|| err("bad state name"))?;
                match toks[..] {
                    [q] => {
                        states.insert(Name::from(q));
                    }
                    [q, "init"] => {
                        states.insert(Name::from(q));
                        if init.replace(Name::from(q)).is_some() {
                            return Err(err("two initial states"));
                        }
                    }
                    _ => return Err(err("expected `state NAME [init]`")),
                }
            }
            "colors" if pebbles => {
                let inner = l
                    .rest
                    .strip_prefix('{')
                    .and_then(|s| s.strip_suffix('}'))
                    .ok_or_else(|| err("expected `colors { ... }`"))?;
                let mut rest = inner.trim();
                while !rest.is_empty() {
                    let (c, r) = take_name(rest).ok_or_else(|| err("bad color name"))?;
                    colors.insert(Name::from(c));
                    rest = r.trim_start();
                    rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
                }
            }
            "delta" | "delta-root" if !(pebbles && l.keyword == "delta-root") => {
                let mut cur = Cursor::new(&l.rest, line);
                let letter = cur.name()?;
                let state = cur.name()?;
                let prov = cur.provenance()?;
                let (root, pebble) = if pebbles {
                    let root = match cur.word()? {
                        "root" => true,
                        "nonroot" => false,
                        _ => return Err(err("expected `root` or `nonroot`")),
                    };
                    cur.keyword("pebble")?;
                    let p = cur.name()?;
                    let test = match &*p {
                        "NONE" => PebbleTest::None,
                        "any" => PebbleTest::Any,
                        _ => PebbleTest::Color(p),
                    };
                    (root, Some(test))
                } else {
                    (l.keyword == "delta-root", None)
                };
                cur.keyword("=")?;
                let rhs = cur.rhs()?;
                cur.end()?;
                rules.push((line, root, DeltaKey { letter, state, prov, pebble }, rhs));
            }
            other => return Err(SpecError::syntax(line, format!("unknown declaration `{other}`"))),
        }
    }
    let missing = |w: &str| SpecError::Invalid(format!("missing `{w}` declaration"));
    Ok(Parsed {
        input: input.ok_or_else(|| missing("input"))?,
        output: output.ok_or_else(|| missing("output"))?,
        init: init.ok_or_else(|| missing("state ... init"))?,
        states,
        colors,
        rules,
    })
}

struct Cursor<'a> {
    rest: &'a str,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str, line: usize) -> Self {
        Cursor { rest: s.trim_start(), line }
    }

    fn err(&self, m: &str) -> SpecError {
        SpecError::syntax(self.line, format!("{m} at `{}`", self.rest.chars().take(30).collect::<String>()))
    }

    fn skip(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn name(&mut self) -> Result<Name, SpecError> {
        self.skip();
        let (n, r) = take_name(self.rest).ok_or_else(|| self.err("expected a name"))?;
        self.rest = r;
        Ok(Name::from(n))
    }

    /// A word of letters and dashes, such as `from-child`.
    fn word(&mut self) -> Result<&'a str, SpecError> {
        self.skip();
        let end = self.rest.find(|c: char| !(c.is_alphanumeric() || c == '-')).unwrap_or(self.rest.len());
        if end == 0 {
            return Err(self.err("expected a word"));
        }
        let (w, r) = self.rest.split_at(end);
        self.rest = r;
        Ok(w)
    }

    fn number(&mut self) -> Result<usize, SpecError> {
        let w = self.word()?;
        w.parse().map_err(|_| self.err("expected a number"))
    }

    fn keyword(&mut self, k: &str) -> Result<(), SpecError> {
        self.skip();
        match self.rest.strip_prefix(k) {
            Some(r) => {
                self.rest = r;
                Ok(())
            }
            None => Err(self.err(&format!("expected `{k}`"))),
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip();
        self.rest.chars().next()
    }

    fn end(&mut self) -> Result<(), SpecError> {
        if self.peek().is_some() {
            return Err(self.err("unexpected text"));
        }
        Ok(())
    }

    fn provenance(&mut self) -> Result<Provenance, SpecError> {
        match self.word()? {
            "from-parent" => Ok(Provenance::FromParent),
            "self" => Ok(Provenance::Here),
            "from-child" => Ok(Provenance::FromChild(self.number()?)),
            _ => Err(self.err("expected `from-parent`, `self` or `from-child N`")),
        }
    }

    fn movement(&mut self) -> Result<Move, SpecError> {
        match self.word()? {
            "to-parent" => Ok(Move::ToParent),
            "stay" => Ok(Move::Stay),
            "to-child" => Ok(Move::ToChild(self.number()?)),
            "put" => Ok(Move::Put(self.name()?)),
            "remove" => Ok(Move::Remove),
            _ => Err(self.err("expected a move")),
        }
    }

    fn rhs(&mut self) -> Result<Rhs, SpecError> {
        if self.peek() == Some('(') {
            self.keyword("(")?;
            let q = self.name()?;
            self.keyword(",")?;
            let m = self.movement()?;
            self.keyword(")")?;
            return Ok(Frontier::Pending((q, m)));
        }
        let a = self.name()?;
        let mut cs = Vec::new();
        if self.peek() == Some('(') {
            self.keyword("(")?;
            loop {
                cs.push(self.rhs()?);
                if self.peek() == Some(',') {
                    self.keyword(",")?;
                } else {
                    break;
                }
            }
            self.keyword(")")?;
        }
        Ok(Frontier::Node(a, cs))
    }
}
