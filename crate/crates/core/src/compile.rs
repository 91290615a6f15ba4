//! Compilation of λ-transducers to tree-walking transducers (almost purely
//! affine rules) and to invisible pebble tree transducers (almost depth-1
//! rules), by running the token machines on one rule at a time.
//!
//! A rule `t_a` is run inside its frame `t_a <>1 ... <>k`, where `<>i`
//! stands for the term of the `i`-th child. The token entering `<>i` from
//! above moves the head to child `i`; the token leaving the frame at its
//! root moves the head to the parent. The output term gives the frame
//! `u <>1` around the whole input.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use indexmap::{IndexMap, IndexSet};
use thiserror::Error;

use crate::iam::{show_toks, Direction, Iam, IamConfig, Logged, SingleConfig, SingleStack, TapeSym, Variant};
use crate::syntax::{placeholder, Name, Term, Tree};
use crate::transducer::LambdaTransducerSpec;
use crate::treegen::Frontier;
use crate::types::{Classification, Tok, Type};
use crate::typing::{check_type, constant_types, AnnotatedTerm, NodeId, NodeKind, TypeError, TypingContext};
use crate::walking::{
    IpttKey, IpttSpec, Move, PebbleTest, Provenance, Rhs, TreeIndex, TwtConfig, TwtKey, TwtSpec,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("rules are {found}; the {target} target needs at most {limit}")]
    ClassificationTooHigh { target: &'static str, found: Classification, limit: Classification },
    #[error("frame of {what} does not type-check: {source}")]
    Frame {
        what: String,
        #[source]
        source: TypeError,
    },
    #[error("input tree: {0}")]
    Input(String),
}

/// A rule applied to placeholders for its children.
#[derive(Debug, Clone)]
pub struct Frame {
    /// `None` for the output frame `u <>1`.
    pub letter: Option<Name>,
    pub at: AnnotatedTerm,
    /// Node of `<>i` at index `i - 1`.
    pub holes: Vec<NodeId>,
}

impl Frame {
    fn new(letter: Option<Name>, term: Term, ty: &Type, consts: &HashMap<Name, Type>) -> Result<Frame, CompileError> {
        let what = letter.as_ref().map_or("the output term".to_string(), |a| format!("rule {a}"));
        let at = check_type(&TypingContext::empty(), &term, ty, consts).map_err(|source| CompileError::Frame { what, source })?;
        let mut holes = Vec::new();
        for i in 1.. {
            let p = placeholder(i);
            match (0..at.len()).find(|&id| matches!(at.kind(id), NodeKind::Const(c) if *c == p)) {
                Some(id) => holes.push(id),
                None => break,
            }
        }
        Ok(Frame { letter, at, holes })
    }

    /// 1-based index of the placeholder at `id`.
    fn hole(&self, id: NodeId) -> Option<usize> {
        self.holes.iter().position(|&h| h == id).map(|i| i + 1)
    }

    fn show(&self, dir: Direction, pos: NodeId) -> String {
        self.at.render(pos, dir.marker())
    }
}

/// Frames of all rules of a transducer, and the bound on tape lengths.
#[derive(Debug, Clone)]
pub struct Frames {
    pub spec: LambdaTransducerSpec,
    pub letters: IndexMap<Name, Frame>,
    pub out: Frame,
    pub height: usize,
}

impl Frames {
    pub fn new(spec: &LambdaTransducerSpec) -> Result<Frames, CompileError> {
        let mut consts = constant_types(&spec.output);
        for i in 1..=spec.input.max_rank().max(1) {
            consts.insert(placeholder(i), spec.memory.clone());
        }
        let mut letters = IndexMap::new();
        for (a, k) in spec.input.letters() {
            let term = Term::apps(spec.rules[a].clone(), (1..=k).map(|i| Term::Const(placeholder(i))));
            letters.insert(a.clone(), Frame::new(Some(a.clone()), term, &spec.memory, &consts)?);
        }
        let out = Frame::new(None, Term::app(spec.out.clone(), Term::Const(placeholder(1))), &Type::Base, &consts)?;
        let height = letters.values().chain(std::iter::once(&out)).map(|f| f.at.max_height()).max().unwrap_or(0);
        Ok(Frames { spec: spec.clone(), letters, out, height })
    }

    fn frame(&self, letter: Option<&Name>) -> &Frame {
        match letter {
            Some(a) => &self.letters[a],
            None => &self.out,
        }
    }
}

/// Finite control of the compiled transducers: the token inside the output
/// frame (`U`) or inside the frame of the current node (`T`), entering a
/// node's frame from above (`Nabla`), or leaving a child's frame (`Delta`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SimState {
    I,
    U { dir: Direction, pos: NodeId, tape: Vec<Tok> },
    T { letter: Name, dir: Direction, pos: NodeId, tape: Vec<Tok> },
    Nabla(Vec<Tok>),
    Delta(Vec<Tok>),
}

impl SimState {
    pub fn name(&self, frames: &Frames) -> Name {
        self.name_with(frames, None)
    }

    /// The state name, with the answer flag appended for pebble transducers.
    pub fn name_with(&self, frames: &Frames, answer: Option<bool>) -> Name {
        let flag = answer.map_or(String::new(), |a| format!(",{}", u8::from(a)));
        let s = match self {
            SimState::I => match answer {
                None => "I".to_string(),
                Some(_) => format!("I[{}]", flag.trim_start_matches(',')),
            },
            SimState::U { dir, pos, tape } => {
                format!("U[{dir},\"{}\",\"{}\"{flag}]", frames.out.show(*dir, *pos), show_toks(tape))
            }
            SimState::T { letter, dir, pos, tape } => {
                format!("T[{dir},\"{}\",\"{}\"{flag}]", frames.letters[letter].show(*dir, *pos), show_toks(tape))
            }
            SimState::Nabla(tape) => format!("Nabla[\"{}\"{flag}]", show_toks(tape)),
            SimState::Delta(tape) => format!("Delta[\"{}\"{flag}]", show_toks(tape)),
        };
        Name::from(s)
    }

    /// The frame, direction, position and tape this state stands for, at a
    /// node labelled `letter` reached with `prov`.
    fn local(&self, frames: &Frames, letter: &Name, prov: Provenance) -> Option<(Option<Name>, Direction, NodeId, Vec<Tok>)> {
        Some(match self {
            SimState::I => (None, Direction::Down, frames.out.at.root(), Vec::new()),
            SimState::U { dir, pos, tape } => (None, *dir, *pos, tape.clone()),
            SimState::T { letter: b, dir, pos, tape } => {
                if b != letter {
                    return None;
                }
                (Some(b.clone()), *dir, *pos, tape.clone())
            }
            SimState::Nabla(tape) => (Some(letter.clone()), Direction::Down, frames.letters[letter].at.root(), tape.clone()),
            SimState::Delta(tape) => match prov {
                Provenance::FromChild(i) => {
                    (Some(letter.clone()), Direction::Up, *frames.letters[letter].holes.get(i - 1)?, tape.clone())
                }
                _ => (None, Direction::Up, frames.out.holes[0], tape.clone()),
            },
        })
    }
}

/// Maps a token position reached by one local step to a state and a head
/// move; `None` where the machine cannot continue.
fn place(
    frames: &Frames,
    frame: Option<&Name>,
    root: bool,
    dir: Direction,
    pos: NodeId,
    tape: Vec<Tok>,
) -> Option<(SimState, Move)> {
    if tape.len() > frames.height {
        return None;
    }
    let f = frames.frame(frame);
    if let Some(i) = f.hole(pos) {
        if dir != Direction::Down {
            return None;
        }
        return Some(match frame {
            Some(_) => (SimState::Nabla(tape), Move::ToChild(i)),
            None => (SimState::Nabla(tape), Move::Stay),
        });
    }
    if pos == f.at.root() {
        return match (frame, dir) {
            (Some(_), Direction::Up) => Some((SimState::Delta(tape), if root { Move::Stay } else { Move::ToParent })),
            _ => None,
        };
    }
    Some(match frame {
        Some(a) => (SimState::T { letter: a.clone(), dir, pos, tape }, Move::Stay),
        None => (SimState::U { dir, pos, tape }, Move::Stay),
    })
}

fn to_tape(toks: &[Tok]) -> Vec<TapeSym> {
    toks.iter().map(|&t| TapeSym::from(t)).collect()
}

fn from_tape(tape: &[TapeSym]) -> Option<Vec<Tok>> {
    tape.iter().map(TapeSym::tok).collect()
}

fn map_frontier<K, L>(f: Frontier<K>, g: &mut impl FnMut(K) -> Option<L>) -> Option<Frontier<L>> {
    Some(match f {
        Frontier::Pending(k) => Frontier::Pending(g(k)?),
        Frontier::Node(a, cs) => Frontier::Node(a, cs.into_iter().map(|c| map_frontier(c, g)).collect::<Option<_>>()?),
    })
}

/// One local step of the almost purely affine machine from `state`.
fn twt_image(frames: &Frames, letter: &Name, root: bool, state: &SimState, prov: Provenance) -> Option<Frontier<(SimState, Move)>> {
    let (frame, dir, pos, tape) = state.local(frames, letter, prov)?;
    let f = frames.frame(frame.as_ref());
    let machine = Iam::new(&f.at, Variant::AlmostPurelyAffine);
    let image = machine.step(&IamConfig { dir, pos, tape: to_tape(&tape), log: Vec::new() })?;
    map_frontier(image, &mut |k: IamConfig| place(frames, frame.as_ref(), root, k.dir, k.pos, from_tape(&k.tape)?))
}

/// Keys reachable from the initial configuration when the head may enter
/// any letter below and any letter above.
fn successors<S: Clone>(
    frames: &Frames,
    letter: &Name,
    root: bool,
    q: &S,
    m: &Move,
    mut push: impl FnMut(Name, bool, S, Provenance),
) {
    match m {
        Move::Stay | Move::Put(_) | Move::Remove => push(letter.clone(), root, q.clone(), Provenance::Here),
        Move::ToChild(_) => {
            for (b, _) in frames.spec.input.letters() {
                push(b.clone(), false, q.clone(), Provenance::FromParent);
            }
        }
        Move::ToParent => {
            for (b, k) in frames.spec.input.letters() {
                for j in 1..=k {
                    for r in [true, false] {
                        push(b.clone(), r, q.clone(), Provenance::FromChild(j));
                    }
                }
            }
        }
    }
}

pub fn compile_to_twt(spec: &LambdaTransducerSpec) -> Result<TwtSpec, CompileError> {
    let class = spec.classification();
    if class > Classification::AlmostPurelyAffine {
        return Err(CompileError::ClassificationTooHigh {
            target: "tree-walking",
            found: class,
            limit: Classification::AlmostPurelyAffine,
        });
    }
    let frames = Frames::new(spec)?;
    Ok(synthesize_twt(&frames))
}

fn synthesize_twt(frames: &Frames) -> TwtSpec {
    let mut seen = HashSet::new();
    let mut work = VecDeque::new();
    let mut states = IndexSet::new();
    let mut delta = IndexMap::new();
    let mut delta_root = IndexMap::new();
    let init = SimState::I.name(frames);
    states.insert(init.clone());
    for (a, _) in frames.spec.input.letters() {
        work.push_back((a.clone(), true, SimState::I, Provenance::Here));
    }
    while let Some(key) = work.pop_front() {
        if !seen.insert(key.clone()) {
            continue;
        }
        let (a, root, q, prov) = key;
        let Some(image) = twt_image(frames, &a, root, &q, prov) else { continue };
        let mut rhs_leaves = Vec::new();
        let rhs: Rhs = image.map(&mut |(q2, m): (SimState, Move)| {
            rhs_leaves.push((q2.clone(), m.clone()));
            let n = q2.name(frames);
            states.insert(n.clone());
            (n, m)
        });
        for (q2, m) in rhs_leaves {
            successors(frames, &a, root, &q2, &m, |b, r, s, p| work.push_back((b, r, s, p)));
        }
        let k = TwtKey { letter: a, state: q.name(frames), prov };
        if root {
            delta_root.insert(k, rhs);
        } else {
            delta.insert(k, rhs);
        }
    }
    TwtSpec {
        input: frames.spec.input.clone(),
        output: frames.spec.output.clone(),
        states,
        init,
        delta,
        delta_root,
    }
}

/// Where each node of a program `u t_τ` comes from: the output frame or the
/// frame of an input node, and the node of that frame.
#[derive(Debug, Clone)]
pub struct Simulation<'f> {
    frames: &'f Frames,
    pub program: AnnotatedTerm,
    pub tree: TreeIndex,
    origin: Vec<(Option<usize>, NodeId)>,
}

impl<'f> Simulation<'f> {
    pub fn new(frames: &'f Frames, tau: &Tree) -> Result<Self, CompileError> {
        let program = frames.spec.annotated_program(tau).map_err(|e| CompileError::Input(e.to_string()))?;
        let tree = TreeIndex::new(tau);
        let mut sim = Simulation { frames, program, tree, origin: Vec::new() };
        let mut origin = vec![(None, 0); sim.program.len()];
        sim.walk(&mut origin, sim.program.root(), None, frames.out.at.root());
        sim.origin = origin;
        Ok(sim)
    }

    fn walk(&self, origin: &mut [(Option<usize>, NodeId)], v: NodeId, node: Option<usize>, f: NodeId) {
        let frame = self.frames.frame(node.map(|n| &self.tree.labels[n]));
        if let Some(i) = frame.hole(f) {
            let child = match node {
                Some(n) => self.tree.children[n][i - 1],
                None => 0,
            };
            let block = self.frames.letters[&self.tree.labels[child]].at.root();
            return self.walk(origin, v, Some(child), block);
        }
        origin[v] = (node, f);
        let vs = self.program.node(v).children.clone();
        let fs = frame.at.node(f).children.clone();
        debug_assert_eq!(vs.len(), fs.len());
        for (cv, cf) in vs.into_iter().zip(fs) {
            self.walk(origin, cv, node, cf);
        }
    }

    /// The state of the compiled transducer standing for an IAM
    /// configuration on the whole program.
    pub fn sim_state(&self, c: &IamConfig) -> Option<(SimState, Provenance, usize)> {
        let tape = from_tape(&c.tape)?;
        if c.pos == self.program.root() {
            return (c.dir == Direction::Down && tape.is_empty()).then_some((SimState::I, Provenance::Here, 0));
        }
        let (node, f) = self.origin[c.pos];
        let Some(n) = node else {
            return Some((SimState::U { dir: c.dir, pos: f, tape }, Provenance::Here, 0));
        };
        let letter = &self.tree.labels[n];
        if f != self.frames.letters[letter].at.root() {
            return Some((SimState::T { letter: letter.clone(), dir: c.dir, pos: f, tape }, Provenance::Here, n));
        }
        Some(match (c.dir, self.tree.parent[n]) {
            (Direction::Down, None) => (SimState::Nabla(tape), Provenance::Here, n),
            (Direction::Down, Some(_)) => (SimState::Nabla(tape), Provenance::FromParent, n),
            (Direction::Up, Some((p, j))) => (SimState::Delta(tape), Provenance::FromChild(j), p),
            (Direction::Up, None) => (SimState::Delta(tape), Provenance::Here, 0),
        })
    }

    pub fn sim_map(&self, c: &IamConfig) -> Option<TwtConfig> {
        let (q, prov, node) = self.sim_state(c)?;
        Some(TwtConfig { state: q.name(self.frames), prov, node })
    }
}

/// Pebble color for a logged occurrence of a let-bound variable.
fn color(frame: Option<&Name>, occ: NodeId) -> Name {
    Name::from(format!("P[{},{occ}]", frame.map_or("u", |a| &**a)))
}

fn dummy() -> Logged {
    Logged { occ: usize::MAX, log: Vec::new() }
}

/// What the single-stack rule fired at a local configuration does to the
/// exponential stack, seen as pebble moves.
enum StackEffect {
    None,
    Push(NodeId),
    Pop,
    Unsupported,
}

fn stack_effect(at: &AnnotatedTerm, dir: Direction, pos: NodeId) -> StackEffect {
    match dir {
        Direction::Down => {
            let NodeKind::Var(_) = at.kind(pos) else { return StackEffect::None };
            let Some(b) = at.node(pos).binder else { return StackEffect::None };
            if !matches!(at.kind(b), NodeKind::Let(_)) {
                return StackEffect::None;
            }
            let bound = at.child(b, 0);
            if !at.ty(bound).unbang().is_base() {
                StackEffect::Push(pos)
            } else if at.depth_between(b, pos) > 0 {
                // Discarding entries that may lie on other nodes.
                StackEffect::Unsupported
            } else {
                StackEffect::None
            }
        }
        Direction::Up => match at.parent(pos) {
            Some(p) if matches!(at.kind(p), NodeKind::Let(_)) && at.node(pos).child_index == 0 => {
                if at.ty(pos).unbang().is_base() {
                    StackEffect::None
                } else {
                    StackEffect::Pop
                }
            }
            _ => StackEffect::None,
        },
    }
}

type PebbleState = (SimState, bool);

/// The pebble tests that matter for a state: a specific color when the
/// token is about to leave a let-bound term of non-base type, `any`
/// otherwise.
fn pebble_tests(frames: &Frames, letter: &Name, q: &PebbleState, prov: Provenance) -> Vec<PebbleTest> {
    let Some((frame, dir, pos, _)) = q.0.local(frames, letter, prov) else { return Vec::new() };
    let f = frames.frame(frame.as_ref());
    match stack_effect(&f.at, dir, pos) {
        StackEffect::Pop => {
            let b = f.at.parent(pos).expect("let-bound term has a parent");
            f.at.node(b).occurrences.iter().map(|&o| PebbleTest::Color(color(frame.as_ref(), o))).collect()
        }
        _ => vec![PebbleTest::Any],
    }
}

fn iptt_image(
    frames: &Frames,
    letter: &Name,
    root: bool,
    q: &PebbleState,
    prov: Provenance,
    test: &PebbleTest,
) -> Option<Frontier<(PebbleState, Move)>> {
    let (frame, dir, pos, mult) = q.0.local(frames, letter, prov)?;
    let f = frames.frame(frame.as_ref());
    let effect = stack_effect(&f.at, dir, pos);
    let exp = match (&effect, test) {
        (StackEffect::Unsupported, _) => return None,
        (StackEffect::Pop, PebbleTest::Color(c)) => {
            let occ = f
                .at
                .node(f.at.parent(pos)?)
                .occurrences
                .iter()
                .copied()
                .find(|&o| color(frame.as_ref(), o) == *c)?;
            let b = f.at.node(occ).binder?;
            vec![Logged { occ, log: vec![dummy(); f.at.depth_between(b, occ)] }]
        }
        (StackEffect::Pop, _) => return None,
        _ => vec![dummy(), dummy()],
    };
    let machine = SingleStack::new(&f.at);
    let image = machine.step(&SingleConfig { dir, pos, mult, exp, answer: q.1 })?;
    map_frontier(image, &mut |k: SingleConfig| {
        let (s, m) = place(frames, frame.as_ref(), root, k.dir, k.pos, k.mult)?;
        let m = match &effect {
            StackEffect::Push(occ) => {
                debug_assert_eq!(m, Move::Stay);
                Move::Put(color(frame.as_ref(), *occ))
            }
            StackEffect::Pop => Move::Remove,
            _ => m,
        };
        Some(((s, k.answer), m))
    })
}

pub fn compile_to_iptt(spec: &LambdaTransducerSpec) -> Result<IpttSpec, CompileError> {
    let class = spec.classification();
    if class > Classification::AlmostDepth1 {
        return Err(CompileError::ClassificationTooHigh {
            target: "pebble",
            found: class,
            limit: Classification::AlmostDepth1,
        });
    }
    let frames = Frames::new(spec)?;
    let name = |q: &PebbleState| q.0.name_with(&frames, Some(q.1));
    let mut seen = HashSet::new();
    let mut work = VecDeque::new();
    let mut states = IndexSet::new();
    let mut colors = IndexSet::new();
    let mut delta = IndexMap::new();
    let start: PebbleState = (SimState::I, false);
    let init = name(&start);
    states.insert(init.clone());
    for (a, _) in spec.input.letters() {
        work.push_back((a.clone(), true, start.clone(), Provenance::Here));
    }
    while let Some(key) = work.pop_front() {
        if !seen.insert(key.clone()) {
            continue;
        }
        let (a, root, q, prov) = key;
        for test in pebble_tests(&frames, &a, &q, prov) {
            let Some(image) = iptt_image(&frames, &a, root, &q, prov, &test) else { continue };
            let mut leaves = Vec::new();
            let rhs: Rhs = image.map(&mut |(q2, m): (PebbleState, Move)| {
                leaves.push((q2.clone(), m.clone()));
                let n = name(&q2);
                states.insert(n.clone());
                if let Move::Put(c) = &m {
                    colors.insert(c.clone());
                }
                (n, m)
            });
            if let PebbleTest::Color(c) = &test {
                colors.insert(c.clone());
            }
            for (q2, m) in leaves {
                successors(&frames, &a, root, &q2, &m, |b, r, s, p| work.push_back((b, r, s, p)));
            }
            delta.insert(IpttKey { letter: a.clone(), state: name(&q), prov, root, pebble: test }, rhs);
        }
    }
    Ok(IpttSpec { input: spec.input.clone(), output: spec.output.clone(), states, init, colors, delta })
}

/// A one-line summary of a compiled transducer's size.
pub fn describe_twt(t: &TwtSpec) -> String {
    let mut s = String::new();
    let _ = write!(s, "{} states, {} transitions", t.states.len(), t.transitions());
    s
}
