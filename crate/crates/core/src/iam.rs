//! Interaction abstract machines evaluating closed terms of type `o` by
//! moving a token over the term, emitting output letters as it meets
//! constants.
//!
//! Four variants share one configuration shape: the purely affine machine,
//! its extension with `let` and boxes, the almost depth-1 machine with a log
//! of positions, and a single-stack reformulation of the latter.

use std::fmt::{self, Write};

use thiserror::Error;

use crate::syntax::{Marker, Tree};
use crate::treegen::{self, Frontier, MachineResult, Policy};
use crate::types::{navigate_to_base, Classification, Tok};
use crate::typing::{AnnotatedTerm, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Down => Direction::Up,
            Direction::Up => Direction::Down,
        }
    }

    pub fn marker(self) -> Marker {
        match self {
            Direction::Down => Marker::Down,
            Direction::Up => Marker::Up,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Down => "down",
            Direction::Up => "up",
        })
    }
}

/// A variable occurrence paired with the log needed to re-enter the box
/// around it; the log has one entry per non-base box crossed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Logged {
    pub occ: NodeId,
    pub log: Vec<Logged>,
}

impl fmt::Display for Logged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[#{}", self.occ)?;
        if !self.log.is_empty() {
            f.write_char(':')?;
            for l in self.log.iter().rev() {
                write!(f, "{l}")?;
            }
        }
        f.write_char(']')
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TapeSym {
    P,
    O,
    Logged(Logged),
}

impl TapeSym {
    pub fn tok(&self) -> Option<Tok> {
        match self {
            TapeSym::P => Some(Tok::P),
            TapeSym::O => Some(Tok::O),
            TapeSym::Logged(_) => None,
        }
    }
}

impl From<Tok> for TapeSym {
    fn from(t: Tok) -> Self {
        match t {
            Tok::P => TapeSym::P,
            Tok::O => TapeSym::O,
        }
    }
}

/// Renders a stack stored bottom-first as a top-first string.
pub fn show_tape(tape: &[TapeSym]) -> String {
    let mut s = String::new();
    for t in tape.iter().rev() {
        match t {
            TapeSym::P => s.push('p'),
            TapeSym::O => s.push('o'),
            TapeSym::Logged(l) => {
                let _ = write!(s, "{l}");
            }
        }
    }
    s
}

pub fn show_toks(toks: &[Tok]) -> String {
    toks.iter().rev().map(|t| t.to_string()).collect()
}

fn show_log(log: &[Logged]) -> String {
    log.iter().rev().map(|l| l.to_string()).collect()
}

/// Token state of the two-stack machines. Stacks are stored bottom-first, so
/// the top is the last element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IamConfig {
    pub dir: Direction,
    pub pos: NodeId,
    pub tape: Vec<TapeSym>,
    pub log: Vec<Logged>,
}

impl IamConfig {
    pub fn initial() -> Self {
        IamConfig { dir: Direction::Down, pos: 0, tape: Vec::new(), log: Vec::new() }
    }

    fn at(&self, dir: Direction, pos: NodeId) -> Self {
        IamConfig { dir, pos, tape: self.tape.clone(), log: self.log.clone() }
    }

    fn push(mut self, t: TapeSym) -> Self {
        self.tape.push(t);
        self
    }

    /// The `p`/`o` entries of the tape, top first.
    pub fn mult(&self) -> Vec<Tok> {
        self.tape.iter().rev().filter_map(TapeSym::tok).collect()
    }
}

/// Single-stack state: multiplicative stack `M`, exponential stack `E` and
/// the answer flag telling whether the top of `E` is the current log entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SingleConfig {
    pub dir: Direction,
    pub pos: NodeId,
    pub mult: Vec<Tok>,
    pub exp: Vec<Logged>,
    pub answer: bool,
}

impl SingleConfig {
    pub fn initial() -> Self {
        SingleConfig { dir: Direction::Down, pos: 0, mult: Vec::new(), exp: Vec::new(), answer: false }
    }

    fn at(&self, dir: Direction, pos: NodeId) -> Self {
        SingleConfig { dir, pos, ..self.clone() }
    }

    fn push(mut self, t: Tok) -> Self {
        self.mult.push(t);
        self
    }

    /// The single-stack state corresponding to a two-stack configuration:
    /// the log is laid on top of the logged tape entries, the flag records
    /// whether it is non-empty.
    pub fn abstract_from(c: &IamConfig) -> Self {
        let mut exp: Vec<Logged> = c
            .tape
            .iter()
            .filter_map(|t| match t {
                TapeSym::Logged(l) => Some(l.clone()),
                _ => None,
            })
            .collect();
        exp.extend(c.log.iter().cloned());
        SingleConfig {
            dir: c.dir,
            pos: c.pos,
            mult: c.tape.iter().filter_map(TapeSym::tok).collect(),
            exp,
            answer: !c.log.is_empty(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Auto,
    PurelyAffine,
    AlmostPurelyAffine,
    Depth1,
    SingleStack,
}

impl Variant {
    pub fn max_tier(self) -> Classification {
        match self {
            Variant::PurelyAffine => Classification::PurelyAffine,
            Variant::AlmostPurelyAffine => Classification::AlmostPurelyAffine,
            Variant::Depth1 | Variant::SingleStack | Variant::Auto => Classification::AlmostDepth1,
        }
    }

    /// The least variant able to run terms of the given tier.
    pub fn for_tier(c: Classification) -> Option<Variant> {
        match c {
            Classification::PurelyAffine => Some(Variant::PurelyAffine),
            Classification::AlmostPurelyAffine => Some(Variant::AlmostPurelyAffine),
            Classification::AlmostDepth1 => Some(Variant::Depth1),
            Classification::General => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Auto => "auto",
            Variant::PurelyAffine => "pa",
            Variant::AlmostPurelyAffine => "apa",
            Variant::Depth1 => "depth1",
            Variant::SingleStack => "single",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IamError {
    #[error("term is {found}, beyond what the {variant} machine handles")]
    ClassificationTooHigh { variant: Variant, found: Classification },
    #[error("the program must be a closed term of type o, got type {0}")]
    NotClosedBase(String),
    #[error("machine stuck at {config}: {reason}")]
    Stuck { config: String, reason: String },
    #[error("machine did not finish within {0} steps")]
    Diverged(u64),
}

/// A program prepared for one of the two-stack machines.
pub struct Iam<'a> {
    v: &'a AnnotatedTerm,
    variant: Variant,
}

fn is_fn_child(v: &AnnotatedTerm, id: NodeId) -> bool {
    v.node(id).child_index == 0
}

/// Whether the top `k` entries of `tape` are all `p`.
fn has_p_prefix<T: PartialEq>(tape: &[T], k: usize, p: &T) -> bool {
    tape.len() >= k && tape[tape.len() - k..].iter().all(|t| t == p)
}

/// Output node for a constant of rank `k` reached with `p^k·T`: child `i`
/// goes up from the constant with tape `p^i·o·T`.
fn constant_node<K>(label: &crate::syntax::Name, k: usize, mut child: impl FnMut(usize) -> K) -> Frontier<K> {
    Frontier::Node(label.clone(), (0..k).map(|i| Frontier::Pending(child(i))).collect())
}

impl<'a> Iam<'a> {
    pub fn new(v: &'a AnnotatedTerm, variant: Variant) -> Self {
        Iam { v, variant }
    }

    pub fn program(&self) -> &AnnotatedTerm {
        self.v
    }

    fn exponentials(&self) -> bool {
        self.variant != Variant::PurelyAffine
    }

    fn depth1(&self) -> bool {
        matches!(self.variant, Variant::Depth1 | Variant::SingleStack)
    }

    /// `(term with marker, "tape")`, plus the log for the depth-1 machine.
    pub fn show(&self, c: &IamConfig) -> String {
        let term = self.v.render(c.pos, c.dir.marker());
        if self.depth1() {
            format!("({term}, \"{}\", \"{}\")", show_tape(&c.tape), show_log(&c.log))
        } else {
            format!("({term}, \"{}\")", show_tape(&c.tape))
        }
    }

    pub fn step(&self, c: &IamConfig) -> Option<Frontier<IamConfig>> {
        match c.dir {
            Direction::Down => self.down(c),
            Direction::Up => self.up(c),
        }
    }

    fn down(&self, c: &IamConfig) -> Option<Frontier<IamConfig>> {
        let v = self.v;
        let node = v.node(c.pos);
        let one = |k: IamConfig| Some(Frontier::Pending(k));
        match &node.kind {
            NodeKind::App => one(c.at(Direction::Down, node.children[0]).push(TapeSym::P)),
            NodeKind::Lam(_) => {
                let mut k = c.at(Direction::Down, node.children[0]);
                match k.tape.pop()? {
                    TapeSym::P => one(k),
                    TapeSym::O => {
                        // Exits at the occurrence; an unused binder has none.
                        let occ = *node.occurrences.first()?;
                        k.dir = Direction::Up;
                        k.pos = occ;
                        one(k)
                    }
                    TapeSym::Logged(_) => None,
                }
            }
            NodeKind::Var(_) => {
                let b = node.binder?;
                match v.kind(b) {
                    NodeKind::Lam(_) => one(c.at(Direction::Up, b).push(TapeSym::O)),
                    NodeKind::Let(_) if self.exponentials() => {
                        let bound = v.child(b, 0);
                        if !self.depth1() {
                            return one(c.at(Direction::Down, bound));
                        }
                        let n = v.depth_between(b, c.pos);
                        let mut k = c.at(Direction::Down, bound);
                        if v.ty(bound).unbang().is_base() {
                            if k.log.len() < n {
                                return None;
                            }
                            k.log.truncate(k.log.len() - n);
                            one(k)
                        } else {
                            if v.depth(b) != 0 || c.log.len() != n {
                                return None;
                            }
                            let entry = Logged { occ: c.pos, log: std::mem::take(&mut k.log) };
                            one(k.push(TapeSym::Logged(entry)))
                        }
                    }
                    _ => None,
                }
            }
            NodeKind::Bang if self.exponentials() => {
                let inner = node.children[0];
                if !self.depth1() || v.box_is_base(c.pos) {
                    return one(c.at(Direction::Down, inner));
                }
                if node.depth != 0 || !c.log.is_empty() {
                    return None;
                }
                let mut k = c.at(Direction::Down, inner);
                match k.tape.pop()? {
                    TapeSym::Logged(l) => {
                        k.log = vec![l];
                        one(k)
                    }
                    _ => None,
                }
            }
            NodeKind::Let(_) if self.exponentials() => one(c.at(Direction::Down, node.children[1])),
            NodeKind::Const(name) => {
                let k = v.ty(c.pos).uncurry().0.len();
                if !has_p_prefix(&c.tape, k, &TapeSym::P) {
                    return None;
                }
                let mut rest = c.tape.clone();
                rest.truncate(rest.len() - k);
                rest.push(TapeSym::O);
                Some(constant_node(name, k, |i| {
                    let mut t = rest.clone();
                    t.extend(std::iter::repeat_n(TapeSym::P, i));
                    IamConfig { dir: Direction::Up, pos: c.pos, tape: t, log: c.log.clone() }
                }))
            }
            _ => None,
        }
    }

    fn up(&self, c: &IamConfig) -> Option<Frontier<IamConfig>> {
        let v = self.v;
        let par = v.parent(c.pos)?;
        let pnode = v.node(par);
        let one = |k: IamConfig| Some(Frontier::Pending(k));
        match &pnode.kind {
            NodeKind::App if is_fn_child(v, c.pos) => {
                let mut k = c.clone();
                match k.tape.pop()? {
                    TapeSym::P => {
                        k.pos = par;
                        one(k)
                    }
                    TapeSym::O => {
                        k.dir = Direction::Down;
                        k.pos = pnode.children[1];
                        one(k)
                    }
                    TapeSym::Logged(_) => None,
                }
            }
            NodeKind::App => one(c.at(Direction::Down, pnode.children[0]).push(TapeSym::O)),
            NodeKind::Lam(_) => one(c.at(Direction::Up, par).push(TapeSym::P)),
            NodeKind::Let(_) if self.exponentials() && !is_fn_child(v, c.pos) => one(c.at(Direction::Up, par)),
            NodeKind::Let(_) if self.depth1() => {
                // Leaving the bound term: return to the logged occurrence.
                if v.ty(c.pos).unbang().is_base() || pnode.depth != 0 || !c.log.is_empty() {
                    return None;
                }
                let mut k = c.clone();
                match k.tape.pop()? {
                    TapeSym::Logged(l) => {
                        k.pos = l.occ;
                        k.log = l.log;
                        one(k)
                    }
                    _ => None,
                }
            }
            NodeKind::Bang if self.depth1() => {
                if v.box_is_base(par) || pnode.depth != 0 || c.log.len() != 1 {
                    return None;
                }
                let mut k = c.at(Direction::Up, par);
                let l = k.log.pop().expect("log has one entry");
                one(k.push(TapeSym::Logged(l)))
            }
            _ => None,
        }
    }

    /// Why the machine has no move from `c`.
    pub fn explain_stuck(&self, c: &IamConfig) -> String {
        let v = self.v;
        if c.dir == Direction::Up {
            match v.parent(c.pos) {
                None => return "token left the whole program upwards".into(),
                Some(par) => match v.kind(par) {
                    NodeKind::Let(_) if is_fn_child(v, c.pos) => {
                        return "internal invariant violated: token moves up out of a let-bound term".into()
                    }
                    NodeKind::Bang => return "internal invariant violated: token moves up out of a box".into(),
                    _ => {}
                },
            }
        }
        if let NodeKind::Lam(_) = v.kind(c.pos) {
            if c.dir == Direction::Down && v.node(c.pos).occurrences.is_empty() {
                return "token enters a binder whose variable is unused".into();
            }
        }
        "no transition applies".into()
    }

    pub fn run(&self, fuel: u64) -> Result<(Tree, u64), IamError> {
        let (res, steps) =
            treegen::run_observed(|k| self.step(k), IamConfig::initial(), fuel, Policy::Leftmost, |_| {});
        self.finish(res).map(|t| (t, steps))
    }

    fn finish(&self, res: MachineResult<IamConfig>) -> Result<Tree, IamError> {
        match res {
            MachineResult::Output(t) => Ok(t),
            MachineResult::Diverged(n) => Err(IamError::Diverged(n)),
            MachineResult::Stuck(k, _) => {
                Err(IamError::Stuck { config: self.show(&k), reason: self.explain_stuck(&k) })
            }
        }
    }

    pub fn trace(&self, fuel: u64) -> treegen::Trace<IamConfig> {
        treegen::trace(|k| self.step(k), IamConfig::initial(), fuel)
    }

    /// Runs and hands every fired configuration to `observe`.
    pub fn run_observed(&self, fuel: u64, observe: impl FnMut(&IamConfig)) -> (MachineResult<IamConfig>, u64) {
        treegen::run_observed(|k| self.step(k), IamConfig::initial(), fuel, Policy::Leftmost, observe)
    }
}

/// The single-stack machine on an almost depth-1 program.
pub struct SingleStack<'a> {
    v: &'a AnnotatedTerm,
}

impl<'a> SingleStack<'a> {
    pub fn new(v: &'a AnnotatedTerm) -> Self {
        SingleStack { v }
    }

    pub fn show(&self, c: &SingleConfig) -> String {
        format!(
            "({}, \"{}\", \"{}\", {})",
            self.v.render(c.pos, c.dir.marker()),
            show_toks(&c.mult),
            show_log(&c.exp),
            u8::from(c.answer)
        )
    }

    pub fn step(&self, c: &SingleConfig) -> Option<Frontier<SingleConfig>> {
        match c.dir {
            Direction::Down => self.down(c),
            Direction::Up => self.up(c),
        }
    }

    fn down(&self, c: &SingleConfig) -> Option<Frontier<SingleConfig>> {
        let v = self.v;
        let node = v.node(c.pos);
        let one = |k: SingleConfig| Some(Frontier::Pending(k));
        match &node.kind {
            NodeKind::App => one(c.at(Direction::Down, node.children[0]).push(Tok::P)),
            NodeKind::Lam(_) => {
                let mut k = c.at(Direction::Down, node.children[0]);
                match k.mult.pop()? {
                    Tok::P => one(k),
                    Tok::O => {
                        k.dir = Direction::Up;
                        k.pos = *node.occurrences.first()?;
                        one(k)
                    }
                }
            }
            NodeKind::Var(_) => {
                let b = node.binder?;
                match v.kind(b) {
                    NodeKind::Lam(_) => one(c.at(Direction::Up, b).push(Tok::O)),
                    NodeKind::Let(_) => {
                        let bound = v.child(b, 0);
                        let n = v.depth_between(b, c.pos);
                        let mut k = c.at(Direction::Down, bound);
                        if v.ty(bound).unbang().is_base() {
                            // E_n·E_m·E with a = n+m becomes E_m·E with a = m.
                            let m = v.depth(b);
                            if usize::from(c.answer) != n + m || k.exp.len() < n {
                                return None;
                            }
                            k.exp.truncate(k.exp.len() - n);
                            k.answer = m == 1;
                            one(k)
                        } else {
                            if v.depth(b) != 0 || usize::from(c.answer) != n || k.exp.len() < n {
                                return None;
                            }
                            let log = k.exp.split_off(k.exp.len() - n);
                            k.exp.push(Logged { occ: c.pos, log });
                            k.answer = false;
                            one(k)
                        }
                    }
                    _ => None,
                }
            }
            NodeKind::Bang => {
                let mut k = c.at(Direction::Down, node.children[0]);
                if v.box_is_base(c.pos) {
                    return one(k);
                }
                if node.depth != 0 || c.answer {
                    return None;
                }
                k.answer = true;
                one(k)
            }
            NodeKind::Let(_) => one(c.at(Direction::Down, node.children[1])),
            NodeKind::Const(name) => {
                let k = v.ty(c.pos).uncurry().0.len();
                if !has_p_prefix(&c.mult, k, &Tok::P) {
                    return None;
                }
                let mut rest = c.mult.clone();
                rest.truncate(rest.len() - k);
                rest.push(Tok::O);
                Some(constant_node(name, k, |i| {
                    let mut m = rest.clone();
                    m.extend(std::iter::repeat_n(Tok::P, i));
                    SingleConfig { dir: Direction::Up, pos: c.pos, mult: m, exp: c.exp.clone(), answer: c.answer }
                }))
            }
        }
    }

    fn up(&self, c: &SingleConfig) -> Option<Frontier<SingleConfig>> {
        let v = self.v;
        let par = v.parent(c.pos)?;
        let pnode = v.node(par);
        let one = |k: SingleConfig| Some(Frontier::Pending(k));
        match &pnode.kind {
            NodeKind::App if is_fn_child(v, c.pos) => {
                let mut k = c.clone();
                match k.mult.pop()? {
                    Tok::P => k.pos = par,
                    Tok::O => {
                        k.dir = Direction::Down;
                        k.pos = pnode.children[1];
                    }
                }
                one(k)
            }
            NodeKind::App => one(c.at(Direction::Down, pnode.children[0]).push(Tok::O)),
            NodeKind::Lam(_) => one(c.at(Direction::Up, par).push(Tok::P)),
            NodeKind::Let(_) if !is_fn_child(v, c.pos) => one(c.at(Direction::Up, par)),
            NodeKind::Let(_) => {
                if v.ty(c.pos).unbang().is_base() || pnode.depth != 0 || c.answer {
                    return None;
                }
                let mut k = c.clone();
                let l = k.exp.pop()?;
                k.pos = l.occ;
                k.answer = !l.log.is_empty();
                k.exp.extend(l.log);
                one(k)
            }
            NodeKind::Bang => {
                if v.box_is_base(par) || pnode.depth != 0 || !c.answer {
                    return None;
                }
                let mut k = c.at(Direction::Up, par);
                k.answer = false;
                one(k)
            }
            _ => None,
        }
    }

    pub fn run(&self, fuel: u64) -> Result<(Tree, u64), IamError> {
        let (res, steps) = self.run_observed(fuel, |_| {});
        match res {
            MachineResult::Output(t) => Ok((t, steps)),
            MachineResult::Diverged(n) => Err(IamError::Diverged(n)),
            MachineResult::Stuck(k, _) => {
                Err(IamError::Stuck { config: self.show(&k), reason: "no transition applies".into() })
            }
        }
    }

    pub fn run_observed(&self, fuel: u64, observe: impl FnMut(&SingleConfig)) -> (MachineResult<SingleConfig>, u64) {
        treegen::run_observed(|k| self.step(k), SingleConfig::initial(), fuel, Policy::Leftmost, observe)
    }

    pub fn trace(&self, fuel: u64) -> treegen::Trace<SingleConfig> {
        treegen::trace(|k| self.step(k), SingleConfig::initial(), fuel)
    }
}

/// Resolves `Auto` and checks that the program fits the variant.
pub fn select_variant(v: &AnnotatedTerm, variant: Variant) -> Result<Variant, IamError> {
    if !v.ty(v.root()).is_base() || !v.term().is_closed() {
        return Err(IamError::NotClosedBase(v.ty(v.root()).to_string()));
    }
    let class = v.classify();
    let chosen = match variant {
        Variant::Auto => Variant::for_tier(class),
        other => Some(other).filter(|o| class <= o.max_tier()),
    };
    chosen.ok_or(IamError::ClassificationTooHigh { variant, found: class })
}

/// Runs the chosen machine on a closed program of type `o`.
pub fn iam_run(v: &AnnotatedTerm, variant: Variant, fuel: u64) -> Result<Tree, IamError> {
    match select_variant(v, variant)? {
        Variant::SingleStack => SingleStack::new(v).run(fuel).map(|r| r.0),
        other => Iam::new(v, other).run(fuel).map(|r| r.0),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// The tape does not lead to `o` in the type of the current subterm.
    Typing,
    TapeTooLong { len: usize, bound: usize },
    Parity,
    UpwardBox,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub step: usize,
    pub kind: ViolationKind,
}

/// Checks the typing invariant, the tape bound, the direction parity and the
/// absence of upward moves out of boxes at every configuration of a run.
/// Parity and box checks apply to the machines without logs.
pub fn assert_invariants<'c>(
    v: &AnnotatedTerm,
    variant: Variant,
    run: impl IntoIterator<Item = &'c IamConfig>,
) -> Result<usize, Violation> {
    let bound = v.max_height();
    let logless = matches!(variant, Variant::PurelyAffine | Variant::AlmostPurelyAffine);
    let mut count = 0;
    for (step, c) in run.into_iter().enumerate() {
        let mult = c.mult();
        let fail = |kind| Err(Violation { step, kind });
        if !navigate_to_base(v.ty(c.pos), mult.iter().copied()) {
            return fail(ViolationKind::Typing);
        }
        if mult.len() > bound {
            return fail(ViolationKind::TapeTooLong { len: mult.len(), bound });
        }
        if logless {
            let odd = mult.iter().filter(|t| **t == Tok::O).count() % 2 == 1;
            if odd != (c.dir == Direction::Up) {
                return fail(ViolationKind::Parity);
            }
            if c.dir == Direction::Up {
                if let Some(par) = v.parent(c.pos) {
                    let upward_box = match v.kind(par) {
                        NodeKind::Bang => true,
                        NodeKind::Let(_) => is_fn_child(v, c.pos),
                        _ => false,
                    };
                    if upward_box {
                        return fail(ViolationKind::UpwardBox);
                    }
                }
            }
        }
        count += 1;
    }
    Ok(count)
}
