//! Tree-generating machines: a configuration set, an initial configuration and
//! a partial step function into trees whose leaves may be configurations.
//!
//! Running a machine rewrites one pending leaf at a time until none remain.

use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;

use crate::syntax::{Name, Tree};

/// A tree over the output alphabet with pending configurations as leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frontier<K> {
    Node(Name, Vec<Frontier<K>>),
    Pending(K),
}

impl<K> Frontier<K> {
    pub fn node(label: impl Into<Name>, children: Vec<Frontier<K>>) -> Self {
        Frontier::Node(label.into(), children)
    }

    pub fn leaf(label: impl Into<Name>) -> Self {
        Frontier::Node(label.into(), Vec::new())
    }

    /// Pending configurations, left to right.
    pub fn pending(&self) -> Vec<&K> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            match f {
                Frontier::Pending(k) => out.push(k),
                Frontier::Node(_, cs) => stack.extend(cs.iter().rev()),
            }
        }
        out
    }

    pub fn into_tree(self) -> Result<Tree, Self> {
        fn go<K>(f: &Frontier<K>) -> Option<Tree> {
            match f {
                Frontier::Pending(_) => None,
                Frontier::Node(l, cs) => Some(Tree::new(l.clone(), cs.iter().map(go).collect::<Option<_>>()?)),
            }
        }
        match go(&self) {
            Some(t) => Ok(t),
            None => Err(self),
        }
    }

    /// Applies `f` to every pending leaf.
    pub fn map<L>(self, f: &mut impl FnMut(K) -> L) -> Frontier<L> {
        match self {
            Frontier::Pending(k) => Frontier::Pending(f(k)),
            Frontier::Node(l, cs) => Frontier::Node(l, cs.into_iter().map(|c| c.map(f)).collect()),
        }
    }

    /// Renders letters as `a(x,y)` and configurations with `show`.
    pub fn render(&self, show: &dyn Fn(&K) -> String) -> String {
        let mut out = String::new();
        self.render_into(&mut out, show);
        out
    }

    fn render_into(&self, out: &mut String, show: &dyn Fn(&K) -> String) {
        match self {
            Frontier::Pending(k) => out.push_str(&show(k)),
            Frontier::Node(l, cs) => {
                out.push_str(l);
                if !cs.is_empty() {
                    out.push('(');
                    for (i, c) in cs.iter().enumerate() {
                        if i > 0 {
                            out.push(',');
                        }
                        c.render_into(out, show);
                    }
                    out.push(')');
                }
            }
        }
    }
}

impl<K> From<&Tree> for Frontier<K> {
    fn from(t: &Tree) -> Self {
        Frontier::Node(t.label.clone(), t.children.iter().map(Frontier::from).collect())
    }
}

impl<K: fmt::Display> fmt::Display for Frontier<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&|k| k.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MachineResult<K> {
    Output(Tree),
    Diverged(u64),
    /// The configuration on which the step function is undefined, and the
    /// frontier it was found in.
    Stuck(K, Frontier<K>),
}

impl<K> MachineResult<K> {
    pub fn output(&self) -> Option<&Tree> {
        match self {
            MachineResult::Output(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    #[default]
    Leftmost,
    Rightmost,
}

enum Slot<K> {
    Letter(Name, Vec<usize>),
    Pending(K),
}

/// The frontier as an arena, with pending slots kept in left-to-right order.
struct Arena<K> {
    slots: Vec<Slot<K>>,
    parent: Vec<Option<(usize, usize)>>,
    pending: VecDeque<usize>,
}

impl<K: Clone> Arena<K> {
    fn new(initial: K) -> Self {
        Arena { slots: vec![Slot::Pending(initial)], parent: vec![None], pending: VecDeque::from([0]) }
    }

    /// Writes `f` into slot `at`, returning the new pending slots in order.
    fn install(&mut self, at: usize, f: Frontier<K>, new_pending: &mut Vec<usize>) {
        match f {
            Frontier::Pending(k) => {
                self.slots[at] = Slot::Pending(k);
                new_pending.push(at);
            }
            Frontier::Node(l, cs) => {
                let mut ids = Vec::with_capacity(cs.len());
                for (i, c) in cs.into_iter().enumerate() {
                    let id = self.slots.len();
                    self.slots.push(Slot::Letter(Name::from(""), Vec::new()));
                    self.parent.push(Some((at, i)));
                    ids.push(id);
                    self.install(id, c, new_pending);
                }
                self.slots[at] = Slot::Letter(l, ids);
            }
        }
    }

    fn path(&self, mut id: usize) -> Vec<usize> {
        let mut p = Vec::new();
        while let Some((par, i)) = self.parent[id] {
            p.push(i);
            id = par;
        }
        p.reverse();
        p
    }

    fn frontier(&self, id: usize) -> Frontier<K> {
        match &self.slots[id] {
            Slot::Pending(k) => Frontier::Pending(k.clone()),
            Slot::Letter(l, cs) => Frontier::Node(l.clone(), cs.iter().map(|&c| self.frontier(c)).collect()),
        }
    }
}

/// Runs a machine under `policy`, calling `observe` on every configuration
/// before it fires. Returns the result and the number of steps taken.
pub fn run_observed<K, S, O>(step: S, initial: K, fuel: u64, policy: Policy, mut observe: O) -> (MachineResult<K>, u64)
where
    K: Clone,
    S: Fn(&K) -> Option<Frontier<K>>,
    O: FnMut(&K),
{
    let mut arena = Arena::new(initial);
    let mut steps = 0u64;
    loop {
        let next = match policy {
            Policy::Leftmost => arena.pending.pop_front(),
            Policy::Rightmost => arena.pending.pop_back(),
        };
        let Some(id) = next else {
            let tree = arena.frontier(0).into_tree().ok().expect("no pending leaves remain");
            return (MachineResult::Output(tree), steps);
        };
        if steps >= fuel {
            return (MachineResult::Diverged(steps), steps);
        }
        let Slot::Pending(k) = &arena.slots[id] else { unreachable!("pending slot holds a configuration") };
        observe(k);
        let Some(image) = step(k) else {
            let k = k.clone();
            return (MachineResult::Stuck(k, arena.frontier(0)), steps);
        };
        steps += 1;
        let mut fresh = Vec::new();
        arena.install(id, image, &mut fresh);
        match policy {
            Policy::Leftmost => {
                for &p in fresh.iter().rev() {
                    arena.pending.push_front(p);
                }
            }
            Policy::Rightmost => arena.pending.extend(fresh),
        }
    }
}

/// Runs a machine with leftmost selection.
pub fn run<K, S>(step: S, initial: K, fuel: u64) -> MachineResult<K>
where
    K: Clone,
    S: Fn(&K) -> Option<Frontier<K>>,
{
    run_observed(step, initial, fuel, Policy::Leftmost, |_| {}).0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry<K> {
    pub frontier: Frontier<K>,
    /// Path of the leaf that fires next; `None` on the last entry.
    pub fired: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Trace<K> {
    pub entries: Vec<TraceEntry<K>>,
    pub result: MachineResult<K>,
}

impl<K> Trace<K> {
    /// The configurations that fired, in order.
    pub fn fired(&self) -> Vec<&K> {
        self.entries
            .iter()
            .filter_map(|e| {
                let path = e.fired.as_ref()?;
                let mut f = &e.frontier;
                for &i in path {
                    let Frontier::Node(_, cs) = f else { return None };
                    f = &cs[i];
                }
                match f {
                    Frontier::Pending(k) => Some(k),
                    Frontier::Node(..) => None,
                }
            })
            .collect()
    }

    /// JSON lines `{"step": n, "frontier": ..., "fired": [...]}`.
    pub fn to_json_lines(&self, show: &dyn Fn(&K) -> String) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            step: usize,
            frontier: String,
            fired: Option<&'a [usize]>,
        }
        let mut out = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            let line = Line { step: i, frontier: e.frontier.render(show), fired: e.fired.as_deref() };
            out.push_str(&serde_json::to_string(&line).expect("trace lines serialize"));
            out.push('\n');
        }
        out
    }
}

/// Like [`run`], recording the frontier before each step.
pub fn trace<K, S>(step: S, initial: K, fuel: u64) -> Trace<K>
where
    K: Clone,
    S: Fn(&K) -> Option<Frontier<K>>,
{
    let mut arena = Arena::new(initial);
    let mut entries = Vec::new();
    let mut steps = 0u64;
    loop {
        let Some(id) = arena.pending.pop_front() else {
            let frontier = arena.frontier(0);
            entries.push(TraceEntry { frontier: frontier.clone(), fired: None });
            let tree = frontier.into_tree().ok().expect("no pending leaves remain");
            return Trace { entries, result: MachineResult::Output(tree) };
        };
        let frontier = arena.frontier(0);
        if steps >= fuel {
            entries.push(TraceEntry { frontier, fired: None });
            return Trace { entries, result: MachineResult::Diverged(steps) };
        }
        entries.push(TraceEntry { frontier: frontier.clone(), fired: Some(arena.path(id)) });
        let Slot::Pending(k) = &arena.slots[id] else { unreachable!() };
        let Some(image) = step(k) else {
            let k = k.clone();
            entries.last_mut().expect("just pushed").fired = None;
            return Trace { entries, result: MachineResult::Stuck(k, frontier) };
        };
        steps += 1;
        let mut fresh = Vec::new();
        arena.install(id, image, &mut fresh);
        for &p in fresh.iter().rev() {
            arena.pending.push_front(p);
        }
    }
}
