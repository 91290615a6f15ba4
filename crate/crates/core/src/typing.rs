//! Affine type checking with `!` and tier classification of terms.
//!
//! Checking infers binder types by unification; the result is an
//! [`AnnotatedTerm`], a preorder arena of nodes carrying types, box depths and
//! binder links, which the machines navigate by [`NodeId`].

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::syntax::{render_marked, Marker, Name, Position, RankedAlphabet, Term};
use crate::types::{classify_type, Classification, Type};

pub use crate::types::{navigate, subst_base, type_height};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("at {at}: expected type {expected}, found {found}")]
    TypeMismatch { at: Position, expected: String, found: String },
    #[error("at {at}: affine variable `{var}` used more than once")]
    AffineViolation { at: Position, var: String },
    #[error("at {at}: affine variable `{var}` used inside a box")]
    BoxCapturesAffine { at: Position, var: String },
    #[error("at {at}: unbound variable `{var}`")]
    UnboundVariable { at: Position, var: String },
    #[error("at {at}: constant `{name}` has no declared type")]
    UnknownConstant { at: Position, name: String },
}

/// `Θ | Φ`: unrestricted and affine free variables.
#[derive(Debug, Clone, Default)]
pub struct TypingContext {
    pub unrestricted: Vec<(Name, Type)>,
    pub affine: Vec<(Name, Type)>,
}

impl TypingContext {
    pub fn empty() -> Self {
        Self::default()
    }
}

/// Checker options. `almost_affine` lets variables of type `o` be used more
/// than once, as in almost affine terms without `!`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    pub almost_affine: bool,
}

/// `c : o^rk(c) -o o` for every letter.
pub fn constant_types(sigma: &RankedAlphabet) -> HashMap<Name, Type> {
    sigma.letters().map(|(c, r)| (c.clone(), Type::constant(r))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Const(Name),
    Var(Name),
    Lam(Name),
    App,
    Bang,
    Let(Name),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    /// Index among the parent's children.
    pub child_index: usize,
    pub children: Vec<NodeId>,
    /// One past the last node of this subtree.
    pub end: NodeId,
    pub ty: Type,
    /// Boxes strictly above this node whose content is not of base type.
    pub depth: usize,
    /// All boxes strictly above this node.
    pub boxes: usize,
    /// For variables: the binding `Lam` or `Let`, if bound in the term.
    pub binder: Option<NodeId>,
    /// For binders: occurrences of the bound variable, in preorder.
    pub occurrences: Vec<NodeId>,
}

/// A typed term, stored in preorder.
#[derive(Debug, Clone)]
pub struct AnnotatedTerm {
    term: Term,
    nodes: Vec<Node>,
    ctx: TypingContext,
}

impl AnnotatedTerm {
    pub fn term(&self) -> &Term {
        &self.term
    }

    pub fn context(&self) -> &TypingContext {
        &self.ctx
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn ty(&self, id: NodeId) -> &Type {
        &self.nodes[id].ty
    }

    pub fn kind(&self, id: NodeId) -> &NodeKind {
        &self.nodes[id].kind
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn child(&self, id: NodeId, i: usize) -> NodeId {
        self.nodes[id].children[i]
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.nodes[id].depth
    }

    /// Whether `inner` lies in the subtree of `outer` (inclusive).
    pub fn contains(&self, outer: NodeId, inner: NodeId) -> bool {
        outer <= inner && inner < self.nodes[outer].end
    }

    pub fn path(&self, id: NodeId) -> Position {
        let mut path = Vec::new();
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(self.nodes[cur].child_index);
            cur = p;
        }
        path.reverse();
        Position(path)
    }

    pub fn find(&self, pos: &Position) -> Option<NodeId> {
        pos.0.iter().try_fold(0, |id, &i| self.nodes[id].children.get(i).copied())
    }

    pub fn subterm(&self, id: NodeId) -> &Term {
        self.term.at(&self.path(id)).expect("node paths are valid")
    }

    /// The whole term with `id` marked.
    pub fn render(&self, id: NodeId, marker: Marker) -> String {
        render_marked(&self.term, &self.path(id), marker)
    }

    /// Number of non-base boxes between `outer` (exclusive of its own box if it
    /// is one) and `inner`.
    pub fn depth_between(&self, outer: NodeId, inner: NodeId) -> usize {
        let mut n = 0;
        let mut cur = self.nodes[inner].parent;
        while let Some(p) = cur {
            if p == outer {
                break;
            }
            if self.nodes[p].kind == NodeKind::Bang && !self.box_is_base(p) {
                n += 1;
            }
            cur = self.nodes[p].parent;
        }
        n
    }

    /// A box whose content has type `o`.
    pub fn box_is_base(&self, id: NodeId) -> bool {
        self.nodes[id].kind == NodeKind::Bang && self.nodes[self.nodes[id].children[0]].ty.is_base()
    }

    /// The tape bound: maximum type height over all subterms.
    pub fn max_height(&self) -> usize {
        self.nodes.iter().map(|n| type_height(&n.ty)).max().unwrap_or(0)
    }

    pub fn classify(&self) -> Classification {
        classify_term(self)
    }
}

impl fmt::Display for AnnotatedTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {}", self.term, self.nodes[0].ty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum MT {
    Meta(usize),
    Base,
    Arrow(Box<MT>, Box<MT>),
    Bang(Box<MT>),
}

impl MT {
    fn from_type(t: &Type) -> MT {
        match t {
            Type::Base => MT::Base,
            Type::Arrow(a, b) => MT::Arrow(Box::new(MT::from_type(a)), Box::new(MT::from_type(b))),
            Type::Bang(a) => MT::Bang(Box::new(MT::from_type(a))),
        }
    }
}

struct Binding {
    name: Name,
    unrestricted: bool,
    ty: MT,
    boxes_at_bind: usize,
    binder: Option<NodeId>,
    uses: usize,
}

struct Checker<'a> {
    metas: Vec<Option<MT>>,
    constants: &'a HashMap<Name, Type>,
    opts: CheckOptions,
    env: Vec<Binding>,
    nodes: Vec<Node>,
    mtys: Vec<MT>,
    path: Vec<usize>,
    /// Metas of affine variables used several times in almost affine mode.
    must_be_base: Vec<(MT, Position, Name)>,
}

impl Checker<'_> {
    fn fresh(&mut self) -> MT {
        self.metas.push(None);
        MT::Meta(self.metas.len() - 1)
    }

    fn walk(&self, t: &MT) -> MT {
        let mut t = t.clone();
        while let MT::Meta(m) = t {
            match &self.metas[m] {
                Some(next) => t = next.clone(),
                None => return MT::Meta(m),
            }
        }
        t
    }

    fn occurs(&self, m: usize, t: &MT) -> bool {
        match self.walk(t) {
            MT::Meta(n) => n == m,
            MT::Base => false,
            MT::Arrow(a, b) => self.occurs(m, &a) || self.occurs(m, &b),
            MT::Bang(a) => self.occurs(m, &a),
        }
    }

    fn unify(&mut self, a: &MT, b: &MT) -> bool {
        let (a, b) = (self.walk(a), self.walk(b));
        match (&a, &b) {
            (MT::Meta(m), MT::Meta(n)) if m == n => true,
            (MT::Meta(m), other) | (other, MT::Meta(m)) => {
                if self.occurs(*m, other) {
                    return false;
                }
                self.metas[*m] = Some(other.clone());
                true
            }
            (MT::Base, MT::Base) => true,
            (MT::Arrow(a1, b1), MT::Arrow(a2, b2)) => self.unify(a1, a2) && self.unify(b1, b2),
            (MT::Bang(x), MT::Bang(y)) => self.unify(x, y),
            _ => false,
        }
    }

    fn zonk(&self, t: &MT) -> Type {
        match self.walk(t) {
            MT::Meta(_) | MT::Base => Type::Base,
            MT::Arrow(a, b) => Type::arrow(self.zonk(&a), self.zonk(&b)),
            MT::Bang(a) => Type::bang(self.zonk(&a)),
        }
    }

    /// Pretty form for messages: unresolved metas print as `?`.
    fn show(&self, t: &MT) -> String {
        match self.walk(t) {
            MT::Meta(_) => "?".into(),
            MT::Base => "o".into(),
            MT::Arrow(a, b) => {
                let l = self.show(&a);
                let l = if matches!(self.walk(&a), MT::Arrow(..)) { format!("({l})") } else { l };
                format!("{l} -o {}", self.show(&b))
            }
            MT::Bang(a) => {
                let s = self.show(&a);
                if matches!(self.walk(&a), MT::Arrow(..)) {
                    format!("!({s})")
                } else {
                    format!("!{s}")
                }
            }
        }
    }

    fn here(&self) -> Position {
        Position(self.path.clone())
    }

    fn expect(&mut self, expected: &MT, found: &MT) -> Result<(), TypeError> {
        if self.unify(expected, found) {
            Ok(())
        } else {
            Err(TypeError::TypeMismatch { at: self.here(), expected: self.show(expected), found: self.show(found) })
        }
    }

    fn push_node(&mut self, kind: NodeKind, parent: Option<NodeId>, child_index: usize, boxes: usize) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            kind,
            parent,
            child_index,
            children: Vec::new(),
            end: id + 1,
            ty: Type::Base,
            depth: 0,
            boxes,
            binder: None,
            occurrences: Vec::new(),
        });
        self.mtys.push(MT::Base);
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        id
    }

    fn infer(&mut self, t: &Term, parent: Option<NodeId>, child_index: usize, boxes: usize) -> Result<MT, TypeError> {
        let kind = match t {
            Term::Const(c) => NodeKind::Const(c.clone()),
            Term::Var(x) => NodeKind::Var(x.clone()),
            Term::Lam(x, _) => NodeKind::Lam(x.clone()),
            Term::App(..) => NodeKind::App,
            Term::Bang(_) => NodeKind::Bang,
            Term::Let(x, ..) => NodeKind::Let(x.clone()),
        };
        let id = self.push_node(kind, parent, child_index, boxes);
        let ty = match t {
            Term::Const(c) => match self.constants.get(c) {
                Some(ty) => MT::from_type(ty),
                None => return Err(TypeError::UnknownConstant { at: self.here(), name: c.to_string() }),
            },
            Term::Var(x) => {
                let Some(idx) = self.env.iter().rposition(|b| &b.name == x) else {
                    return Err(TypeError::UnboundVariable { at: self.here(), var: x.to_string() });
                };
                let at = self.here();
                let b = &mut self.env[idx];
                b.uses += 1;
                if !b.unrestricted {
                    if boxes > b.boxes_at_bind {
                        return Err(TypeError::BoxCapturesAffine { at, var: x.to_string() });
                    }
                    if b.uses > 1 {
                        if self.opts.almost_affine {
                            let ty = b.ty.clone();
                            self.must_be_base.push((ty, at, x.clone()));
                        } else {
                            return Err(TypeError::AffineViolation { at, var: x.to_string() });
                        }
                    }
                }
                let binder = b.binder;
                let ty = b.ty.clone();
                self.nodes[id].binder = binder;
                if let Some(bn) = binder {
                    self.nodes[bn].occurrences.push(id);
                }
                ty
            }
            Term::Lam(x, body) => {
                let a = self.fresh();
                self.env.push(Binding {
                    name: x.clone(),
                    unrestricted: false,
                    ty: a.clone(),
                    boxes_at_bind: boxes,
                    binder: Some(id),
                    uses: 0,
                });
                self.path.push(0);
                let b = self.infer(body, Some(id), 0, boxes);
                self.path.pop();
                self.env.pop();
                MT::Arrow(Box::new(a), Box::new(b?))
            }
            Term::App(f, a) => {
                self.path.push(0);
                let tf = self.infer(f, Some(id), 0, boxes)?;
                self.path.pop();
                self.path.push(1);
                let ta = self.infer(a, Some(id), 1, boxes)?;
                let res = self.fresh();
                let walked = self.walk(&tf);
                let r = match walked {
                    MT::Arrow(dom, cod) => {
                        let r = self.expect(&dom, &ta);
                        self.unify(&cod, &res);
                        r
                    }
                    _ => {
                        let want = MT::Arrow(Box::new(ta.clone()), Box::new(res.clone()));
                        if self.unify(&tf, &want) {
                            Ok(())
                        } else {
                            self.path.pop();
                            self.path.push(0);
                            let found = self.show(&tf);
                            let err = TypeError::TypeMismatch {
                                at: self.here(),
                                expected: format!("{} -o ?", self.show(&ta)),
                                found,
                            };
                            self.path.pop();
                            return Err(err);
                        }
                    }
                };
                self.path.pop();
                r?;
                res
            }
            Term::Bang(body) => {
                self.path.push(0);
                let b = self.infer(body, Some(id), 0, boxes + 1);
                self.path.pop();
                MT::Bang(Box::new(b?))
            }
            Term::Let(x, bound, body) => {
                self.path.push(0);
                let tu = self.infer(bound, Some(id), 0, boxes)?;
                let a = self.fresh();
                let r = self.expect(&MT::Bang(Box::new(a.clone())), &tu);
                self.path.pop();
                r?;
                self.env.push(Binding {
                    name: x.clone(),
                    unrestricted: true,
                    ty: a,
                    boxes_at_bind: boxes,
                    binder: Some(id),
                    uses: 0,
                });
                self.path.push(1);
                let b = self.infer(body, Some(id), 1, boxes);
                self.path.pop();
                self.env.pop();
                b?
            }
        };
        self.nodes[id].end = self.nodes.len();
        self.mtys[id] = ty.clone();
        Ok(ty)
    }
}

/// Checks `Θ | Φ ⊢ t : expected`.
pub fn check_type(
    ctx: &TypingContext,
    t: &Term,
    expected: &Type,
    constants: &HashMap<Name, Type>,
) -> Result<AnnotatedTerm, TypeError> {
    check_type_with(ctx, t, expected, constants, CheckOptions::default())
}

pub fn check_type_with(
    ctx: &TypingContext,
    t: &Term,
    expected: &Type,
    constants: &HashMap<Name, Type>,
    opts: CheckOptions,
) -> Result<AnnotatedTerm, TypeError> {
    let mut c = Checker {
        metas: Vec::new(),
        constants,
        opts,
        env: Vec::new(),
        nodes: Vec::new(),
        mtys: Vec::new(),
        path: Vec::new(),
        must_be_base: Vec::new(),
    };
    for (x, ty) in &ctx.unrestricted {
        c.env.push(Binding { name: x.clone(), unrestricted: true, ty: MT::from_type(ty), boxes_at_bind: 0, binder: None, uses: 0 });
    }
    for (x, ty) in &ctx.affine {
        c.env.push(Binding { name: x.clone(), unrestricted: false, ty: MT::from_type(ty), boxes_at_bind: 0, binder: None, uses: 0 });
    }
    let found = c.infer(t, None, 0, 0)?;
    c.expect(&MT::from_type(expected), &found)?;
    for (ty, at, var) in std::mem::take(&mut c.must_be_base) {
        if !c.unify(&ty, &MT::Base) {
            return Err(TypeError::AffineViolation { at, var: var.to_string() });
        }
    }
    let mut nodes = std::mem::take(&mut c.nodes);
    for (n, mt) in nodes.iter_mut().zip(&c.mtys) {
        n.ty = c.zonk(mt);
    }
    // Box depths need the final types of box contents.
    for id in 0..nodes.len() {
        if let Some(p) = nodes[id].parent {
            let parent_counts = nodes[p].kind == NodeKind::Bang && !nodes[id].ty.is_base();
            nodes[id].depth = nodes[p].depth + usize::from(parent_counts);
        }
    }
    let annotated = AnnotatedTerm { term: t.clone(), nodes, ctx: ctx.clone() };
    if !opts.almost_affine {
        debug_assert!(affineness_holds(&annotated));
    }
    Ok(annotated)
}

/// Every λ-bound variable occurs at most once, with no box between the
/// binder and the occurrence.
pub fn affineness_holds(t: &AnnotatedTerm) -> bool {
    t.nodes.iter().all(|n| match n.kind {
        NodeKind::Lam(_) => {
            n.occurrences.len() <= 1 && n.occurrences.iter().all(|&o| t.nodes[o].boxes == n.boxes)
        }
        _ => true,
    })
}

/// The least tier `L` such that every subterm at box nesting `k` has a type
/// of tier at most `L - k`, and every unrestricted variable in scope has a
/// type allowed for tier `L` (none for purely affine, `o` for almost purely
/// affine, almost purely affine types for almost depth 1).
pub fn classify_term(t: &AnnotatedTerm) -> Classification {
    (0..3)
        .find(|&l| satisfies_tier(t, l))
        .map(Classification::from_level)
        .unwrap_or(Classification::General)
}

fn theta_ok(l: usize, ty: &Type) -> bool {
    match l {
        0 => false,
        1 => ty.is_base(),
        _ => classify_type(ty) <= Classification::AlmostPurelyAffine,
    }
}

fn satisfies_tier(t: &AnnotatedTerm, l: usize) -> bool {
    if !t.ctx.unrestricted.iter().all(|(_, ty)| theta_ok(l, ty)) {
        return false;
    }
    t.nodes.iter().all(|n| {
        let Some(budget) = l.checked_sub(n.boxes) else {
            return false;
        };
        if classify_type(&n.ty).level() > budget {
            return false;
        }
        // A let binder puts its variable in Θ for the body.
        match n.kind {
            NodeKind::Let(_) => theta_ok(l, t.nodes[n.children[0]].ty.unbang()),
            _ => true,
        }
    })
}
