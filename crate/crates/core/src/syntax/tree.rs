use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::{Name, RankedAlphabet, Term};

/// A ranked tree. Validity against an alphabet is checked separately so that
/// trees can be built before the alphabet is known.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tree {
    pub label: Name,
    pub children: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("unknown letter `{0}`")]
    UnknownLetter(String),
    #[error("letter `{letter}` has rank {rank} but {found} children")]
    Arity { letter: String, rank: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("term is not a tree encoding: {0}")]
    NotAnEncoding(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstantiateError {
    #[error("no term given for letter `{0}`")]
    MissingLetter(String),
}

impl Tree {
    pub fn new(label: impl Into<Name>, children: Vec<Tree>) -> Self {
        Tree { label: label.into(), children }
    }

    pub fn leaf(label: impl Into<Name>) -> Self {
        Tree::new(label, Vec::new())
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Tree::size).sum::<usize>()
    }

    pub fn height(&self) -> usize {
        1 + self.children.iter().map(Tree::height).max().unwrap_or(0)
    }

    pub fn validate(&self, sigma: &RankedAlphabet) -> Result<(), TreeError> {
        let rank = sigma
            .rank(&self.label)
            .ok_or_else(|| TreeError::UnknownLetter(self.label.to_string()))?;
        if rank != self.children.len() {
            return Err(TreeError::Arity {
                letter: self.label.to_string(),
                rank,
                found: self.children.len(),
            });
        }
        self.children.iter().try_for_each(|c| c.validate(sigma))
    }

    /// Nodes in preorder, paired with their parent index and child number
    /// (1-based); the root has no parent.
    pub fn preorder(&self) -> Vec<(&Tree, Option<(usize, usize)>)> {
        let mut out = Vec::new();
        let mut stack = vec![(self, None)];
        while let Some((node, parent)) = stack.pop() {
            let me = out.len();
            out.push((node, parent));
            for (j, c) in node.children.iter().enumerate().rev() {
                stack.push((c, Some((me, j + 1))));
            }
        }
        out
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Iterative to survive very deep outputs.
        enum Item<'a> {
            Node(&'a Tree),
            Text(&'static str),
        }
        let mut stack = vec![Item::Node(self)];
        while let Some(item) = stack.pop() {
            match item {
                Item::Text(s) => f.write_str(s)?,
                Item::Node(t) => {
                    f.write_str(&t.label)?;
                    if !t.children.is_empty() {
                        f.write_str("(")?;
                        stack.push(Item::Text(")"));
                        for (i, c) in t.children.iter().enumerate().rev() {
                            stack.push(Item::Node(c));
                            if i > 0 {
                                stack.push(Item::Text(","));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// The applicative encoding of a tree as a closed term of type `o`.
pub fn encode_tree(tau: &Tree) -> Term {
    tau.children
        .iter()
        .fold(Term::Const(tau.label.clone()), |acc, c| Term::app(acc, encode_tree(c)))
}

pub fn decode_tree(t: &Term, sigma: &RankedAlphabet) -> Result<Tree, DecodeError> {
    let (head, args) = t.spine();
    match head {
        Term::Const(c) => {
            let rank = sigma
                .rank(c)
                .ok_or_else(|| DecodeError::NotAnEncoding(format!("unknown constant `{c}`")))?;
            if rank != args.len() {
                return Err(DecodeError::NotAnEncoding(format!(
                    "`{c}` applied to {} arguments, rank is {rank}",
                    args.len()
                )));
            }
            let children = args
                .iter()
                .map(|a| decode_tree(a, sigma))
                .collect::<Result<_, _>>()?;
            Ok(Tree { label: c.clone(), children })
        }
        other => Err(DecodeError::NotAnEncoding(format!("head `{other}` is not a constant"))),
    }
}

/// Replaces every letter of `tau` by its term in `family`, keeping the
/// applicative shape of the encoding.
pub fn instantiate(tau: &Tree, family: &HashMap<Name, Term>) -> Result<Term, InstantiateError> {
    let head = family
        .get(&tau.label)
        .cloned()
        .ok_or_else(|| InstantiateError::MissingLetter(tau.label.to_string()))?;
    tau.children.iter().try_fold(head, |acc, c| Ok(Term::app(acc, instantiate(c, family)?)))
}
