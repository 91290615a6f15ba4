use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use super::Name;

/// Prefix reserved for the placeholder constants `<>i` used when compiling
/// transducers; never a valid letter name.
pub const PLACEHOLDER_PREFIX: &str = "<>";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlphabetError {
    #[error("alphabet has no letters")]
    Empty,
    #[error("letter name is empty")]
    EmptyName,
    #[error("letter `{0}` declared twice")]
    Duplicate(String),
    #[error("letter name `{0}` is reserved")]
    Reserved(String),
}

/// A finite set of letters, each with a fixed rank. Declaration order is kept
/// so that printing and random generation are deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedAlphabet {
    letters: IndexMap<Name, usize>,
}

impl RankedAlphabet {
    pub fn new<I, S>(letters: I) -> Result<Self, AlphabetError>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: AsRef<str>,
    {
        let mut map = IndexMap::new();
        for (name, rank) in letters {
            let name = name.as_ref();
            if name.is_empty() {
                return Err(AlphabetError::EmptyName);
            }
            if name.starts_with(PLACEHOLDER_PREFIX) {
                return Err(AlphabetError::Reserved(name.to_string()));
            }
            if map.insert(Name::from(name), rank).is_some() {
                return Err(AlphabetError::Duplicate(name.to_string()));
            }
        }
        if map.is_empty() {
            return Err(AlphabetError::Empty);
        }
        Ok(RankedAlphabet { letters: map })
    }

    pub fn rank(&self, letter: &str) -> Option<usize> {
        self.letters.get(letter).copied()
    }

    pub fn contains(&self, letter: &str) -> bool {
        self.letters.contains_key(letter)
    }

    /// The interned name of a letter, if present.
    pub fn name(&self, letter: &str) -> Option<&Name> {
        self.letters.get_key_value(letter).map(|(k, _)| k)
    }

    pub fn letters(&self) -> impl Iterator<Item = (&Name, usize)> + '_ {
        self.letters.iter().map(|(k, v)| (k, *v))
    }

    pub fn nullary(&self) -> impl Iterator<Item = &Name> + '_ {
        self.letters.iter().filter(|(_, r)| **r == 0).map(|(k, _)| k)
    }

    pub fn max_rank(&self) -> usize {
        self.letters.values().copied().max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

impl fmt::Display for RankedAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{ ")?;
        for (i, (name, rank)) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}:{rank}")?;
        }
        write!(f, " }}")
    }
}
