//! Surface syntax: alphabets, trees, terms, one-hole contexts, and their
//! textual forms.

mod alphabet;
mod context;
mod parse;
mod print;
mod term;
mod tree;

use std::sync::Arc;

pub use alphabet::{AlphabetError, RankedAlphabet, PLACEHOLDER_PREFIX};
pub use context::{split_at, Context, Position, PositionError};
pub use parse::{
    parse_alphabet, parse_open_term, parse_term, parse_tree, parse_type, ParseError,
};
pub use print::{render_marked, Marker};
pub use term::{alpha_eq, fresh, Term};
pub use tree::{decode_tree, encode_tree, instantiate, DecodeError, InstantiateError, Tree, TreeError};

/// Interned identifier.
pub type Name = Arc<str>;

/// Name of the `i`-th placeholder constant (1-based).
pub fn placeholder(i: usize) -> Name {
    Name::from(format!("{PLACEHOLDER_PREFIX}{i}"))
}
