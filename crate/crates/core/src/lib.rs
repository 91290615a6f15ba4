//! Tree transducers defined by affine λ-terms, evaluated by normalization or
//! by interaction abstract machines, and compiled to tree-walking
//! transducers.

pub mod format;
pub mod syntax;
pub mod types;
pub mod typing;
pub mod reduction;
pub mod treegen;
pub mod iam;
pub mod transducer;
pub mod walking;
pub mod compile;
pub mod corpus;
pub mod harness;
