//! Top-down tree-structured sequence decoding.
//!
//! Dependency parses are turned into sequence-preserved trees, canonicalized
//! into full ternary trees, and modelled by a decoder that generates the
//! children of every node jointly from per-position hidden states. A
//! generalized beam search recovers the most probable trees, which flatten
//! back into sentences.

pub mod corpus;
pub mod model;
pub mod search;
pub mod trainer;
pub mod tree;
pub mod vocab;

pub use tree::{
    canonicalize, decanonicalize, dep_to_sp, flatten_sp, flatten_ternary, pad_eob, sp_to_dep,
    strip_eob, DependencyTree, FullTree, SpNode, TernaryNode, TreeError,
};
pub use vocab::{TokenId, Vocabulary, EOB, UNK};
