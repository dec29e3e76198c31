//! Cross-lingual tokenization compatibility.
//!
//! Trains WordPiece vocabularies at many sizes, measures absolute and relative
//! compression rates, fits an exponential compression model and inverts it to
//! pick vocabulary sizes, trains static subword embeddings and compares
//! embedding spaces across languages with the singular value gap.

pub mod cli;
pub mod compression;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod grid;
pub mod hashing;
pub mod manifest;
pub mod spectral;
pub mod wordpiece;

pub use error::{Error, ErrorKind, Result};
