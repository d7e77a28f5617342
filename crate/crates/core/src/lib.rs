//! Analysis of polynomially growing outer automorphisms of free groups
//! through relative train track maps with zero and level strata: Nielsen
//! paths and the rank of an outer automorphism, normalization of maximal
//! rank representatives, and the equivalent Dehn twist on a graph of groups.

pub mod cli;
pub mod dehn;
pub mod error;
pub mod format;
pub mod graph;
pub mod nielsen;
pub mod normalize;
pub mod oracle;
pub mod stallings;
pub mod word;

pub use error::{Error, Result};
pub use word::{Basis, Endo, Letter, Word};
