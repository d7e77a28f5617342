use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("generator index {index} out of range for rank {rank}")]
    IndexOutOfRange { index: usize, rank: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("not an automorphism: {0}")]
    NotAnAutomorphism(String),

    #[error("empty word has no root")]
    EmptyWord,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("image of edge {edge} collapses to a point at mismatched endpoints")]
    EdgeImageCollapses { edge: String },

    #[error("exponential stratum {index} {{{edges}}} with transition matrix {matrix}")]
    ExponentialStratum { index: usize, edges: String, matrix: String },

    #[error("search inconclusive at height {height} with bound {bound}")]
    BoundExhausted { height: usize, bound: usize },

    #[error("not maximal rank: r = {rank}, n = {n}")]
    NotMaximalRank { rank: usize, n: usize },

    #[error("not a good representative: {0}")]
    NotGoodRepresentative(String),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("vertex {0} is absent")]
    VertexAbsent(String),

    #[error("second independent indivisible Nielsen path at height {height}")]
    DuplicateInp { height: usize },

    #[error("conjugacy class is not invariant")]
    ClassNotInvariant,

    #[error("normalization stuck: {0}")]
    NormalizationStuck(String),

    #[error("path-group word is not a loop: {0}")]
    NotALoop(String),

    #[error("malformed incidence: {0}")]
    MalformedIncidence(String),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BoundExhausted { .. } | Error::NormalizationStuck(_) => 2,
            Error::ExponentialStratum { .. } | Error::NotMaximalRank { .. } => 3,
            _ => 1,
        }
    }
}
