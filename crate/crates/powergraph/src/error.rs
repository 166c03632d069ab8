use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("graph has no vertices")]
    EmptyGraph,

    #[error("graph has no edges")]
    NoEdges,

    #[error("graph is disconnected")]
    Disconnected,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("n*d must be even to sample a d-regular graph (n = {n}, d = {d})")]
    ParityError { n: usize, d: usize },

    #[error("rejection sampling exhausted {0} retries")]
    RetriesExhausted(usize),

    #[error("powering order r must be at least 1")]
    InvalidR,

    #[error("input exceeds the desk-scale cost guard: {0}")]
    TooLarge(String),

    #[error("vertex {0} has degree zero")]
    ZeroDegree(usize),

    #[error("cleaning deleted every vertex")]
    EverythingDeleted,

    #[error("operator failed the symmetry probe (deviation {0:.3e})")]
    NotSymmetric(f64),

    #[error("eigensolver did not converge within {0} iterations")]
    MaxIterations(usize),

    #[error("leading eigenvalues form a complex pair; no real eigenvector available")]
    NonConvergentComplexPair,

    #[error("belief normalizer vanished (all community products are zero)")]
    ZeroNormalizer,

    #[error("numerical underflow in belief products")]
    NumericalUnderflow,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("community {0} is empty in the reference partition")]
    EmptyCommunity(u32),

    #[error("k = {0} exceeds the permutation-scan cap of 8")]
    KTooLarge(usize),

    #[error("graph is not regular (saw degrees {0} and {1})")]
    NotRegular(usize, usize),

    #[error("girth {girth} is too small (need girth > {needed})")]
    GirthTooSmall { girth: usize, needed: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("eigensolver failure: {0}")]
    EigenFailure(String),

    #[error("csv schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
