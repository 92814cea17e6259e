//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty sequence")]
    EmptySequence,

    #[error("empty particle set")]
    EmptyParticleSet,

    #[error("particle weights are not normalized (sum = {sum})")]
    UnnormalizedWeights { sum: f64 },

    #[error("degenerate likelihood: all particle weights underflowed")]
    DegenerateLikelihood,

    #[error("innovation variance {value} is not positive")]
    InnovationVariance { value: f64 },

    #[error("innovation variance {value} is not positive at node {node} from neighbor {neighbor}")]
    DekfInnovationVariance {
        node: usize,
        neighbor: usize,
        value: f64,
    },

    #[error("matrix is not positive semidefinite")]
    NotPsd,

    #[error("measurement noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),

    #[error("node {0} is isolated; the particle walk is undefined")]
    IsolatedNode(usize),

    #[error("node {0} holds no particles")]
    EmptyNode(usize),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("dataset line {line}: {message}")]
    DatasetParse { line: usize, message: String },

    #[error("unstable series: autoregressive roots reach the unit circle")]
    UnstableSeries,

    #[error("insufficient data: need {need} items, have {have}")]
    InsufficientData { need: usize, have: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("round {t}, node {node}: {source}")]
    Round {
        t: usize,
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach the round and node where a module error surfaced.
    pub fn at_round(self, t: usize, node: usize) -> Error {
        Error::Round {
            t,
            node,
            source: Box::new(self),
        }
    }
}
