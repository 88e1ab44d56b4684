use thiserror::Error;

/// Typed failures shared by every module of the lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("prefix length {len} must be shorter than M = {m}")]
    PrefixTooLong { len: usize, m: usize },
    #[error("invalid chirp parameters: {0}")]
    BadChirpParams(String),
    #[error("unsupported configuration: {0}")]
    UnsupportedCombo(String),
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("chirp length {num_chirps} cannot separate Doppler up to {alpha_max} bins (needs >= {needed})")]
    TooMuchDoppler {
        alpha_max: usize,
        num_chirps: usize,
        needed: usize,
    },
    #[error("domain mismatch: expected {expected}, got {got}")]
    DomainMismatch { expected: String, got: String },
    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("prefix scheme mismatch: {0}")]
    SchemeMismatch(String),
    #[error("unknown channel profile `{0}`")]
    UnknownProfile(String),
    #[error("invalid channel: {0}")]
    BadChannel(String),
    #[error("matrix of dimension {dim} exceeds oracle limit {limit}")]
    TooLarge { dim: usize, limit: usize },
    #[error("data does not fit: {needed} symbols for {available} free bins")]
    DataOverflow { needed: usize, available: usize },
    #[error("pilot magnitude below 1e-12 at bin {0}")]
    ZeroPilot(usize),
    #[error("estimator needs pilot metadata of kind {0}")]
    NoPilotMeta(String),
    #[error("affine tap at offset {offset} maps to {candidates} (delay, Doppler) pairs")]
    AmbiguousTap { offset: i64, candidates: usize },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("phase fit needs a single-path channel, found {0} dominant taps")]
    MultiPath(usize),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
