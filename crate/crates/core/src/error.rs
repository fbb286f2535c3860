use thiserror::Error;

/// Errors raised by the library.
///
/// Variants map onto the failure modes of the individual operations; the CLI
/// groups them into exit codes via [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NonHermitian { asymmetry: f64 },
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix has a negative eigenvalue {lambda_min:.3e} below the support tolerance")]
    NegativeEigenvalue { lambda_min: f64 },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("system specifications do not match: {0}")]
    SpecMismatch(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("bad partition: {0}")]
    BadPartition(String),

    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("reference state is singular: {0}")]
    SingularSigma(String),
    #[error("alpha = {0} is outside (1, 2]")]
    AlphaOutOfRange(f64),

    #[error("marginal is singular: {0}")]
    SingularMarginal(String),
    #[error("marginal on B is not maximally mixed (deviation {0:.3e})")]
    EtaBNotMaximallyMixed(f64),
    #[error("map is not unital (defect {0:.3e})")]
    NonUnital(f64),

    #[error("state is not a BS quantum Markov chain: {0}")]
    NotBSQMC(String),
    #[error("marginals do not commute (commutator norm {0:.3e})")]
    NotCommutingMarginals(f64),
    #[error("marginal is rank deficient: {0}")]
    RankDeficientMarginal(String),
    #[error("inconsistent certificate: {0}")]
    InconsistentCertificate(String),
    #[error("structure decomposition failed: {0}")]
    DecompositionFailed(String),

    #[error("singular input: {0}")]
    SingularInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid interaction: {0}")]
    InvalidInteraction(String),
    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    ///
    /// 2 = input could not be parsed, 3 = input violates an invariant,
    /// 4 = resource limit, 1 = any other computational failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::NonHermitian { .. }
            | Error::NonFinite
            | Error::NegativeEigenvalue { .. }
            | Error::DimMismatch(_)
            | Error::UnknownLabel(_)
            | Error::DuplicateLabel(_)
            | Error::InvalidPermutation(_)
            | Error::InvalidState(_)
            | Error::InvalidChannel(_)
            | Error::BadPartition(_)
            | Error::InvalidInteraction(_)
            | Error::InvalidArgument(_) => 3,
            Error::TooLarge(_) => 4,
            _ => 1,
        }
    }
}
