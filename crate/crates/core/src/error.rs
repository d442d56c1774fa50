use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("time points belong to different timelines")]
    KindMismatch,
    #[error("{left} is not below {right} in the timeline order")]
    NotComparable { left: String, right: String },
    #[error("invalid time point: {0}")]
    InvalidTimePoint(String),
    #[error("tick count overflowed")]
    TimeOverflow,
    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("state {0} is outside the state space")]
    StateOutOfRange(String),
    #[error("exact reachability is only available on finite state spaces")]
    UnsupportedExactReach,
    #[error("the state set is empty")]
    EmptySet,

    #[error("the radius grid is empty")]
    EmptyGrid,
    #[error("radius grid must be positive and strictly increasing: {0}")]
    InvalidGrid(String),
    #[error("level-set family is not monotone at radius {0}")]
    NotMonotone(String),
    #[error("observable `{0}` is not defined on this state space")]
    UnsupportedObservable(&'static str),
    #[error("value {0} lies outside the domain of a comparison function")]
    OutsideDomain(String),

    #[error("invalid comparison function: {0}")]
    InvalidComparison(String),
    #[error("comparison function is not invertible: {0}")]
    NotInvertible(String),
    #[error("composition leaves the representable function class: {0}")]
    NotRepresentable(String),

    #[error("Lyapunov series did not converge after {terms} terms")]
    NonConvergent { terms: usize },
    #[error("matrix is not symmetric")]
    Asymmetric,
    #[error("matrix is not positive definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("certificate rejected: {0}")]
    CertificateRejected(String),
}
