use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// Variants are grouped by the layer that raises them. `is_domain_error`
/// separates modelling failures from malformed input, which the CLI maps to
/// distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // graph construction
    #[error("duplicate node name `{0}`")]
    DuplicateNode(String),
    #[error("edge {from}->{target} references unknown node `{missing}`")]
    DanglingEdge {
        from: String,
        target: String,
        missing: String,
    },
    #[error("forbidden edge {from}->{target}: {reason}")]
    ForbiddenEdge {
        from: String,
        target: String,
        reason: String,
    },
    #[error("graph declares {0} outcome nodes; exactly one is required")]
    MultipleOutcomes(usize),
    #[error("graph declares no outcome node")]
    NoOutcome,
    #[error("cycle detected through nodes {0:?}")]
    CycleDetected(Vec<String>),
    #[error("invalid mediator order: {0}")]
    InvalidMediatorOrder(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has role {actual}, expected {expected}")]
    WrongRole {
        node: String,
        expected: String,
        actual: String,
    },
    #[error("edge {from}->{target} touches a covariate and has no mediation category")]
    UnclassifiableEdge { from: String, target: String },

    // counting / enumeration
    #[error("invalid configuration count request: {0}")]
    InvalidCount(String),
    #[error("request too large: {0}")]
    TooLarge(String),

    // structural model
    #[error("invalid model for node `{node}`: {reason}")]
    InvalidModel { node: String, reason: String },
    #[error("no value for treatment `{0}`")]
    MissingTreatmentValue(String),
    #[error("table lookup miss at node `{node}` for parent values {key:?}")]
    DomainError { node: String, key: Vec<f64> },
    #[error("treatment `{0}` needs an observed untreated value")]
    MissingObservation(String),
    #[error("no treatment spec for `{0}`")]
    MissingTreatmentSpec(String),
    #[error("duplicate treatment spec for `{0}`")]
    DuplicateTreatmentSpec(String),

    // estimation
    #[error("natural direct effect is only defined for single-treatment graphs (found {0})")]
    MultiTreatmentNdeUnsupported(usize),
    #[error("node `{0}` does not carry a linear-additive mechanism")]
    NotLinear(String),
    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidConfig(String),

    // data and fitting
    #[error("table has no data rows")]
    EmptyTable,
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is empty")]
    EmptyColumn(String),
    #[error("design matrix for node `{0}` is rank deficient")]
    RankDeficient(String),
    #[error("node `{node}` needs more than {needed} rows, dataset has {available}")]
    InsufficientRows {
        node: String,
        needed: usize,
        available: usize,
    },

    // exact oracle
    #[error("joint noise support of {0} configurations exceeds the exact-evaluation cap")]
    SupportTooLarge(u128),
    #[error("noise model of node `{0}` has no finite support")]
    InfiniteSupport(String),

    // input parsing
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// `false` for malformed input (parse and I/O failures), `true` for
    /// everything that was well-formed but rejected by the model.
    pub fn is_domain_error(&self) -> bool {
        !matches!(self, Error::Parse(_) | Error::Io(_))
    }

    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DuplicateNode(_) => "DuplicateNode",
            Error::DanglingEdge { .. } => "DanglingEdge",
            Error::ForbiddenEdge { .. } => "ForbiddenEdge",
            Error::MultipleOutcomes(_) => "MultipleOutcomes",
            Error::NoOutcome => "NoOutcome",
            Error::CycleDetected(_) => "CycleDetected",
            Error::InvalidMediatorOrder(_) => "InvalidMediatorOrder",
            Error::UnknownNode(_) => "UnknownNode",
            Error::WrongRole { .. } => "WrongRole",
            Error::UnclassifiableEdge { .. } => "UnclassifiableEdge",
            Error::InvalidCount(_) => "InvalidCount",
            Error::TooLarge(_) => "TooLarge",
            Error::InvalidModel { .. } => "InvalidModel",
            Error::MissingTreatmentValue(_) => "MissingTreatmentValue",
            Error::DomainError { .. } => "DomainError",
            Error::MissingObservation(_) => "MissingObservation",
            Error::MissingTreatmentSpec(_) => "MissingTreatmentSpec",
            Error::DuplicateTreatmentSpec(_) => "DuplicateTreatmentSpec",
            Error::MultiTreatmentNdeUnsupported(_) => "MultiTreatmentNdeUnsupported",
            Error::NotLinear(_) => "NotLinear",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::EmptyTable => "EmptyTable",
            Error::HeaderMismatch(_) => "HeaderMismatch",
            Error::UnknownColumn(_) => "UnknownColumn",
            Error::EmptyColumn(_) => "EmptyColumn",
            Error::RankDeficient(_) => "RankDeficient",
            Error::InsufficientRows { .. } => "InsufficientRows",
            Error::SupportTooLarge(_) => "SupportTooLarge",
            Error::InfiniteSupport(_) => "InfiniteSupport",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
