use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module of the crate.
///
/// Variants split into two families: input/validation problems (bad parameters,
/// dimension mismatches, domain violations) and property-check failures, where a
/// computation ran to completion but a certificate or invariant did not hold.
/// [`Error::is_property_failure`] tells them apart.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("generator {0} has no assigned value")]
    UnassignedGenerator(usize),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("p must be < q (the {q}-stable moment of order {p} diverges)")]
    Divergent { p: f64, q: f64 },

    #[error("singular point at x = {x}")]
    Singularity { x: f64 },

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("grid resolution too coarse: {cells} cells, at least {required} required")]
    Resolution { cells: usize, required: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("certificate rejected: |f(x*)| = {lhs} exceeds domination bound {rhs}")]
    CertificateRejected {
        witness: Vec<f64>,
        lhs: f64,
        rhs: f64,
    },

    #[error("inverted norm bracket: lower {lower} > upper {upper}")]
    BracketInverted { lower: f64, upper: f64 },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True when the error reports a failed check rather than invalid input.
    pub fn is_property_failure(&self) -> bool {
        matches!(
            self,
            Error::CertificateRejected { .. } | Error::BracketInverted { .. }
        )
    }

    /// Stable machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnassignedGenerator(_) => "unassigned-generator",
            Error::Parameter(_) => "parameter",
            Error::Dimension { .. } => "dimension",
            Error::Domain(_) => "domain",
            Error::Divergent { .. } => "divergent",
            Error::Singularity { .. } => "singularity",
            Error::Parse { .. } => "parse",
            Error::Resolution { .. } => "resolution",
            Error::Empty(_) => "empty",
            Error::Contract(_) => "contract",
            Error::CertificateRejected { .. } => "certificate-rejected",
            Error::BracketInverted { .. } => "bracket-inverted",
        }
    }
}
