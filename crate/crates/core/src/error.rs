use thiserror::Error;

/// Errors surfaced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// The radialized density is not integrable near the origin, so the
    /// weight does not define a locally finite measure.
    #[error("non-integrable weight: {0}")]
    NonIntegrable(String),

    /// Structural problems in a weight specification (gaps, overlaps,
    /// negative values, unknown keys, ...).
    #[error("malformed weight spec: {0}")]
    MalformedSpec(String),

    /// Adaptive quadrature exhausted its refinement budget before reaching
    /// the requested tolerance.
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    /// A scan window does not contain enough valid sample pairs.
    #[error("window too narrow: {0}")]
    WindowTooNarrow(String),

    /// The two independent solution paths of the discrete capacity oracle
    /// disagree beyond tolerance.
    #[error("oracle disagreement: series {series} vs descent {descent} (rel gap {rel_gap:.3e})")]
    OracleDisagreement {
        series: f64,
        descent: f64,
        rel_gap: f64,
    },

    /// Essential-infimum refinement exhausted its budget (p = 1, tabulated
    /// profiles).
    #[error("essinf unresolved: {0}")]
    EssinfUnresolved(String),

    /// A classification was queried outside its parameter range.
    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    /// A reproduction recipe disagreed with its recorded claims.
    #[error("reproduction mismatch: {failed} of {total} claims failed")]
    ReproductionMismatch { failed: usize, total: usize },

    /// Invalid run configuration (bad window ordering, non-positive
    /// tolerance, unknown identifiers, ...).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
