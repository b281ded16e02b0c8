//! Error type shared by all modules.

use thiserror::Error;

/// Errors raised by arithmetic, decompositions and tree operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An element is zero below its precision caps, so a valuation-dependent
    /// operation cannot decide anything about it.
    #[error("element is zero at the working precision; valuation indeterminable")]
    ZeroAtPrecision,

    /// The working precision does not suffice to decide a comparison or to
    /// produce canonical data.
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(&'static str),

    /// A matrix required to be invertible has determinant zero (or zero at
    /// precision).
    #[error("matrix is singular at the working precision")]
    SingularMatrix,

    /// The element does not lie in the ring required by the operation.
    #[error("element is not in the required ring")]
    NotInRing,

    /// `translation_part` was requested for a Weyl element with a flip.
    #[error("element has a flip component; no translation part")]
    TranslationOfFlip,

    /// A tree operation was applied to a vertex of the wrong stratum.
    #[error("operation not defined on this stratum")]
    StratumError,

    /// The vertex does not lie over the given base vertex.
    #[error("vertex does not belong to the given fiber")]
    FiberMismatch,

    /// Neighbor enumeration over a field with infinite residue field.
    #[error("residue field is not finite; cannot enumerate")]
    ResidueNotEnumerable,

    /// Mismatched base fields in a binary operation or payload.
    #[error("mismatched base field F_{0} vs F_{1}")]
    MismatchedField(u32, u32),

    /// Unsupported parameter combination.
    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    /// Text expression or payload parse failure.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
