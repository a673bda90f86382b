use std::fmt;

/// Hypothesis tags used when an input violates one of the standing assumptions
/// on the coefficients, impulses or growth bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Concave modulus of continuity for `g`, `f`, `sigma`.
    H1,
    /// Lipschitz bounds on the impulse maps.
    H2,
    /// Growth at the zero history and `I_k(0) = J_k(0) = 0`.
    H3,
    /// Global Lipschitz bound on `g` used for stability.
    H4,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
            Hypothesis::H4 => "H4",
        };
        write!(f, "({tag})")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("Mittag-Leffler value overflows f64 (q = {q}, beta = {beta}, z = {z})")]
    Overflow { q: f64, beta: f64, z: f64 },

    #[error("time {t} is not a node of the grid")]
    OffGrid { t: f64 },

    #[error("grid is empty or not strictly increasing from 0")]
    BadGrid,

    #[error("hypothesis {tag} violated: {detail}")]
    Hypothesis { tag: Hypothesis, detail: String },

    #[error("weighted integral of the {condition} diverges: {detail}")]
    Divergent {
        condition: &'static str,
        detail: String,
    },

    #[error("bound undefined: {0}")]
    BoundUndefined(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}
