//! Error taxonomy shared by all solver stages.
//!
//! Variants are grouped by the process exit code they map to in the CLI:
//! configuration problems (exit 2), geometry violations such as a
//! non-hyperbolic surface or a characteristic region (exit 3), and solver
//! or I/O failures (exit 4). Verification-tolerance failures are not
//! errors; they are reported in suite results and map to exit 1 in the
//! driver.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed configuration, invalid expression, or inconsistent problem
    /// description (CLI exit code 2).
    #[error("config error: {0}")]
    Config(String),

    /// The requested surface is not hyperbolic on the requested domain.
    #[error("surface not hyperbolic: {0}")]
    NotHyperbolic(String),

    /// A region/curve failed a noncharacteristic invariant.
    #[error("noncharacteristic check failed: {0}")]
    Characteristic(String),

    /// The Picard contraction gate was violated on a sub-block that could
    /// not be subdivided further.
    #[error("contraction gate violated: {0}")]
    Contraction(String),

    /// Boundary data failed a hard compatibility requirement.
    #[error("incompatible boundary data: {0}")]
    Incompatible(String),

    /// A numerical routine failed to converge (Newton inversion, fixed-point
    /// iteration, curve crossing detection).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Geometry construction failure (degenerate map, singular Jacobian).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Artifact I/O failure (CLI exit code 4).
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Artifact serialization failure (CLI exit code 4).
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to: 2 for configuration
    /// problems, 3 for geometry violations (non-hyperbolic surface,
    /// characteristic region), 4 for solver and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NotHyperbolic(_) | Error::Characteristic(_) | Error::Geometry(_) => 3,
            Error::Contraction(_)
            | Error::Incompatible(_)
            | Error::Numerical(_)
            | Error::Io(_)
            | Error::Serde(_) => 4,
        }
    }

    /// Stable machine-readable kind label for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::NotHyperbolic(_) => "not_hyperbolic",
            Error::Characteristic(_) => "characteristic",
            Error::Contraction(_) => "contraction",
            Error::Incompatible(_) => "incompatible",
            Error::Numerical(_) => "numerical",
            Error::Geometry(_) => "geometry",
            Error::Io(_) => "io",
            Error::Serde(_) => "serialization",
        }
    }
}
