//! Numerical machinery for multiple chordal SLE in the upper half-plane.
//!
//! The crate computes the objects of the Coulomb-gas approach to multiple
//! SLE: planar link patterns and their meander matrices, branch-tracked
//! contour integrals over Pochhammer contours, partition functions with
//! their closed forms at special `kappa` and renormalized limits at
//! exceptional `kappa`, a verification harness (BPZ residuals, Möbius
//! covariance, asymptotics, Frobenius fits, braid phases, bounds), and
//! Loewner-chain Monte Carlo cross-checked against an independent lattice
//! percolation oracle.
//!
//! Each major capability has a runnable tour under `examples/`; start with
//! `cargo run --example meander_matrices` or
//! `cargo run --example pure_partition_functions`.

pub mod boundary;
pub mod params;
pub mod contour;
pub mod coulomb;
pub mod quad;
pub mod patterns;
pub mod partition;
pub mod percolation;
pub mod sle;
pub mod special;
pub mod stats;
pub mod verify;

pub use boundary::BoundaryConfig;
pub use params::KappaParams;
pub use patterns::LinkPattern;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("monte carlo failure: {0}")]
    MonteCarlo(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
