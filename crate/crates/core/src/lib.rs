//! Pseudo-differential operators on the lattice ħZⁿ.
//!
//! Symbols σ(k, θ) are realized as truncated kernel matrices, tested against
//! Schur-type boundedness and r-nuclearity sums, and diagonalized to study
//! diagonal eigenvalue approximations and the eigenvalue growth of discrete
//! Schrödinger operators.

pub mod criteria;
pub mod error;
pub mod fourier;
pub mod kernel;
pub mod lattice;
pub mod schrodinger;
pub mod spectral;
pub mod symbols;

pub use error::{Error, Result};
pub use kernel::KernelMatrix;
pub use lattice::{BoxTruncation, LatticeSpec};
pub use symbols::{Symbol, SymbolOrder};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
