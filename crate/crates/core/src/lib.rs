//! Hierarchical optimised restricted additive Schwarz (ORAS) preconditioning
//! for the Helmholtz equation, with coarse spaces built from randomized SVDs
//! of subdomain interface maps.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: complex sparse/dense kernels, sparse LU, GMRES.
//! * [`fem`]: Q1 discretisation of `-Δu - k²u = f` with impedance conditions.
//! * [`decomposition`]: the hierarchical subdomain tree and its index maps.
//! * [`interface`]: interface maps `T_i`, randomized SVD and coarse spaces.
//! * [`schwarz`]: the Schwarz iteration, the preconditioner and the outer solve.
//! * [`oned`]: the one-dimensional model problem with the exact interface basis.
//! * [`experiment`]: configuration and result rows for the command-line harness.

pub mod decomposition;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod interface;
pub mod linalg;
pub mod oned;
pub mod rng;
pub mod schwarz;

pub use error::{Error, Result};
pub use linalg::{ComplexSparseMatrix, ComplexVector, DenseMatrix, Mode, C64};
