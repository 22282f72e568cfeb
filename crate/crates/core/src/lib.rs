//! Residual minimisation for linear elliptic and parabolic PDEs with
//! neural-network trial functions that satisfy Dirichlet (and initial)
//! conditions exactly, plus loss-based a posteriori error certificates.

pub mod ansatz;
pub mod certify;
pub mod config;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod geometry;
pub mod jets;
pub mod losses;
pub mod network;
pub mod norms;
pub mod problems;
pub mod quadrature;
pub mod training;

pub use error::{Error, Result};
