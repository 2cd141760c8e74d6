//! Spectral operators of matrices and their first-order generalized derivatives.
//!
//! A spectral operator applies a mixed-symmetric vector mapping `g` to the
//! singular values (rectangular blocks) or eigenvalues (symmetric blocks) of a
//! matrix argument and reassembles the result in the original frame:
//! `G(X) = U [Diag(g(sigma(X))) 0] V^T` and `G(Y) = P Diag(g(lambda(Y))) P^T`.
//!
//! The crate provides ordered factorizations with tie/zero block detection,
//! divided-difference derivative kernels, Frechet and Hadamard directional
//! derivative actions, sampled elements of the Clarke generalized Jacobian, a
//! catalog of concrete mappings (singular value thresholding, PSD projection,
//! rank correction, Loewner operators, shape projection), finite-difference
//! and invariance verification oracles, and a desk-scale semismooth Newton
//! solver built on Clarke elements.

pub mod catalog;
pub mod decomposition;
pub mod error;
pub mod jacobian;
pub mod kernels;
pub mod mapping;
pub mod operator;
pub mod solver;
pub mod space;
pub mod verify;

pub use error::{Error, Result};
pub use space::{BlockKind, SpaceSignature};
