//! Geometry of Brinkmann (pp-wave) spacetimes
//!
//! `H(u, x) du² + 2 du dv + Σ dx_i²`
//!
//! and of their spacelike hypersurfaces: exact ambient curvature from
//! symbolic derivatives of `H`, extrinsic geometry of graphs and level sets,
//! finite-difference verification of the Laplacian and Gauss identities for
//! the support function `η = ⟨N, ∂_v⟩`, and a damped Newton solver for
//! maximal and constant-mean-curvature graphs.

pub mod expr;
pub mod error;
pub mod geometry;

pub use error::{Error, Result};
pub mod hypersurface;
pub mod identities;
pub mod solver;
