//! Symmetric interior penalty discontinuous Galerkin (SIPDG) discretization of
//! second-order elliptic problems on polygonal meshes, together with a two-level
//! non-overlapping additive Schwarz preconditioner whose coarse space may be
//! nested or non-nested with respect to the fine grid.
//!
//! The crate is organized bottom-up:
//! - [`geometry`]: planar primitives and convex polygon clipping
//! - [`mesh`]: polygonal mesh generation, topology, agglomeration, coarsening
//! - [`quadrature`]: segment/triangle/polygon rules exact to a requested degree
//! - [`basis`]: per-cell orthonormal polynomial bases in the physical frame
//! - [`assembly`]: SIPDG operator, mass/mixed-mass matrices, lifting, energy norm
//! - [`schwarz`]: local block solvers, L² coarse prolongation, preconditioner
//! - [`krylov`]: PCG with Lanczos-based condition number estimation
//! - [`experiments`]: condition-number scaling studies and CSV/SVG reporting

pub mod assembly;
pub mod basis;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod krylov;
pub mod mesh;
pub mod quadrature;
pub mod schwarz;
pub mod sparse;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
