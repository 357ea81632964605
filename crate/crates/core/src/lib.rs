//! Spacetime interpolating-wavelet solver for linear parabolic PDEs.
//!
//! A field `F(x, t)` on a dyadic grid is discretized with Deslauriers-Dubuc
//! derivative operators into a Sylvester equation `A·F + F·B = C`. Dirichlet
//! and initial data are removed by selector reduction and the reduced system
//! is solved with restarted Global GMRES, optionally seeded level by level
//! from wavelet prolongation of coarser solutions.

pub mod boundary;
pub mod derivative;
pub mod discretization;
pub mod driver;
pub mod error;
pub mod export;
pub mod grid;
pub mod krylov;
pub mod mra;
pub mod sparse;
pub mod stencil;

pub use error::{Error, Result};
pub use grid::{DyadicGrid, Interval};
pub use sparse::CsrMatrix;

/// Nodal values indexed `[space, time]`.
pub type FieldMatrix = ndarray::Array2<f64>;
