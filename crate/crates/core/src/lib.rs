//! Heat flow and spectral analysis on curved two-dimensional strips.
//!
//! A strip of half-width `a` carries the metric `diag(f^2, 1)` in Fermi
//! coordinates. The crate computes `f` from the Gauss curvature, assembles
//! weighted finite-element operators for the Dirichlet Laplacian and the
//! self-similar operator, evolves the heat equation, and simulates the
//! killed Brownian motion whose survival probability it represents.

pub mod error;
pub mod evolution;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod region;
pub mod spectral;
pub mod stochastic;

pub use error::{LabError, Result};
pub use region::Region;
