//! Banded storage, Cholesky and a shift-invert Lanczos solver.

pub mod banded;
pub mod lanczos;

pub use banded::{axpy, dot, norm2, BandedCholesky, SymBanded};
pub use lanczos::{lowest_generalized, normalize_sign, Eigenpairs, LanczosOptions};
