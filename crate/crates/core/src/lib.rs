//! Time-varying semidefinite programs with polynomial data on `[0, 1]`.
//!
//! Polynomial trajectories are found by a primal SDP hierarchy (Gram
//! certificates of PSD-ness on the interval) and bounded from above by a
//! dual hierarchy of moment relaxations.

// Links the system BLAS/LAPACK used by the PSD cone in clarabel.
use openblas_src as _;

pub mod applications;
pub mod conic;
pub mod error;
pub mod hierarchy;
pub mod model;
pub mod polynomial;
pub mod sos;

pub use error::{Error, Result};
