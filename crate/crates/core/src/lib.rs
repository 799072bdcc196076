//! Numerical curvature tower: Riemann through Bach, Q-curvature, the J-tensor,
//! the Paneitz operator and the adjoint linearizations, on Taylor jets of a
//! metric at a chart point.

pub mod curvature;
pub mod error;
pub mod fields;
pub mod integrals;
pub mod jets;
pub mod metrics;
pub mod taylor;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
