//! Numerical building blocks: special functions, quadrature and 1-D solvers.

pub mod quad;
pub mod roots;
pub mod special;

pub use quad::integrate;
pub use roots::{bisect, brent, golden_section_max};
