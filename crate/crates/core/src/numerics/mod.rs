pub mod quadrature;
pub mod roots;
pub mod tridiag;

pub use quadrature::{integrate, integrate_half_line, TailSettings};
pub use roots::{bisect, golden_max, invert_monotone};
pub use tridiag::Tridiagonal;
