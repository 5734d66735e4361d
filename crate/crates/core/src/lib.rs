pub mod error;
pub mod functionals;
pub mod gauss_map;
pub mod grid;
pub mod linalg;
pub mod loop_tools;
pub mod legendre;
pub mod pseudo_linalg;
pub mod surface;

pub use error::{GeomError, Result};

/// Principal curvatures closer than this (relative) count as umbilic.
pub fn umbilic(k1: f64, k2: f64) -> bool {
    (k1 - k2).abs() < 1e-6 * (k1.abs() + k2.abs() + 1.0)
}
