//! Robust function-on-function linear regression.
//!
//! Curves observed on common grids are expanded in B-spline bases; the
//! regression of response coefficients on predictor coefficients (made
//! L2-isometric through Gram-matrix square roots) is fit by ordinary least
//! squares, partial least squares, or an iteratively reweighted PLS that
//! downweights outlying curves. On top of the fit sit coefficient-surface
//! reconstruction, curve prediction, component selection by trimmed
//! prediction error, bootstrap prediction bands, and the simulation designs
//! and metrics used to validate all of it.

pub mod bootstrap;
pub mod bspline;
pub mod error;
pub mod fflr;
pub mod funcdata;
mod linalg;
pub mod pls;
pub mod rng;
pub mod robust;
pub mod simlab;
pub mod smooth;

pub use error::{Result, RfplsError};
