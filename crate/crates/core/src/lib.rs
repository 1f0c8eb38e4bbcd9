//! Numerical laboratory for flat maximal globally hyperbolic (2+1)-spacetimes
//! built from a genus-2 hyperbolic surface and a weighted multicurve.
//!
//! The crate builds the surface group, lifts the multicurve to the hyperbolic
//! plane, embeds the dual tree as the initial singularity of the spacetime,
//! and measures how the level sets of quasi-concave time functions collapse
//! onto that tree as time goes to zero.

pub mod cli;
pub mod config;
pub mod fuchsian;
pub mod lamination;
pub mod metric;
pub mod mink;
pub mod report;
pub mod singularity;
pub mod times;
pub mod tree;
pub mod validate;

pub use fuchsian::{GroupBall, SurfaceGroup, Word};
pub use lamination::{LeafSet, MeasuredMulticurve};
pub use mink::{HPoint, Isometry, Mat3, MinkVec};
pub use singularity::{CosmoPoint, Spacetime};
pub use times::TimeFunction;
