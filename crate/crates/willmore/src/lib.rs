//! Quaternionic numerical geometry for conformally immersed surfaces.
//!
//! This crate computes the mean curvature sphere congruence of a surface
//! sampled on a structured conformal chart, splits its derivative into the
//! Hopf fields `A` and `Q`, evaluates the Willmore energy, and constructs
//! the forward and backward transforms that send a Willmore surface to a
//! new one. A sequence driver iterates the transforms and classifies how
//! the sequence terminates.
//!
//! The numerical model is deliberately simple: node-centered rectangular
//! grids, second-order stencils, trapezoid quadrature. Every derived
//! quantity comes with residual diagnostics so a caller can tell whether a
//! number is trustworthy at the resolution used.

pub mod backlund;
pub mod chart;
pub mod gallery;
pub mod linefield;
pub mod mcs;
pub mod oracle;
pub mod quat;
pub mod report;
pub mod sequence;
pub mod tol;

pub use chart::{Field, GridChart, OneForm, Window};
pub use linefield::LineField;
pub use mcs::{Mcs, SurfaceChart};
pub use quat::{HMat2, HVec2, ProjPoint, Quat};

// The guide's code blocks compile and run under `cargo test --doc`, one
// module per chapter so a failure names its origin.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/quaternions.md")]
    pub mod quaternions {}
    #[doc = include_str!("../../../book/src/charts.md")]
    pub mod charts {}
    #[doc = include_str!("../../../book/src/congruence.md")]
    pub mod congruence {}
    #[doc = include_str!("../../../book/src/transforms.md")]
    pub mod transforms {}
    #[doc = include_str!("../../../book/src/sequences.md")]
    pub mod sequences {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    pub mod conventions {}
}
