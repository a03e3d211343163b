//! Multi-index Monte Carlo finite elements for elliptic problems with an
//! affine random diffusion coefficient.
//!
//! The crate estimates `E[G(u)]` for `−div(A(ω)∇u) = f` with homogeneous
//! Dirichlet data, where `A = φ₀ + Σ_j ω_j φ_j` is a sine expansion with
//! uniform parameters. Estimates combine P1 finite element solves on nested
//! meshes, truncations of the coefficient series and Monte Carlo averages
//! over the simplex `j + ℓ + ν ≤ N`.
//!
//! ```
//! use mimcfem::multiindex::{Experiment, ScheduleParams, Variant};
//!
//! let p = ScheduleParams::preset(Experiment::Square, Variant::Symmetrized);
//! assert_eq!(p.schedule_m(2), 6);
//! assert_eq!(p.schedule_s(4), 4);
//! ```

pub mod assembly;
pub mod coefficient;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod mesh;
pub mod multiindex;
pub mod quadrature;
pub mod sampler;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/meshes.md")]
    pub struct Meshes;
    #[doc = include_str!("../../../book/src/coefficient.md")]
    pub struct Coefficient;
    #[doc = include_str!("../../../book/src/double-differences.md")]
    pub struct DoubleDifferences;
    #[doc = include_str!("../../../book/src/schedules.md")]
    pub struct Schedules;
    #[doc = include_str!("../../../book/src/studies.md")]
    pub struct Studies;
    #[doc = include_str!("../../../book/src/formats.md")]
    pub struct Formats;
}
