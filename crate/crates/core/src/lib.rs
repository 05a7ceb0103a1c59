//! Stabilized explicit Runge-Kutta methods (RKC, ROCK2, PIROCK) for the 2D
//! incompressible Navier-Stokes equations on a staggered grid, with
//! projection and DAE couplings and a benchmark harness.
//!
//! The guide in `book/` walks through the pieces; its snippets run as
//! doctests of this crate.

pub mod bench;
pub mod coupling;
pub mod dct;
pub mod error;
pub mod grid;
pub mod integrators;
pub mod poisson;
pub mod spatial_ops;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/grid.md")]
    pub mod grid {}
    #[doc = include_str!("../../../book/src/transforms.md")]
    pub mod transforms {}
    #[doc = include_str!("../../../book/src/integrators.md")]
    pub mod integrators {}
    #[doc = include_str!("../../../book/src/coupling.md")]
    pub mod coupling {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    pub mod benchmarks {}
}
