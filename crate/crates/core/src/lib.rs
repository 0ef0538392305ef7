//! Numerical laboratory for planar p-harmonic maps.
//!
//! Maps `u = (u¹, u²)` solving `div(|Du|^{p−2} ∇uⁱ) = 0` are computed on
//! masked grids by energy minimization ([`solver`]), examined through their
//! complex gradients ([`cgrad`]) and level-curve geometry ([`geometry`]),
//! and fed to property checks ([`verify`]). Radial maps `(H(r)x, H(r)y)`
//! come from an ODE ([`radial`]).

pub mod cgrad;
pub mod error;
pub mod field;
pub mod geometry;
pub mod parallel;
pub mod radial;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/complex-gradient.md")]
    mod complex_gradient {}
    #[doc = include_str!("../../../book/src/level-curves.md")]
    mod level_curves {}
    #[doc = include_str!("../../../book/src/radial.md")]
    mod radial {}
    #[doc = include_str!("../../../book/src/checks.md")]
    mod checks {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
