//! Grids, masks, finite-difference stencils and field containers.

mod grid;
pub mod io;
mod stencil;
mod values;

pub use grid::{components, Extent, Grid2D, NodeKind, Shape, NEIGHBORS8};
pub use stencil::{
    bilinear, complex_gradient, complex_jets, gradient, hessian, jets, jets_stride, wirtinger, ComplexJet, Jet2,
};
pub use values::{ComplexField, Exponent, Field, Masked, PlanarMap, ScalarField};

use std::sync::Arc;

use crate::error::Result;

/// Build a masked grid. Equivalent to [`Grid2D::new`] behind an `Arc`.
pub fn make_grid(extent: Extent, shape: Shape, nx: usize, ny: usize) -> Result<Arc<Grid2D>> {
    Grid2D::new(extent, shape, nx, ny).map(Arc::new)
}
