use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::Grid2D;
use crate::error::{Error, Result};
use crate::parallel::{max_of, min_of};

/// Exponent `p` of the p-energy, validated to lie in `(1, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::InvalidExponent(p))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Exponent {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<Exponent> for f64 {
    fn from(p: Exponent) -> f64 {
        p.0
    }
}

/// Per-node values on a shared grid.
#[derive(Clone, Debug)]
pub struct Field<T> {
    grid: Arc<Grid2D>,
    values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type ComplexField = Field<Complex64>;
/// Derived quantity that may be undefined at some nodes.
pub type Masked<T> = Field<Option<T>>;

impl<T> Field<T> {
    pub fn from_values(grid: &Arc<Grid2D>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    pub fn at(&self, k: usize) -> &T {
        &self.values[k]
    }
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.values[self.grid.index(i, j)]
    }

    pub fn same_grid<U>(&self, other: &Field<U>) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// Node-wise map preserving the grid.
    pub fn map<U: Send>(&self, f: impl Fn(usize, &T) -> U + Sync) -> Field<U>
    where
        T: Sync,
    {
        let values = self.values.par_iter().enumerate().map(|(k, v)| f(k, v)).collect();
        Field { grid: Arc::clone(&self.grid), values }
    }
}

impl<T: Default + Send> Field<T> {
    /// Sample `f(x, y)` at masked-in nodes; outside nodes hold `T::default()`.
    pub fn from_fn(grid: &Arc<Grid2D>, f: impl Fn(f64, f64) -> T + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                if grid.is_in(k) {
                    let (x, y) = grid.xy(k);
                    f(x, y)
                } else {
                    T::default()
                }
            })
            .collect();
        Self { grid: Arc::clone(grid), values }
    }
}

impl<T: Copy> Masked<T> {
    pub fn defined(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.values.iter().enumerate().filter_map(|(k, v)| v.map(|v| (k, v)))
    }
    pub fn count_defined(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

impl Masked<f64> {
    pub fn max_abs(&self) -> f64 {
        max_of(self.defined().map(|(_, v)| v.abs())).max(0.0)
    }
    pub fn min(&self) -> f64 {
        min_of(self.defined().map(|(_, v)| v))
    }
    pub fn max(&self) -> f64 {
        max_of(self.defined().map(|(_, v)| v))
    }
}

impl ScalarField {
    /// Values at masked-in nodes must be finite.
    pub fn check_finite(&self) -> Result<()> {
        for (k, v) in self.values.iter().enumerate() {
            if self.grid.is_in(k) && !v.is_finite() {
                let (i, j) = self.grid.ij(k);
                return Err(Error::NonFinite { i, j });
            }
        }
        Ok(())
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        self.map(|_, v| lambda * v)
    }
}

/// A map `u = (u¹, u²)` with its exponent.
#[derive(Clone, Debug)]
pub struct PlanarMap {
    pub u1: ScalarField,
    pub u2: ScalarField,
    pub p: Exponent,
}

impl PlanarMap {
    pub fn new(u1: ScalarField, u2: ScalarField, p: Exponent) -> Result<Self> {
        if !u1.same_grid(&u2) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { u1, u2, p })
    }

    pub fn from_fn(
        grid: &Arc<Grid2D>,
        p: Exponent,
        f: impl Fn(f64, f64) -> (f64, f64) + Sync,
    ) -> Self {
        let u1 = ScalarField::from_fn(grid, |x, y| f(x, y).0);
        let u2 = ScalarField::from_fn(grid, |x, y| f(x, y).1);
        Self { u1, u2, p }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        self.u1.grid()
    }

    pub fn components(&self) -> [&ScalarField; 2] {
        [&self.u1, &self.u2]
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { u1: self.u1.scaled(lambda), u2: self.u2.scaled(lambda), p: self.p }
    }

    /// Largest node-wise difference over masked-in nodes.
    pub fn max_diff(&self, other: &PlanarMap) -> f64 {
        let grid = self.grid();
        let d = (0..grid.len()).filter(|&k| grid.is_in(k)).map(|k| {
            let a = (self.u1.at(k) - other.u1.at(k)).abs();
            let b = (self.u2.at(k) - other.u2.at(k)).abs();
            a.max(b)
        });
        max_of(d).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Extent, Shape};

    #[test]
    fn exponent_guard() {
        assert!(Exponent::new(1.0).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
        assert_eq!(Exponent::new(2.5).unwrap().get(), 2.5);
    }

    #[test]
    fn from_fn_leaves_outside_at_default() {
        let shape = Shape::Ball { center: [0.0, 0.0], radius: 0.5 };
        let g = Arc::new(Grid2D::new(Extent::square(-1.0, 1.0), shape, 9, 9).unwrap());
        let f = ScalarField::from_fn(&g, |_, _| 7.0);
        assert_eq!(*f.get(0, 0), 0.0);
        assert_eq!(*f.get(4, 4), 7.0);
    }
}
