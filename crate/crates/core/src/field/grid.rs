use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Interior,
    Boundary,
    Outside,
}

impl NodeKind {
    pub fn is_in(self) -> bool {
        self != NodeKind::Outside
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Extent {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self { x_min, x_max, y_min, y_max }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, lo, hi)
    }
}

/// Domain membership test applied node by node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Rectangle,
    Annulus { center: [f64; 2], r_inner: f64, r_outer: f64 },
    Ball { center: [f64; 2], radius: f64 },
    /// First-quadrant wedge `y² ≤ x² ≤ c·y²` cut to `r_inner ≤ r ≤ r_outer`.
    Sector { c: f64, r_inner: f64, r_outer: f64 },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Rectangle => true,
            Shape::Annulus { center, r_inner, r_outer } => {
                let r = (x - center[0]).hypot(y - center[1]);
                r >= r_inner && r <= r_outer
            }
            Shape::Ball { center, radius } => (x - center[0]).hypot(y - center[1]) <= radius,
            Shape::Sector { c, r_inner, r_outer } => {
                let r = x.hypot(y);
                x > 0.0 && y > 0.0 && x * x >= y * y && x * x <= c * y * y && r >= r_inner && r <= r_outer
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidShape(m.to_string()));
        match *self {
            Shape::Rectangle => Ok(()),
            Shape::Annulus { r_inner, r_outer, .. } => {
                if r_inner > 0.0 && r_inner < r_outer {
                    Ok(())
                } else {
                    bad("annulus needs 0 < r_inner < r_outer")
                }
            }
            Shape::Ball { radius, .. } => {
                if radius > 0.0 {
                    Ok(())
                } else {
                    bad("ball radius must be positive")
                }
            }
            Shape::Sector { c, r_inner, r_outer } => {
                if !(c > 1.0) {
                    bad("sector aperture c must exceed 1")
                } else if !(r_inner >= 0.0 && r_inner < r_outer) {
                    bad("sector needs 0 <= r_inner < r_outer")
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Uniform lattice with a tri-state mask.
///
/// Node `(i, j)` sits at `(x_min + i·hx, y_min + j·hy)` and has flat index
/// `j·nx + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    extent: Extent,
    shape: Shape,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    kinds: Vec<NodeKind>,
}

pub const NEIGHBORS8: [(isize, isize); 8] =
    [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

impl Grid2D {
    pub fn new(extent: Extent, shape: Shape, nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::TooCoarse { nx, ny });
        }
        for (axis, min, max) in [('x', extent.x_min, extent.x_max), ('y', extent.y_min, extent.y_max)] {
            if !(min < max) || !min.is_finite() || !max.is_finite() {
                return Err(Error::DegenerateExtent { axis, min, max });
            }
        }
        shape.validate()?;
        let hx = (extent.x_max - extent.x_min) / (nx - 1) as f64;
        let hy = (extent.y_max - extent.y_min) / (ny - 1) as f64;
        let inside: Vec<bool> = (0..nx * ny)
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                shape.contains(extent.x_min + i as f64 * hx, extent.y_min + j as f64 * hy)
            })
            .collect();
        let kinds: Vec<NodeKind> = (0..nx * ny)
            .map(|k| {
                if !inside[k] {
                    return NodeKind::Outside;
                }
                let (i, j) = (k % nx, k / nx);
                if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                    return NodeKind::Boundary;
                }
                let all_in = NEIGHBORS8.iter().all(|&(di, dj)| {
                    let (a, b) = ((i as isize + di) as usize, (j as isize + dj) as usize);
                    inside[b * nx + a]
                });
                if all_in {
                    NodeKind::Interior
                } else {
                    NodeKind::Boundary
                }
            })
            .collect();
        if !kinds.contains(&NodeKind::Interior) {
            return Err(Error::EmptyInterior);
        }
        Ok(Self { extent, shape, nx, ny, hx, hy, kinds })
    }

    /// Rectangle grid with the same node count on both axes.
    pub fn rectangle(extent: Extent, n: usize) -> Result<Self> {
        Self::new(extent, Shape::Rectangle, n, n)
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }
    pub fn shape(&self) -> Shape {
        self.shape
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn len(&self) -> usize {
        self.kinds.len()
    }
    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }
    pub fn x(&self, i: usize) -> f64 {
        self.extent.x_min + i as f64 * self.hx
    }
    pub fn y(&self, j: usize) -> f64 {
        self.extent.y_min + j as f64 * self.hy
    }
    pub fn xy(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (self.x(i), self.y(j))
    }

    pub fn kind(&self, k: usize) -> NodeKind {
        self.kinds[k]
    }
    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }
    pub fn is_in(&self, k: usize) -> bool {
        self.kinds[k].is_in()
    }
    pub fn is_interior(&self, k: usize) -> bool {
        self.kinds[k] == NodeKind::Interior
    }

    /// Index of `(i+di, j+dj)` when it lies on the lattice.
    pub fn offset(&self, k: usize, di: isize, dj: isize) -> Option<usize> {
        let (i, j) = self.ij(k);
        let a = i as isize + di;
        let b = j as isize + dj;
        (a >= 0 && b >= 0 && (a as usize) < self.nx && (b as usize) < self.ny)
            .then(|| b as usize * self.nx + a as usize)
    }

    /// Offset neighbor that is also masked in.
    pub fn offset_in(&self, k: usize, di: isize, dj: isize) -> Option<usize> {
        self.offset(k, di, dj).filter(|&m| self.is_in(m))
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| self.is_interior(k))
    }
    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| self.kinds[k] == NodeKind::Boundary)
    }
    pub fn count(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|&&c| c == kind).count()
    }

    /// Lower-left node index of the cell containing `(x, y)`, if any.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize, f64, f64)> {
        let fx = (x - self.extent.x_min) / self.hx;
        let fy = (y - self.extent.y_min) / self.hy;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= (self.nx - 1) as f64 && fy <= (self.ny - 1) as f64) {
            return None;
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        Some((i, j, fx - i as f64, fy - j as f64))
    }

    /// Run-length encoding of the mask, row-major.
    pub fn mask_rle(&self) -> Vec<(NodeKind, usize)> {
        let mut out: Vec<(NodeKind, usize)> = Vec::new();
        for &kind in &self.kinds {
            match out.last_mut() {
                Some((last, n)) if *last == kind => *n += 1,
                _ => out.push((kind, 1)),
            }
        }
        out
    }

    /// Connected components of boundary nodes under 8-adjacency, each
    /// sorted by index; components are ordered by their smallest index.
    pub fn boundary_components(&self) -> Vec<Vec<usize>> {
        components(self, |k| self.kinds[k] == NodeKind::Boundary)
    }
}

/// 8-connected components of the nodes selected by `member`.
pub fn components(grid: &Grid2D, member: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    for start in 0..grid.len() {
        if seen[start] || !member(start) {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(k) = stack.pop() {
            comp.push(k);
            for &(di, dj) in &NEIGHBORS8 {
                if let Some(m) = grid.offset(k, di, dj) {
                    if !seen[m] && member(m) {
                        seen[m] = true;
                        stack.push(m);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}
