//! Discrete p-energy on the lattice.
//!
//! Every cell whose four corners are masked in is split into right
//! triangles along both diagonals. The four triangles meeting at the cell
//! corners each carry weight `hx·hy/4`, and on each of them the Jacobian is
//! the pair of edge differences leaving that corner. At `p = 2` this yields
//! the five-point Laplacian.

use rayon::prelude::*;

use crate::field::Grid2D;
use crate::parallel::tree_sum;

/// Edge slots of a cell: bottom, top (x-differences), left, right (y-differences).
const BOTTOM: usize = 0;
const TOP: usize = 1;
const LEFT: usize = 2;
const RIGHT: usize = 3;

/// `(x-edge, y-edge)` used by each corner triangle.
const CORNERS: [(usize, usize); 4] = [(BOTTOM, LEFT), (BOTTOM, RIGHT), (TOP, LEFT), (TOP, RIGHT)];

/// Two-component unknown vector over all lattice nodes.
pub type State = [Vec<f64>; 2];

#[derive(Clone, Copy, Debug, Default)]
struct Corner {
    g: [f64; 4],
    s1: f64,
    s2: f64,
}

pub(crate) struct Energy<'a> {
    grid: &'a Grid2D,
    p: f64,
    eps2: f64,
    /// `Some(lower-left node)` for cells that take part.
    cells: Vec<Option<usize>>,
    free: Vec<bool>,
}

impl<'a> Energy<'a> {
    pub fn new(grid: &'a Grid2D, p: f64, eps: f64) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let cells = (0..(nx - 1) * (ny - 1))
            .map(|c| {
                let (i, j) = (c % (nx - 1), c / (nx - 1));
                let k = grid.index(i, j);
                [k, k + 1, k + nx, k + nx + 1].iter().all(|&m| grid.is_in(m)).then_some(k)
            })
            .collect();
        let free = (0..grid.len()).map(|k| grid.is_interior(k)).collect();
        Self { grid, p, eps2: eps * eps, cells, free }
    }

    pub fn set_eps(&mut self, eps: f64) {
        self.eps2 = eps * eps;
    }

    pub fn cell_area(&self) -> f64 {
        self.grid.cell_area()
    }

    fn weight(&self) -> f64 {
        0.25 * self.grid.hx() * self.grid.hy()
    }

    fn edges(&self, u: &[f64], k: usize) -> [f64; 4] {
        let nx = self.grid.nx();
        let (bl, br, tl, tr) = (u[k], u[k + 1], u[k + nx], u[k + nx + 1]);
        let (hx, hy) = (self.grid.hx(), self.grid.hy());
        [(br - bl) / hx, (tr - tl) / hx, (tl - bl) / hy, (tr - br) / hy]
    }

    fn density(&self, q: f64) -> f64 {
        if q == 0.0 {
            0.0
        } else {
            q.powf(0.5 * self.p)
        }
    }

    fn cell_energy(&self, u: &State, k: usize) -> f64 {
        let e1 = self.edges(&u[0], k);
        let e2 = self.edges(&u[1], k);
        let sum: f64 = CORNERS
            .iter()
            .map(|&(a, b)| self.density(e1[a] * e1[a] + e1[b] * e1[b] + e2[a] * e2[a] + e2[b] * e2[b] + self.eps2))
            .sum();
        self.weight() * sum
    }

    pub fn value(&self, u: &State) -> f64 {
        let per_cell: Vec<f64> =
            self.cells.par_iter().map(|c| c.map_or(0.0, |k| self.cell_energy(u, k))).collect();
        tree_sum(&per_cell)
    }

    /// `E(u + αd) − E(u)` evaluated cell by cell from the increments, so
    /// the difference keeps relative accuracy when it is tiny.
    pub fn delta(&self, u: &State, d: &State, alpha: f64) -> f64 {
        let half_p = 0.5 * self.p;
        let per_cell: Vec<f64> = self
            .cells
            .par_iter()
            .map(|c| {
                let Some(k) = *c else { return 0.0 };
                let (e1, e2) = (self.edges(&u[0], k), self.edges(&u[1], k));
                let (d1, d2) = (self.edges(&d[0], k), self.edges(&d[1], k));
                let sum: f64 = CORNERS
                    .iter()
                    .map(|&(a, b)| {
                        let g = [e1[a], e1[b], e2[a], e2[b]];
                        let dg = [d1[a], d1[b], d2[a], d2[b]].map(|v| alpha * v);
                        let q = g.iter().map(|v| v * v).sum::<f64>() + self.eps2;
                        let dq: f64 = g.iter().zip(&dg).map(|(x, y)| y * (2.0 * x + y)).sum();
                        if q == 0.0 {
                            self.density(dq)
                        } else {
                            q.powf(half_p) * (half_p * (dq / q).ln_1p()).exp_m1()
                        }
                    })
                    .sum();
                self.weight() * sum
            })
            .collect();
        tree_sum(&per_cell)
    }

    fn corners(&self, u: &State, k: usize) -> [Corner; 4] {
        let e1 = self.edges(&u[0], k);
        let e2 = self.edges(&u[1], k);
        let p = self.p;
        CORNERS.map(|(a, b)| {
            let g = [e1[a], e1[b], e2[a], e2[b]];
            let q = g.iter().map(|v| v * v).sum::<f64>() + self.eps2;
            if q == 0.0 {
                return Corner { g, s1: 0.0, s2: 0.0 };
            }
            let s1 = p * q.powf(0.5 * p - 1.0);
            Corner { g, s1, s2: (p - 2.0) * s1 / q }
        })
    }

    /// Scatter per-corner fluxes (2×2 each, row per component) into
    /// derivatives with respect to the four edge differences of each component.
    fn edge_forces(&self, flux: &[[f64; 4]; 4]) -> [[f64; 4]; 2] {
        let w = self.weight();
        let mut out = [[0.0; 4]; 2];
        for (corner, &(a, b)) in CORNERS.iter().enumerate() {
            for c in 0..2 {
                out[c][a] += w * flux[corner][2 * c];
                out[c][b] += w * flux[corner][2 * c + 1];
            }
        }
        out
    }

    /// Gather edge forces from the (up to) four cells around each free node.
    fn gather(&self, forces: &[Option<[[f64; 4]; 2]>]) -> State {
        let (nx, hx, hy) = (self.grid.nx(), self.grid.hx(), self.grid.hy());
        let cnx = nx - 1;
        let node = |k: usize, c: usize| -> f64 {
            if !self.free[k] {
                return 0.0;
            }
            let (i, j) = self.grid.ij(k);
            let f = |ci: usize, cj: usize| forces[cj * cnx + ci].map(|f| f[c]);
            let mut g = 0.0;
            if let Some(f) = f(i, j) {
                g += -f[BOTTOM] / hx - f[LEFT] / hy;
            }
            if let Some(f) = f(i - 1, j) {
                g += f[BOTTOM] / hx - f[RIGHT] / hy;
            }
            if let Some(f) = f(i, j - 1) {
                g += -f[TOP] / hx + f[LEFT] / hy;
            }
            if let Some(f) = f(i - 1, j - 1) {
                g += f[TOP] / hx + f[RIGHT] / hy;
            }
            g
        };
        [0, 1].map(|c| (0..self.grid.len()).into_par_iter().map(|k| node(k, c)).collect())
    }

    /// `∂E/∂u` at free nodes, zero elsewhere.
    pub fn gradient(&self, u: &State) -> State {
        let forces: Vec<_> = self
            .cells
            .par_iter()
            .map(|c| {
                c.map(|k| {
                    let flux = self.corners(u, k).map(|cr| cr.g.map(|v| cr.s1 * v));
                    self.edge_forces(&flux)
                })
            })
            .collect();
        self.gather(&forces)
    }

    /// Second-derivative data at `u` for repeated Hessian products.
    pub fn linearize(&self, u: &State) -> Linearization<'_, 'a> {
        let corners = self.cells.par_iter().map(|c| c.map(|k| self.corners(u, k))).collect();
        Linearization { energy: self, corners }
    }
}

pub(crate) struct Linearization<'e, 'a> {
    energy: &'e Energy<'a>,
    corners: Vec<Option<[Corner; 4]>>,
}

impl Linearization<'_, '_> {
    /// Hessian-vector product restricted to free nodes.
    pub fn apply(&self, v: &State) -> State {
        let e = self.energy;
        let forces: Vec<_> = self
            .corners
            .par_iter()
            .zip(e.cells.par_iter())
            .map(|(cr, cell)| {
                let (cr, k) = (cr.as_ref()?, (*cell)?);
                let d1 = e.edges(&v[0], k);
                let d2 = e.edges(&v[1], k);
                let flux = std::array::from_fn(|n| {
                    let (a, b) = CORNERS[n];
                    let dg = [d1[a], d1[b], d2[a], d2[b]];
                    let c = &cr[n];
                    let dot: f64 = c.g.iter().zip(&dg).map(|(x, y)| x * y).sum();
                    std::array::from_fn(|m| c.s1 * dg[m] + c.s2 * dot * c.g[m])
                });
                Some(e.edge_forces(&flux))
            })
            .collect();
        e.gather(&forces)
    }
}

pub(crate) fn dot(a: &State, b: &State) -> f64 {
    let parts: Vec<f64> = (0..2)
        .flat_map(|c| a[c].chunks(1024).zip(b[c].chunks(1024)))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    tree_sum(&parts)
}

pub(crate) fn axpy(alpha: f64, x: &State, y: &State) -> State {
    [0, 1].map(|c| x[c].iter().zip(&y[c]).map(|(a, b)| alpha * a + b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Extent, Shape};

    fn grid(n: usize) -> Grid2D {
        Grid2D::rectangle(Extent::square(0.0, 1.0), n).unwrap()
    }

    fn sample(g: &Grid2D, f: impl Fn(f64, f64) -> (f64, f64)) -> State {
        let a = (0..g.len()).map(|k| f(g.xy(k).0, g.xy(k).1).0).collect();
        let b = (0..g.len()).map(|k| f(g.xy(k).0, g.xy(k).1).1).collect();
        [a, b]
    }

    #[test]
    fn affine_energies() {
        let g = grid(9);
        let e = Energy::new(&g, 2.0, 0.0);
        assert!((e.value(&sample(&g, |x, y| (x, y))) - 2.0).abs() < 1e-12);
        let e4 = Energy::new(&g, 4.0, 0.0);
        assert!((e4.value(&sample(&g, |x, _| (2.0 * x, 0.0))) - 16.0).abs() < 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let shape = Shape::Ball { center: [0.5, 0.5], radius: 0.5 };
        let g = Grid2D::new(Extent::square(0.0, 1.0), shape, 11, 11).unwrap();
        let e = Energy::new(&g, 3.3, 0.05);
        let u = sample(&g, |x, y| ((3.0 * x).sin() + y * y, x * y - y));
        let grad = e.gradient(&u);
        let k = g.index(5, 4);
        for c in 0..2 {
            let h = 1e-6;
            let mut up = u.clone();
            up[c][k] += h;
            let mut dn = u.clone();
            dn[c][k] -= h;
            let fd = (e.value(&up) - e.value(&dn)) / (2.0 * h);
            assert!((fd - grad[c][k]).abs() < 1e-7 * (1.0 + fd.abs()), "{fd} vs {}", grad[c][k]);
        }
    }

    #[test]
    fn hessian_product_matches_gradient_difference() {
        let g = grid(9);
        let e = Energy::new(&g, 1.6, 0.1);
        let u = sample(&g, |x, y| (x + 0.3 * y * y, y - 0.2 * x * y));
        let v = sample(&g, |x, y| ((5.0 * x).cos() * y, x - y));
        let hv = e.linearize(&u).apply(&v);
        let t = 1e-6;
        let gp = e.gradient(&axpy(t, &v, &u));
        let gm = e.gradient(&axpy(-t, &v, &u));
        for c in 0..2 {
            for k in 0..g.len() {
                let fd = (gp[c][k] - gm[c][k]) / (2.0 * t);
                assert!((fd - hv[c][k]).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn delta_matches_difference_of_values() {
        let g = grid(11);
        let e = Energy::new(&g, 2.6, 0.01);
        let u = sample(&g, |x, y| (x + 0.3 * y * y, y - 0.2 * x * y));
        let d = sample(&g, |x, y| ((4.0 * x).sin() * y, x * y));
        for alpha in [1.0, 1e-3] {
            let direct = e.value(&axpy(alpha, &d, &u)) - e.value(&u);
            assert!((e.delta(&u, &d, alpha) - direct).abs() < 1e-12);
        }
        assert!(e.delta(&u, &d, 1e-12).abs() > 0.0);
    }

    #[test]
    fn laplacian_at_p_two() {
        let g = grid(7);
        let e = Energy::new(&g, 2.0, 0.0);
        let u = sample(&g, |x, y| (x * x * y + y * y * y, 0.0));
        let grad = e.gradient(&u);
        for k in g.interior_nodes() {
            let (i, j) = g.ij(k);
            let v = |a: usize, b: usize| u[0][g.index(a, b)];
            let h2 = g.hx() * g.hx();
            let lap = (v(i + 1, j) + v(i - 1, j) + v(i, j + 1) + v(i, j - 1) - 4.0 * v(i, j)) / h2;
            assert!((grad[0][k] / g.cell_area() + 2.0 * lap).abs() < 1e-9);
        }
    }
}
