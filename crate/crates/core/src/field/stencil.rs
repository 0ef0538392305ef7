use std::ops::{Add, Mul};

use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::Grid2D;
use super::values::{ComplexField, Field, Masked, ScalarField};

/// Value plus first and second derivatives at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub u: f64,
    pub ux: f64,
    pub uy: f64,
    pub uxx: f64,
    pub uxy: f64,
    pub uyy: f64,
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            u: self.u + o.u,
            ux: self.ux + o.ux,
            uy: self.uy + o.uy,
            uxx: self.uxx + o.uxx,
            uxy: self.uxy + o.uxy,
            uyy: self.uyy + o.uyy,
        }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, s: f64) -> Jet2 {
        Jet2 {
            u: self.u * s,
            ux: self.ux * s,
            uy: self.uy * s,
            uxx: self.uxx * s,
            uxy: self.uxy * s,
            uyy: self.uyy * s,
        }
    }
}

impl Jet2 {
    pub fn grad_norm2(&self) -> f64 {
        self.ux * self.ux + self.uy * self.uy
    }
    pub fn grad_norm(&self) -> f64 {
        self.ux.hypot(self.uy)
    }
    pub fn laplacian(&self) -> f64 {
        self.uxx + self.uyy
    }
    pub fn det_hessian(&self) -> f64 {
        self.uxx * self.uyy - self.uxy * self.uxy
    }
    /// `H ∇u`, half the gradient of `|∇u|²`.
    pub fn hess_grad(&self) -> [f64; 2] {
        [self.uxx * self.ux + self.uxy * self.uy, self.uxy * self.ux + self.uyy * self.uy]
    }
    pub fn complex(&self) -> ComplexJet {
        ComplexJet {
            f: Complex64::new(self.ux, -self.uy) * 0.5,
            fz: Complex64::new(self.uxx - self.uyy, -2.0 * self.uxy) * 0.25,
            fzb: Complex64::new(0.25 * self.laplacian(), 0.0),
        }
    }
}

/// Complex gradient `f = (u_x − i u_y)/2` with its Wirtinger derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexJet {
    pub f: Complex64,
    pub fz: Complex64,
    pub fzb: Complex64,
}

impl ComplexJet {
    /// `4(|f_z̄|² − |f_z|²)`, equal to the Hessian determinant.
    pub fn det_hessian(&self) -> f64 {
        4.0 * (self.fzb.norm_sqr() - self.fz.norm_sqr())
    }
}

/// Bilinear blend of four corner values with local coordinates `(tx, ty)`.
pub fn bilinear<T>(c00: T, c10: T, c01: T, c11: T, tx: f64, ty: f64) -> T
where
    T: Add<Output = T> + Mul<f64, Output = T>,
{
    c00 * ((1.0 - tx) * (1.0 - ty)) + c10 * (tx * (1.0 - ty)) + c01 * ((1.0 - tx) * ty) + c11 * (tx * ty)
}

fn jet_at(u: &ScalarField, k: usize, s: isize) -> Option<Jet2> {
    let g = u.grid();
    let v = |di: isize, dj: isize| g.offset_in(k, di * s, dj * s).map(|m| *u.at(m));
    let (e, w, n, so) = (v(1, 0)?, v(-1, 0)?, v(0, 1)?, v(0, -1)?);
    let (ne, nw, se, sw) = (v(1, 1)?, v(-1, 1)?, v(1, -1)?, v(-1, -1)?);
    let c = *u.at(k);
    let hx = g.hx() * s as f64;
    let hy = g.hy() * s as f64;
    Some(Jet2 {
        u: c,
        ux: (e - w) / (2.0 * hx),
        uy: (n - so) / (2.0 * hy),
        uxx: (e - 2.0 * c + w) / (hx * hx),
        uyy: (n - 2.0 * c + so) / (hy * hy),
        uxy: (ne - nw - se + sw) / (4.0 * hx * hy),
    })
}

/// Central-difference jets at interior nodes.
pub fn jets(u: &ScalarField) -> Masked<Jet2> {
    let g = u.grid();
    u.map(|k, _| if g.is_interior(k) { jet_at(u, k, 1) } else { None })
}

/// Jets from the stencil with spacing `stride·h`, defined where every
/// stretched neighbor is masked in. Paired with [`jets`] this gives a
/// refinement estimate of stencil error.
pub fn jets_stride(u: &ScalarField, stride: usize) -> Masked<Jet2> {
    let g = u.grid();
    u.map(|k, _| if g.is_interior(k) { jet_at(u, k, stride as isize) } else { None })
}

/// First derivative along one axis at node `k`: central when both
/// neighbors are in, otherwise one-sided second order.
fn axis_derivative(g: &Grid2D, vals: &dyn Fn(usize) -> Option<f64>, k: usize, dx: isize, dy: isize, h: f64) -> Option<f64> {
    let at = |n: isize| {
        if n == 0 {
            vals(k)
        } else {
            g.offset_in(k, dx * n, dy * n).and_then(vals)
        }
    };
    if let (Some(p), Some(m)) = (at(1), at(-1)) {
        return Some((p - m) / (2.0 * h));
    }
    let c = at(0)?;
    if let (Some(p1), Some(p2)) = (at(1), at(2)) {
        return Some((-3.0 * c + 4.0 * p1 - p2) / (2.0 * h));
    }
    if let (Some(m1), Some(m2)) = (at(-1), at(-2)) {
        return Some((3.0 * c - 4.0 * m1 + m2) / (2.0 * h));
    }
    None
}

fn axis_second(u: &ScalarField, k: usize, dx: isize, dy: isize, h: f64) -> Option<f64> {
    let g = u.grid();
    let at = |n: isize| if n == 0 { Some(*u.at(k)) } else { g.offset_in(k, dx * n, dy * n).map(|m| *u.at(m)) };
    let c = *u.at(k);
    if let (Some(p), Some(m)) = (at(1), at(-1)) {
        return Some((p - 2.0 * c + m) / (h * h));
    }
    for sgn in [1, -1] {
        if let (Some(a), Some(b), Some(d)) = (at(sgn), at(2 * sgn), at(3 * sgn)) {
            return Some((2.0 * c - 5.0 * a + 4.0 * b - d) / (h * h));
        }
    }
    None
}

/// `(u_x, u_y)` at masked-in nodes.
pub fn gradient(u: &ScalarField) -> (Masked<f64>, Masked<f64>) {
    let g = u.grid();
    let vals = |m: usize| Some(*u.at(m));
    let d = |dx, dy, h| u.map(|k, _| if g.is_in(k) { axis_derivative(g, &vals, k, dx, dy, h) } else { None });
    (d(1, 0, g.hx()), d(0, 1, g.hy()))
}

/// `(u_xx, u_xy, u_yy)`: nine-point stencil at interior nodes, one-sided
/// second-order formulas at boundary nodes where the lattice allows.
pub fn hessian(u: &ScalarField) -> (Masked<f64>, Masked<f64>, Masked<f64>) {
    let g = u.grid();
    let (ux, _) = gradient(u);
    let uxx = u.map(|k, _| if g.is_in(k) { axis_second(u, k, 1, 0, g.hx()) } else { None });
    let uyy = u.map(|k, _| if g.is_in(k) { axis_second(u, k, 0, 1, g.hy()) } else { None });
    let ux_vals = |m: usize| *ux.at(m);
    let uxy = u.map(|k, _| {
        if g.is_interior(k) {
            jet_at(u, k, 1).map(|j| j.uxy)
        } else if g.is_in(k) {
            axis_derivative(g, &ux_vals, k, 0, 1, g.hy())
        } else {
            None
        }
    });
    (uxx, uxy, uyy)
}

/// `f = (u_x − i u_y)/2`.
pub fn complex_gradient(u: &ScalarField) -> Masked<Complex64> {
    let (ux, uy) = gradient(u);
    ux.map(|k, a| a.zip(*uy.at(k)).map(|(a, b)| Complex64::new(a, -b) * 0.5))
}

/// Complex gradient and its Wirtinger derivatives at interior nodes, from
/// the second-difference stencils: `f_z = (u_xx − u_yy − 2i u_xy)/4`,
/// `f_z̄ = Δu/4`.
pub fn complex_jets(u: &ScalarField) -> Masked<ComplexJet> {
    jets(u).map(|_, j| j.map(|j| j.complex()))
}

/// `(∂_z F, ∂_z̄ F)` of a general complex field by central differences.
pub fn wirtinger(field: &ComplexField) -> (Masked<Complex64>, Masked<Complex64>) {
    let g = field.grid();
    let pairs: Vec<Option<(Complex64, Complex64)>> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            if !g.is_interior(k) {
                return None;
            }
            let v = |di, dj| g.offset_in(k, di, dj).map(|m| *field.at(m));
            let fx = (v(1, 0)? - v(-1, 0)?) / (2.0 * g.hx());
            let fy = (v(0, 1)? - v(0, -1)?) / (2.0 * g.hy());
            let i = Complex64::i();
            Some(((fx - i * fy) * 0.5, (fx + i * fy) * 0.5))
        })
        .collect();
    let dz = pairs.iter().map(|p| p.map(|p| p.0)).collect();
    let dzb = pairs.iter().map(|p| p.map(|p| p.1)).collect();
    (
        Field::from_values(g, dz).expect("length matches grid"),
        Field::from_values(g, dzb).expect("length matches grid"),
    )
}
