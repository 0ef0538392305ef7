//! Line and area integrals over level sets, and the length function.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{bilinear, jets, Jet2, Masked, PlanarMap, ScalarField};
use crate::parallel::tree_sum;
use crate::solver::SINGULAR_GRADIENT;

use super::contour::extract_level_with;
use super::{curvature_at, grad_of_grad_norm2, normal_growth, CurvatureMode, LevelCurve};

/// Bilinear blend of the four corner jets of the cell holding `(x, y)`.
pub fn jet_at_point(node_jets: &Masked<Jet2>, x: f64, y: f64) -> Option<Jet2> {
    let grid = node_jets.grid();
    let (i, j, tx, ty) = grid.locate(x, y)?;
    let k = grid.index(i, j);
    let nx = grid.nx();
    let c = |m: usize| *node_jets.at(m);
    Some(bilinear(c(k)?, c(k + 1)?, c(k + nx)?, c(k + nx + 1)?, tx, ty))
}

/// Midpoint-rule integral over cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    pub cells: usize,
    /// Cells inside the region whose centre jet was unavailable or singular.
    pub skipped: usize,
}

/// `∫ integrand` over cells whose centre satisfies `region`. Each field's
/// centre jet is the mean of its four corner jets.
pub fn cell_quadrature(
    fields: &[&Masked<Jet2>],
    region: impl Fn(f64, f64) -> bool + Sync,
    integrand: impl Fn(&[Jet2]) -> Option<f64> + Sync,
) -> Quadrature {
    let grid = fields[0].grid();
    let nx = grid.nx();
    let area = grid.cell_area();
    let per_cell: Vec<Option<Option<f64>>> = (0..(grid.ny() - 1) * (nx - 1))
        .into_par_iter()
        .map(|c| {
            let k = grid.index(c % (nx - 1), c / (nx - 1));
            let (x, y) = grid.xy(k);
            if !region(x + 0.5 * grid.hx(), y + 0.5 * grid.hy()) {
                return None;
            }
            let centre: Option<Vec<Jet2>> = fields
                .iter()
                .map(|f| {
                    let c = |m: usize| *f.at(m);
                    Some((c(k)? + c(k + 1)? + c(k + nx)? + c(k + nx + 1)?) * 0.25)
                })
                .collect();
            Some(centre.and_then(|j| integrand(&j)).map(|v| v * area))
        })
        .collect();
    let values: Vec<f64> = per_cell.iter().flatten().flatten().copied().collect();
    Quadrature {
        value: tree_sum(&values),
        cells: values.len(),
        skipped: per_cell.iter().filter(|c| matches!(c, Some(None))).count(),
    }
}

fn in_disk(center: [f64; 2], radius: f64) -> impl Fn(f64, f64) -> bool + Sync {
    move |x, y| (x - center[0]).hypot(y - center[1]) < radius
}

/// Length of the part of segment `a → b` inside the disk.
fn clipped_length(a: [f64; 2], b: [f64; 2], center: [f64; 2], radius: f64) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let m = [a[0] - center[0], a[1] - center[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    if qa == 0.0 {
        return 0.0;
    }
    let qb = 2.0 * (m[0] * d[0] + m[1] * d[1]);
    let qc = m[0] * m[0] + m[1] * m[1] - radius * radius;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return 0.0;
    }
    let r = disc.sqrt();
    let t0 = ((-qb - r) / (2.0 * qa)).max(0.0);
    let t1 = ((-qb + r) / (2.0 * qa)).min(1.0);
    (t1 - t0).max(0.0) * qa.sqrt()
}

/// Both sides of `L_B(s) ≤ ∫_{Ω∩B} |k| + 2πR`.
#[derive(Clone, Debug, Serialize)]
pub struct LengthBound {
    pub level: f64,
    pub center: [f64; 2],
    pub radius: f64,
    pub length_in_ball: f64,
    pub curvature_integral: f64,
    pub perimeter: f64,
    pub slack: f64,
    pub quadrature_cells: usize,
    pub skipped_cells: usize,
}

pub fn length_bound_check(u: &ScalarField, center: [f64; 2], radius: f64, s: f64) -> Result<LengthBound> {
    let node_jets = jets(u);
    let curves = extract_level_with(u, &node_jets, s);
    let inside = in_disk(center, radius);
    for c in &curves {
        for (v, g) in c.vertices.iter().zip(&c.grad_norm) {
            if inside(v[0], v[1]) && g.is_some_and(|g| g < SINGULAR_GRADIENT) {
                return Err(Error::Precondition(format!(
                    "level {s} passes a critical point near ({}, {})",
                    v[0], v[1]
                )));
            }
        }
    }
    let lengths: Vec<f64> =
        curves.iter().flat_map(|c| c.segments().map(|(a, b)| clipped_length(a, b, center, radius))).collect();
    let length = tree_sum(&lengths);
    let q = cell_quadrature(&[&node_jets], inside, |j| curvature_at(&j[0], 2.0, CurvatureMode::Divergence).map(f64::abs));
    let perimeter = TAU * radius;
    Ok(LengthBound {
        level: s,
        center,
        radius,
        length_in_ball: length,
        curvature_integral: q.value,
        perimeter,
        slack: q.value + perimeter - length,
        quadrature_cells: q.cells,
        skipped_cells: q.skipped,
    })
}

/// Both sides of `−∫_{G∩{u<s}} k = L_G(s) + ∫_{∂G∩{u<s}} ⟨∇u/|∇u|, ν⟩`
/// for a disk `G`.
#[derive(Clone, Debug, Serialize)]
pub struct PartsReport {
    pub curvature_integral: f64,
    pub length_in_disk: f64,
    pub boundary_flux: f64,
    pub gap: f64,
}

pub fn integration_by_parts(u: &ScalarField, center: [f64; 2], radius: f64, s: f64, circle_samples: usize) -> Result<PartsReport> {
    let node_jets = jets(u);
    let inside = in_disk(center, radius);
    let q = cell_quadrature(&[&node_jets], &inside, |j| {
        if j[0].u < s {
            curvature_at(&j[0], 2.0, CurvatureMode::Divergence).map(|k| -k)
        } else {
            Some(0.0)
        }
    });
    let curves = extract_level_with(u, &node_jets, s);
    let lengths: Vec<f64> =
        curves.iter().flat_map(|c| c.segments().map(|(a, b)| clipped_length(a, b, center, radius))).collect();
    let length = tree_sum(&lengths);
    let ds = TAU * radius / circle_samples as f64;
    let flux: Vec<f64> = (0..circle_samples)
        .map(|n| {
            let t = TAU * (n as f64 + 0.5) / circle_samples as f64;
            let nu = [t.cos(), t.sin()];
            let (x, y) = (center[0] + radius * nu[0], center[1] + radius * nu[1]);
            let j = jet_at_point(&node_jets, x, y)
                .ok_or_else(|| Error::Precondition(format!("circle leaves the jet domain at ({x}, {y})")))?;
            if j.u >= s {
                return Ok(0.0);
            }
            let g = j.grad_norm();
            if g < SINGULAR_GRADIENT {
                return Err(Error::Precondition(format!("critical point on the circle at ({x}, {y})")));
            }
            Ok((j.ux * nu[0] + j.uy * nu[1]) / g * ds)
        })
        .collect::<Result<_>>()?;
    let flux = tree_sum(&flux);
    Ok(PartsReport { curvature_integral: q.value, length_in_disk: length, boundary_flux: flux, gap: q.value - length - flux })
}

/// One level of the length function. `*_int` are line integrals along the
/// extracted curves, `*_fd` are centered differences of `L`.
#[derive(Clone, Debug, Serialize)]
pub struct LengthSample {
    pub s: f64,
    pub curves: usize,
    pub length: f64,
    pub d1_int: f64,
    pub d1_fd: f64,
    pub d2_int: f64,
    pub d2_fd: f64,
    pub map: Option<MapTerms>,
}

/// Line integrals that need the second component of a map.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MapTerms {
    /// `−∫ ((p−2)(X₁P + X₂Q) + P)/|∇u¹|²`.
    pub d1_vec: f64,
    /// `∫ (A + B + C)/|∇u¹|⁴`.
    pub d2_abc: f64,
    /// `∫ E/|∇u¹|⁴` with `E = (p−2)²((X₂Q + X₁P)² − X₁²P²)`.
    pub e_term: f64,
    /// `∫ |∇|∇u¹||²/|∇u¹|⁴`.
    pub grad_term: f64,
    /// `∫ |∇|∇u²|²|²/|∇u¹|⁶`.
    pub cross_term: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LengthFunction {
    pub p: f64,
    pub fd_step: f64,
    pub samples: Vec<LengthSample>,
    /// Levels dropped, with the reason.
    pub rejected: Vec<(f64, String)>,
}

impl LengthFunction {
    /// CSV with one row per accepted level; map columns empty when absent.
    pub fn to_csv(&self) -> String {
        use crate::field::io::fmt_f64;
        use std::fmt::Write as _;
        let mut out = String::from(
            "s,L,dL_line,dL_fd,d2L_line,d2L_fd,dL_map,d2L_abc,E_term,grad_term,cross_term\n",
        );
        for r in &self.samples {
            let m = r.map.map_or_else(
                || ",,,,".to_string(),
                |m| {
                    [m.d1_vec, m.d2_abc, m.e_term, m.grad_term, m.cross_term].map(fmt_f64).join(",")
                },
            );
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{m}",
                fmt_f64(r.s),
                fmt_f64(r.length),
                fmt_f64(r.d1_int),
                fmt_f64(r.d1_fd),
                fmt_f64(r.d2_int),
                fmt_f64(r.d2_fd)
            );
        }
        out
    }
}

fn total_length(curves: &[LevelCurve]) -> f64 {
    tree_sum(&curves.iter().map(|c| c.length).collect::<Vec<_>>())
}

struct Sums {
    d1: f64,
    d2: f64,
    map: Option<MapTerms>,
}

fn line_integrals(
    curves: &[LevelCurve],
    j1: &Masked<Jet2>,
    j2: Option<&Masked<Jet2>>,
    p: f64,
) -> std::result::Result<Sums, String> {
    let mut acc: [Vec<f64>; 7] = Default::default();
    for c in curves {
        let w = c.weights();
        for (n, st) in c.stations.iter().enumerate() {
            let at = c.vertices[n];
            let a = st.lerp(j1).ok_or_else(|| format!("no derivatives near ({}, {})", at[0], at[1]))?;
            let g = a.grad_norm();
            if g < SINGULAR_GRADIENT {
                return Err(format!("critical point near ({}, {})", at[0], at[1]));
            }
            let g2 = g * g;
            let pn = normal_growth(&a);
            let cc = grad_of_grad_norm2(&a);
            acc[0].push(w[n] * (a.laplacian() - pn) / g2);
            acc[1].push(w[n] * (-a.laplacian() * pn + cc) / (g2 * g2));
            if let Some(j2) = j2 {
                let b = st.lerp(j2).ok_or_else(|| format!("no derivatives near ({}, {})", at[0], at[1]))?;
                let du2 = g2 + b.grad_norm2();
                let x1 = g2 / du2;
                let h2 = b.hess_grad();
                let x2q = (a.ux * h2[0] + a.uy * h2[1]) / du2;
                let q = p - 2.0;
                acc[2].push(-w[n] * (q * (x1 * pn + x2q) + pn) / g2);
                let abc = q * x1 * pn * pn + q * x2q * pn + cc;
                acc[3].push(w[n] * abc / (g2 * g2));
                let e = q * q * ((x2q + x1 * pn).powi(2) - (x1 * pn).powi(2));
                acc[4].push(w[n] * e / (g2 * g2));
                acc[5].push(w[n] * cc / (g2 * g2));
                acc[6].push(w[n] * 4.0 * (h2[0] * h2[0] + h2[1] * h2[1]) / (g2 * g2 * g2));
            }
        }
    }
    let t: Vec<f64> = acc.iter().map(|v| tree_sum(v)).collect();
    Ok(Sums {
        d1: t[0],
        d2: t[1],
        map: j2.map(|_| MapTerms { d1_vec: t[2], d2_abc: t[3], e_term: t[4], grad_term: t[5], cross_term: t[6] }),
    })
}

/// `L(s)` and its first two derivatives at each requested level.
///
/// With `map`, `u` must be its first component and the vectorial forms
/// are evaluated too. Differences use the five-point stencils with step
/// `fd_step`, so levels within `2·fd_step` of the range of `u` or of a
/// critical value are rejected.
pub fn length_function(
    u: &ScalarField,
    p: f64,
    samples: &[f64],
    fd_step: f64,
    map: Option<&PlanarMap>,
) -> Result<LengthFunction> {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::InvalidOption { name: "fd_step", reason: format!("{fd_step} must be positive") });
    }
    if let Some(m) = map {
        if !m.u1.same_grid(u) {
            return Err(Error::GridMismatch);
        }
    }
    let j1 = jets(u);
    let j2 = map.map(|m| jets(&m.u2));
    let rows: Vec<std::result::Result<LengthSample, (f64, String)>> = samples
        .par_iter()
        .map(|&s| {
            let levels = [-2.0, -1.0, 0.0, 1.0, 2.0].map(|m| {
                let c = extract_level_with(u, &j1, s + m * fd_step);
                let l = total_length(&c);
                (c, l)
            });
            if levels.iter().any(|(c, _)| c.is_empty()) {
                return Err((s, "level set empty at a difference node".to_string()));
            }
            let l = levels.each_ref().map(|(_, l)| *l);
            let curves = &levels[2].0;
            let sums = line_integrals(curves, &j1, j2.as_ref(), p).map_err(|e| (s, e))?;
            Ok(LengthSample {
                s,
                curves: curves.len(),
                length: l[2],
                d1_int: sums.d1,
                d1_fd: (-l[4] + 8.0 * l[3] - 8.0 * l[1] + l[0]) / (12.0 * fd_step),
                d2_int: sums.d2,
                d2_fd: (-l[4] + 16.0 * l[3] - 30.0 * l[2] + 16.0 * l[1] - l[0]) / (12.0 * fd_step * fd_step),
                map: sums.map,
            })
        })
        .collect();
    let mut out = LengthFunction { p, fd_step, samples: Vec::new(), rejected: Vec::new() };
    for r in rows {
        match r {
            Ok(s) => out.samples.push(s),
            Err(e) => out.rejected.push(e),
        }
    }
    Ok(out)
}

/// Total polyline length of `{u = s}`.
pub fn level_length(u: &ScalarField, s: f64) -> f64 {
    total_length(&super::extract_level(u, s))
}
