//! Radial maps on a thin sector for large `p` whose coordinate Hessians are
//! both non-negative.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{integrate_monitored, radial_ode_h2, RadialProfile};
use crate::error::{Error, Result};
use crate::field::{jets, jets_stride, make_grid, Extent, Grid2D, PlanarMap, Shape};
use crate::parallel::min_of;

/// `6 + 4√2`, the threshold above which admissible apertures exist.
pub const CRITICAL_P: f64 = 6.0 + 4.0 * std::f64::consts::SQRT_2;

/// Largest `c` with `4(1−p)c² − 4pc + p(p−4) ≥ 0`.
pub fn upper_admissible_c(p: f64) -> f64 {
    (-p + (p - 2.0).abs() * p.sqrt()) / (2.0 * (p - 1.0))
}

/// The interval `(1, c_high]` of admissible apertures, or `None` when empty.
pub fn admissible_c_interval(p: f64) -> Option<(f64, f64)> {
    (p > CRITICAL_P).then(|| (1.0, upper_admissible_c(p)))
}

fn quad_coeffs(p: f64, c: f64) -> [f64; 3] {
    [1.0 + c * (p - 1.0), p - 2.0, 1.0 + c]
}

/// Roots `t− ≤ t+` of `(1+c(p−1))t² + (p−2)t + 1 + c`.
pub fn t_interval(p: f64, c: f64) -> Option<(f64, f64)> {
    let [a, b, cc] = quad_coeffs(p, c);
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + disc.sqrt());
    let (r1, r2) = (q / a, cc / q);
    Some((r1.min(r2), r1.max(r2)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    pub p: f64,
    pub c: f64,
    pub t_minus: f64,
    pub t_plus: f64,
    pub t_star: f64,
    pub r_range: [f64; 2],
    pub h0: f64,
    pub dh0: f64,
    pub step: f64,
    /// Largest value of the quadratic in `t` seen along the profile.
    pub max_quadratic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub min_det_u1: f64,
    pub min_det_u2: f64,
    pub min_det_u1_closed_form: f64,
    pub min_det_u2_closed_form: f64,
    pub stencil_error: f64,
    pub tolerance: f64,
    pub nodes: usize,
    pub sign_conditions_hold: bool,
    /// Both determinants non-negative within tolerance.
    pub both_nonnegative: bool,
}

pub struct Counterexample {
    pub map: PlanarMap,
    pub grid: Arc<Grid2D>,
    pub spec: CounterexampleSpec,
    pub verdict: Verdict,
    pub profile: RadialProfile,
}

/// `det H(u¹)` and `det H(u²)` for `u = (Hx, Hy)` in closed form.
pub fn radial_dets(x: f64, y: f64, h1: f64, h2: f64) -> (f64, f64) {
    let r = x.hypot(y);
    let d1 = h1 * h2 * x * x / r + h1 * h1 * (2.0 * x * x - y * y) / (r * r);
    let d2 = h1 * h2 * y * y / r + h1 * h1 * (2.0 * y * y - x * x) / (r * r);
    (d1, d2)
}

const START_LENGTH: f64 = 0.1;
const FLOOR_LENGTH: f64 = 1e-3;

/// Build the sector map for aperture `c`, sample it on an `n×n` grid and
/// evaluate both Hessian determinants. `tolerance_scale` multiplies the
/// ten-times-stencil-error tolerance.
pub fn counterexample_map(p: f64, c: f64, n: usize, tolerance_scale: f64) -> Result<Counterexample> {
    let Some((_, c_high)) = admissible_c_interval(p) else {
        return Err(Error::Precondition(format!("p = {p} does not exceed 6+4*sqrt(2)")));
    };
    if !(c > 1.0 && c <= c_high) {
        return Err(Error::Precondition(format!("c = {c} outside admissible interval (1, {c_high}]")));
    }
    let (t_minus, t_plus) = t_interval(p, c).ok_or_else(|| Error::Precondition("quadratic has no real roots".into()))?;
    let t_star = 0.5 * (t_minus + t_plus);
    let [a, b, cc] = quad_coeffs(p, c);
    let r0 = 1.0;
    let (h0, dh0) = (1.0, (t_star - 1.0) / r0);

    let mut length = START_LENGTH;
    let (profile, max_quadratic, step) = loop {
        let step = (length / 2000.0).min(1e-5);
        let mut worst = f64::NEG_INFINITY;
        let run = integrate_monitored(p, r0, r0 + length, h0, dh0, step, |r, h, dh| {
            let t = (dh * r + h) / h;
            let q = (a * t + b) * t + cc;
            worst = worst.max(q);
            h > 0.0 && dh <= 0.0 && q <= 1e-10
        })?;
        if let Some(prof) = run {
            break (prof, worst, step);
        }
        length *= 0.5;
        if length < FLOOR_LENGTH {
            return Err(Error::Precondition("t left the admissible interval at every tried length".into()));
        }
    };
    let r1 = r0 + length;

    let theta_lo = (1.0 / c.sqrt()).atan();
    let quarter = std::f64::consts::FRAC_PI_4;
    let extent = Extent::new(r0 * quarter.cos(), r1 * theta_lo.cos(), r0 * theta_lo.sin(), r1 * quarter.sin());
    let grid = make_grid(extent, Shape::Sector { c, r_inner: r0, r_outer: r1 }, n, n)?;
    let map = profile.lift(&grid)?;

    let (j1, j2) = (jets(&map.u1), jets(&map.u2));
    let (w1, w2) = (jets_stride(&map.u1, 2), jets_stride(&map.u2, 2));
    let mut d1 = Vec::new();
    let mut d2 = Vec::new();
    let mut closed = Vec::new();
    let mut err: f64 = 0.0;
    let mut signs = true;
    for k in grid.interior_nodes() {
        let (Some(a1), Some(a2)) = (j1.at(k), j2.at(k)) else { continue };
        d1.push(a1.det_hessian());
        d2.push(a2.det_hessian());
        if let (Some(b1), Some(b2)) = (w1.at(k), w2.at(k)) {
            err = err.max((a1.det_hessian() - b1.det_hessian()).abs() / 3.0);
            err = err.max((a2.det_hessian() - b2.det_hessian()).abs() / 3.0);
        }
        let (x, y) = grid.xy(k);
        let r = x.hypot(y);
        let (h, dh) = profile.eval(r)?;
        let ddh = radial_ode_h2(r, h, dh, p)?;
        closed.push(radial_dets(x, y, dh, ddh));
        signs &= ddh * r + dh * (2.0 - x * x / (y * y)) <= 0.0 && ddh * r + dh * (2.0 - y * y / (x * x)) <= 0.0;
    }
    if d1.is_empty() {
        return Err(Error::EmptyInterior);
    }
    let tolerance = tolerance_scale * 10.0 * err;
    let min_det_u1 = min_of(d1.iter().copied());
    let min_det_u2 = min_of(d2.iter().copied());
    let verdict = Verdict {
        min_det_u1,
        min_det_u2,
        min_det_u1_closed_form: min_of(closed.iter().map(|d| d.0)),
        min_det_u2_closed_form: min_of(closed.iter().map(|d| d.1)),
        stencil_error: err,
        tolerance,
        nodes: d1.len(),
        sign_conditions_hold: signs,
        both_nonnegative: min_det_u1 >= -tolerance && min_det_u2 >= -tolerance,
    };
    let spec = CounterexampleSpec {
        p,
        c,
        t_minus,
        t_plus,
        t_star,
        r_range: [r0, r1],
        h0,
        dh0,
        step,
        max_quadratic,
    };
    Ok(Counterexample { map, grid, spec, verdict, profile })
}
