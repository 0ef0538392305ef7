//! Concavity-type inequalities for the length of level curves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{keep_worst, CheckKind, CheckOptions, CheckResult, Subject, Verdict, Witness};
use crate::error::Result;
use crate::field::{jets, Jet2, PlanarMap, Shape};
use crate::geometry::{cell_quadrature, length_function, LengthSample};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsoOptions {
    pub levels: Vec<f64>,
    pub fd_step: f64,
    /// Smallest admissible `|∇u¹|` on the domain.
    pub gradient_floor: f64,
    /// Assert the equality case `(L′)²/L = (p−1)L″`, valid when both
    /// components coincide with one radial function.
    pub equality_case: bool,
    /// Ball `B_R` for the reported ratio `sup_{B_R}|Du|·R^{2/p}/‖Du‖_{L^p(B_2R)}`.
    pub ratio_ball: Option<([f64; 2], f64)>,
}

impl Default for IsoOptions {
    fn default() -> Self {
        Self { levels: Vec::new(), fd_step: 0.02, gradient_floor: 1e-6, equality_case: false, ratio_ball: None }
    }
}

const LOG_CONVEXITY_TOL: f64 = 1e-3;
const EQUALITY_TOL: f64 = 1e-2;

/// Coefficients of the two gradient integrals on the right-hand side.
pub fn iso_weights(p: f64) -> (f64, f64) {
    let q = 2.25 * (p - 2.0).powi(2);
    (q + 1.0 - p, q)
}

fn level_witness(s: &LengthSample, margin: f64) -> Witness {
    Witness { location: None, level: Some(s.s), margin, values: BTreeMap::new() }
        .with("L", s.length)
        .with("dL_line", s.d1_int)
        .with("d2L_line", s.d2_int)
        .with("dL_fd", s.d1_fd)
        .with("d2L_fd", s.d2_fd)
}

/// For p = 2, `(ln L)″ ≥ 0`. Otherwise
/// `(p/(p−1)·L^{(p−1)/p})″ ≥ −L^{−1/p}(α/p·∫|∇|∇u¹||²/|∇u¹|⁴ + β/p·∫|∇|∇u²|²|²/|∇u¹|⁶)`
/// with `α = 9/4(p−2)² + 1 − p`, `β = 9/4(p−2)²`, both sides from line
/// integrals along the extracted level curves.
pub fn check_isoperimetric(subject: Subject, iso: &IsoOptions, opts: &CheckOptions) -> Result<CheckResult> {
    subject.require_converged()?;
    let u = subject.map;
    let p = u.p.get();
    let grid = u.grid();
    let mut out = CheckResult::new(CheckKind::Isoperimetric, 0.0);

    // Boundary nodes of a masked domain sit up to one cell off the true
    // curve, so constancy is judged against h·max|∇u¹|.
    let j1 = jets(&u.u1);
    let scale = u.u1.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let steepest = j1.defined().fold(0.0f64, |m, (_, j)| m.max(j.grad_norm()));
    let staircase = if grid.shape() == Shape::Rectangle { 0.0 } else { 2.0 * grid.hx().max(grid.hy()) * steepest };
    let const_tol = opts.tolerance_scale * (1e-8 * (1.0 + scale) + staircase);
    out.detail("boundary_constancy_tolerance", const_tol);
    for (n, comp) in grid.boundary_components().iter().enumerate() {
        let vals = comp.iter().map(|&k| *u.u1.at(k));
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        out.detail(&format!("boundary_{n}_spread"), hi - lo);
        if hi - lo > const_tol {
            let w = super::Witness::at(grid, comp[0], const_tol - (hi - lo)).with("spread", hi - lo);
            return Ok(out.inconclusive(format!("u1 is not constant on boundary component {n}"), Some(w)));
        }
    }

    let mut floor: Option<Witness> = None;
    for (k, j) in j1.defined() {
        keep_worst(&mut floor, Witness::at(grid, k, j.grad_norm()));
    }
    let Some(floor) = floor else {
        return Ok(out.inconclusive("no node carries derivatives".into(), None));
    };
    out.detail("min_grad_u1", floor.margin);
    if floor.margin <= iso.gradient_floor {
        return Ok(out.inconclusive("gradient of u1 falls below the floor".into(), Some(floor)));
    }

    if let Some((center, radius)) = iso.ratio_ball {
        out.detail("uhlenbeck_ratio", uhlenbeck_ratio(u, center, radius));
    }

    let lf = length_function(&u.u1, p, &iso.levels, iso.fd_step, Some(u))?;
    out.detail("levels", iso.levels.len() as f64);
    out.detail("rejected_levels", lf.rejected.len() as f64);
    if lf.samples.is_empty() {
        let note = lf.rejected.first().map_or("no levels requested".to_string(), |(s, why)| format!("level {s}: {why}"));
        return Ok(out.inconclusive(note, None));
    }

    let mut worst: Option<Witness> = None;
    let mut tol: f64 = 0.0;
    if p == 2.0 {
        tol = opts.tolerance_scale * LOG_CONVEXITY_TOL;
        let mut max_abs: f64 = 0.0;
        for s in &lf.samples {
            let v = s.d2_int / s.length - (s.d1_int / s.length).powi(2);
            max_abs = max_abs.max(v.abs());
            keep_worst(&mut worst, level_witness(s, v).with("log_second_derivative", v));
        }
        out.detail("max_abs_log_second_derivative", max_abs);
    } else {
        let (alpha, beta) = iso_weights(p);
        out.detail("alpha", alpha);
        out.detail("beta", beta);
        let mut max_equality_gap: f64 = 0.0;
        let mut max_abc_gap: f64 = 0.0;
        for s in &lf.samples {
            let m = s.map.expect("map terms requested");
            let l = s.length;
            let (d1, d2) = (m.d1_vec, m.d2_abc);
            let lhs = -(1.0 / p) * l.powf(-1.0 - 1.0 / p) * (d1 * d1 - p * l * d2);
            let rhs = -l.powf(-1.0 / p) * (alpha / p * m.grad_term + beta / p * m.cross_term);
            tol = tol.max(opts.tolerance_scale * 1e-9 * (lhs.abs() + rhs.abs()));
            max_abc_gap = max_abc_gap.max((d2 - s.d2_int).abs() / s.d2_int.abs().max(f64::MIN_POSITIVE));
            let mut w = level_witness(s, lhs - rhs)
                .with("lhs", lhs)
                .with("rhs", rhs)
                .with("dL_map", d1)
                .with("d2L_abc", d2)
                .with("grad_term", m.grad_term)
                .with("cross_term", m.cross_term);
            if iso.equality_case {
                let gap = (d1 * d1 / l - (p - 1.0) * d2).abs() / ((p - 1.0) * d2).abs();
                max_equality_gap = max_equality_gap.max(gap);
                w = w.with("equality_gap", gap);
            }
            keep_worst(&mut worst, w);
        }
        out.detail("max_rel_gap_abc_vs_line", max_abc_gap);
        if iso.equality_case {
            out.detail("max_equality_gap", max_equality_gap);
            if max_equality_gap > opts.tolerance_scale * EQUALITY_TOL {
                out.tolerance = tol;
                out.verdict = Verdict::Violated;
                out.note = Some("equality (L')^2/L = (p-1)L'' fails".into());
                out.witness = worst;
                return Ok(out);
            }
        }
    }
    out.tolerance = tol;
    Ok(out.settle(worst))
}

/// `sup_{B_R}|Du|·R^{2/p} / ‖Du‖_{L^p(B_{2R})}` by node maximum and cell
/// quadrature. Reported only; the constant it should stay under is unknown.
pub fn uhlenbeck_ratio(u: &PlanarMap, center: [f64; 2], radius: f64) -> f64 {
    let p = u.p.get();
    let grid = u.grid();
    let (j1, j2) = (jets(&u.u1), jets(&u.u2));
    let du = |a: &Jet2, b: &Jet2| (a.grad_norm2() + b.grad_norm2()).sqrt();
    let sup = j1
        .defined()
        .filter(|&(k, _)| {
            let (x, y) = grid.xy(k);
            (x - center[0]).hypot(y - center[1]) < radius
        })
        .filter_map(|(k, a)| j2.at(k).map(|b| du(&a, &b)))
        .fold(0.0, f64::max);
    let norm = cell_quadrature(
        &[&j1, &j2],
        |x, y| (x - center[0]).hypot(y - center[1]) < 2.0 * radius,
        |j| Some(du(&j[0], &j[1]).powf(p)),
    )
    .value
    .powf(1.0 / p);
    sup * radius.powf(2.0 / p) / norm
}
