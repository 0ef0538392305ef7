//! Pass/fail checks of structural properties on solved or constructed maps.
//!
//! Every check returns a [`CheckResult`] whose witness is the worst node or
//! level found. Tolerances come from refinement estimates (`h` against
//! `2h` stencils) and the solver's gradient tolerance, times a user scale.

mod iso;

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::cgrad::{entry_bound, lemma_constant};
use crate::error::{Error, Result};
use crate::field::{jets, jets_stride, ComplexJet, Grid2D, Jet2, Masked, NodeKind, PlanarMap};
use crate::geometry::{cell_quadrature, curvature_at, length_bound_check, CurvatureMode};
use crate::solver::{SolveReport, SINGULAR_GRADIENT};

pub use iso::{check_isoperimetric, IsoOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    HessianSign,
    MaxPrinciple,
    Isoperimetric,
    CurvatureIntegrability,
    ComplexBounds,
    LengthBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

/// Worst node or level seen by a check. `margin < 0` means the inequality
/// failed there by that much.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    pub margin: f64,
    pub values: BTreeMap<String, f64>,
}

impl Witness {
    fn at(grid: &Grid2D, k: usize, margin: f64) -> Self {
        let (x, y) = grid.xy(k);
        Self { location: Some([x, y]), level: None, margin, values: BTreeMap::new() }
    }

    fn with(mut self, name: &str, v: f64) -> Self {
        self.values.insert(name.to_string(), v);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: CheckKind,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub witness: Option<Witness>,
    /// Summary numbers, keyed by name.
    pub details: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    fn new(check: CheckKind, tolerance: f64) -> Self {
        Self { check, verdict: Verdict::Holds, tolerance, witness: None, details: BTreeMap::new(), note: None }
    }

    fn detail(&mut self, name: &str, v: f64) {
        self.details.insert(name.to_string(), v);
    }

    fn inconclusive(mut self, note: String, witness: Option<Witness>) -> Self {
        self.verdict = Verdict::Inconclusive;
        self.note = Some(note);
        self.witness = witness;
        self
    }

    /// Set the verdict from the worst margin and keep its witness.
    fn settle(mut self, worst: Option<Witness>) -> Self {
        if let Some(w) = &worst {
            if w.margin < -self.tolerance {
                self.verdict = Verdict::Violated;
            }
        }
        self.witness = worst;
        self
    }
}

/// A map plus, when it came from the solver, its report.
#[derive(Clone, Copy, Debug)]
pub struct Subject<'a> {
    pub map: &'a PlanarMap,
    pub report: Option<&'a SolveReport>,
}

impl<'a> Subject<'a> {
    pub fn solved(map: &'a PlanarMap, report: &'a SolveReport) -> Self {
        Self { map, report: Some(report) }
    }

    pub fn constructed(map: &'a PlanarMap) -> Self {
        Self { map, report: None }
    }

    fn require_converged(&self) -> Result<()> {
        match self.report {
            Some(r) if !r.converged => Err(Error::NotConverged),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckOptions {
    pub tolerance_scale: f64,
    /// Gradient tolerance the input was solved to.
    pub grad_tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { tolerance_scale: 1.0, grad_tol: 1e-8 }
    }
}

fn keep_worst(worst: &mut Option<Witness>, w: Witness) {
    if worst.as_ref().map_or(true, |o| w.margin < o.margin) {
        *worst = Some(w);
    }
}

/// Largest `|q_h − q_2h|/3` over nodes where both are defined.
fn refinement_estimate<T: Copy>(
    fine: &Masked<T>,
    coarse: &Masked<T>,
    q: impl Fn(&T) -> f64,
) -> f64 {
    fine.defined()
        .filter_map(|(k, a)| coarse.at(k).map(|b| (q(&a) - q(&b)).abs() / 3.0))
        .fold(0.0, f64::max)
}

/// Whether `p` lies in the exponent range where the determinant sign result holds,
/// `[4/3, 2 + √2]`.
pub fn in_sign_range(p: f64) -> bool {
    (4.0 / 3.0..=2.0 + SQRT_2).contains(&p)
}

/// `4(16A²−1)(|f_z|² + (Δu²)²/16) − 16A² det H(u²)`, the upper bound on
/// `det H(u¹)` valid for p-harmonic maps.
pub fn determinant_bound(j1: &Jet2, j2: &Jet2, p: f64) -> f64 {
    let a2 = 16.0 * entry_bound(p).powi(2);
    let fz = j1.complex().fz;
    4.0 * (a2 - 1.0) * (fz.norm_sqr() + j2.laplacian().powi(2) / 16.0) - a2 * j2.det_hessian()
}

/// No node has both Hessian determinants positive, and `det H(uⁱ)` stays
/// under [`determinant_bound`] for both orderings of the components.
pub fn check_hessian_sign(subject: Subject, opts: &CheckOptions) -> Result<CheckResult> {
    subject.require_converged()?;
    let u = subject.map;
    let p = u.p.get();
    let grid = u.grid();
    let (j1, j2) = (jets(&u.u1), jets(&u.u2));
    let (w1, w2) = (jets_stride(&u.u1, 2), jets_stride(&u.u2, 2));
    let err_det = refinement_estimate(&j1, &w1, Jet2::det_hessian).max(refinement_estimate(&j2, &w2, Jet2::det_hessian));
    let tol = opts.tolerance_scale * (10.0 * err_det + 1e-10);

    let pairs = |a: &Masked<Jet2>, b: &Masked<Jet2>| -> Masked<(Jet2, Jet2)> { a.map(|k, x| (*x).zip(*b.at(k))) };
    let (fine, coarse) = (pairs(&j1, &j2), pairs(&w1, &w2));
    let bound_gap = |(a, b): &(Jet2, Jet2)| {
        (determinant_bound(a, b, p) - a.det_hessian()).min(determinant_bound(b, a, p) - b.det_hessian())
    };
    let err_bound = refinement_estimate(&fine, &coarse, bound_gap);
    let tol_bound = opts.tolerance_scale * (10.0 * err_bound + 1e-10);

    let mut sign: Option<Witness> = None;
    let mut bound: Option<Witness> = None;
    let mut both_positive = 0usize;
    for (k, (a, b)) in fine.defined() {
        let (d1, d2) = (a.det_hessian(), b.det_hessian());
        let margin = tol - d1.min(d2);
        if d1 > tol && d2 > tol {
            both_positive += 1;
        }
        keep_worst(&mut sign, Witness::at(grid, k, margin).with("det_hessian_u1", d1).with("det_hessian_u2", d2));
        let (b1, b2) = (determinant_bound(&a, &b, p), determinant_bound(&b, &a, p));
        keep_worst(
            &mut bound,
            Witness::at(grid, k, (b1 - d1).min(b2 - d2))
                .with("det_hessian_u1", d1)
                .with("bound_u1", b1)
                .with("det_hessian_u2", d2)
                .with("bound_u2", b2),
        );
    }
    let mut out = CheckResult::new(CheckKind::HessianSign, tol);
    out.detail("p", p);
    out.detail("in_sign_range", f64::from(u8::from(in_sign_range(p))));
    out.detail("stencil_error_det", err_det);
    out.detail("nodes_both_positive", both_positive as f64);
    out.detail("bound_tolerance", tol_bound);
    let bound_margin = bound.as_ref().map_or(0.0, |w| w.margin);
    out.detail("bound_margin", bound_margin);
    out.detail("sign_margin", sign.as_ref().map_or(0.0, |w| w.margin));
    if sign.is_none() {
        return Ok(out.inconclusive("no interior node carries both second-difference stencils".into(), None));
    }
    if bound_margin < -tol_bound {
        out.verdict = Verdict::Violated;
        out.note = Some("determinant bound fails".into());
        out.witness = bound;
        return Ok(out);
    }
    if both_positive > 0 {
        out.verdict = Verdict::Violated;
        out.note = Some(if in_sign_range(p) {
            "both determinants positive inside the sign exponent range".into()
        } else {
            "both determinants positive; p is outside the sign exponent range".into()
        });
    }
    out.witness = sign;
    Ok(out)
}

/// Interior extrema of each component lie within the boundary range.
pub fn check_max_principle(subject: Subject, opts: &CheckOptions) -> Result<CheckResult> {
    subject.require_converged()?;
    let u = subject.map;
    let grid = u.grid();
    let tol = opts.tolerance_scale * 10.0 * opts.grad_tol;
    let mut out = CheckResult::new(CheckKind::MaxPrinciple, tol);
    let mut worst: Option<Witness> = None;
    for (i, c) in u.components().into_iter().enumerate() {
        let on = |kind: NodeKind| (0..grid.len()).filter(move |&k| grid.kind(k) == kind);
        let bmax = on(NodeKind::Boundary).map(|k| *c.at(k)).fold(f64::NEG_INFINITY, f64::max);
        let bmin = on(NodeKind::Boundary).map(|k| *c.at(k)).fold(f64::INFINITY, f64::min);
        let name = ["u1", "u2"][i];
        out.detail(&format!("{name}_boundary_max"), bmax);
        out.detail(&format!("{name}_boundary_min"), bmin);
        for k in on(NodeKind::Interior) {
            let v = *c.at(k);
            let margin = (bmax - v).min(v - bmin);
            keep_worst(
                &mut worst,
                Witness::at(grid, k, margin).with("component", i as f64 + 1.0).with("value", v),
            );
        }
    }
    if worst.is_none() {
        return Ok(out.inconclusive("no interior nodes".into(), None));
    }
    Ok(out.settle(worst))
}

fn in_disk(center: [f64; 2], radius: f64) -> impl Fn(f64, f64) -> bool + Sync {
    move |x, y| (x - center[0]).hypot(y - center[1]) < radius
}

/// `∫_B |k_{u¹}| ≤ 2A(p)(∫_B |f_z|² + |g_z|²)^{1/2}(∫_B |f|^{−2})^{1/2}` by
/// cell-centre quadrature, with `A(p)` the curvature lemma constant.
pub fn check_kphi_integrability(subject: Subject, center: [f64; 2], radius: f64, opts: &CheckOptions) -> Result<CheckResult> {
    subject.require_converged()?;
    let u = subject.map;
    let p = u.p.get();
    let grid = u.grid();
    let (j1, j2) = (jets(&u.u1), jets(&u.u2));
    let inside = in_disk(center, radius);
    let mut out = CheckResult::new(CheckKind::CurvatureIntegrability, 0.0);

    let mut min_f: Option<Witness> = None;
    for (k, j) in j1.defined() {
        let (x, y) = grid.xy(k);
        if inside(x, y) {
            keep_worst(&mut min_f, Witness::at(grid, k, 0.5 * j.grad_norm()));
        }
    }
    let Some(min_f) = min_f else {
        return Ok(out.inconclusive("ball holds no node with derivatives".into(), None));
    };
    out.detail("min_abs_f", min_f.margin);
    if 2.0 * min_f.margin < 1e3 * SINGULAR_GRADIENT {
        return Ok(out.inconclusive("|f| is not bounded away from zero on the ball".into(), Some(min_f)));
    }

    let fields = [&j1, &j2];
    let cx = |j: &[Jet2]| -> (ComplexJet, ComplexJet) { (j[0].complex(), j[1].complex()) };
    let lhs = cell_quadrature(&fields, &inside, |j| curvature_at(&j[0], p, CurvatureMode::Divergence).map(f64::abs));
    let dz = cell_quadrature(&fields, &inside, |j| {
        let (a, b) = cx(j);
        Some(a.fz.norm_sqr() + b.fz.norm_sqr())
    });
    let inv = cell_quadrature(&fields, &inside, |j| Some(1.0 / cx(j).0.f.norm_sqr()));
    let a = lemma_constant(p);
    let rhs = 2.0 * a * dz.value.sqrt() * inv.value.sqrt();
    let tol = opts.tolerance_scale * 1e-9 * (1.0 + rhs);
    out.tolerance = tol;
    out.detail("lhs", lhs.value);
    out.detail("rhs", rhs);
    out.detail("lemma_constant", a);
    out.detail("cells", lhs.cells as f64);
    out.detail("skipped_cells", (lhs.skipped + dz.skipped + inv.skipped) as f64);
    let w = Witness { location: Some(center), level: None, margin: rhs - lhs.value, values: BTreeMap::new() }
        .with("radius", radius);
    Ok(out.settle(Some(w)))
}

/// Node-wise `|f_z̄| ≤ 2A(|f_z| + |g_z|)`, the same for `g`, and
/// `|f_z̄|² + |g_z̄|² ≤ 16A²(|f_z|² + |g_z|²)`.
pub fn check_complex_bounds(subject: Subject, opts: &CheckOptions) -> Result<CheckResult> {
    subject.require_converged()?;
    let u = subject.map;
    let p = u.p.get();
    let grid = u.grid();
    let a = entry_bound(p);
    let cj = |j: &Masked<Jet2>| j.map(|_, v| v.map(|v| v.complex()));
    let pair = |f: &Masked<ComplexJet>, g: &Masked<ComplexJet>| -> Masked<(ComplexJet, ComplexJet)> {
        f.map(|k, x| (*x).zip(*g.at(k)))
    };
    let fine = pair(&cj(&jets(&u.u1)), &cj(&jets(&u.u2)));
    let coarse = pair(&cj(&jets_stride(&u.u1, 2)), &cj(&jets_stride(&u.u2, 2)));
    let margins = |(f, g): &(ComplexJet, ComplexJet)| {
        let sum = f.fz.norm() + g.fz.norm();
        [
            2.0 * a * sum - f.fzb.norm(),
            2.0 * a * sum - g.fzb.norm(),
            16.0 * a * a * (f.fz.norm_sqr() + g.fz.norm_sqr()) - f.fzb.norm_sqr() - g.fzb.norm_sqr(),
        ]
    };
    let names = ["coefficient_u1", "coefficient_u2", "squared_sum"];
    let tols: [f64; 3] = [0, 1, 2].map(|i| {
        let est = refinement_estimate(&fine, &coarse, |v| margins(v)[i]);
        opts.tolerance_scale * (10.0 * est + opts.grad_tol)
    });
    // Margins are compared in units of their own tolerance.
    let mut out = CheckResult::new(CheckKind::ComplexBounds, 1.0);
    out.detail("entry_bound", a);
    let mut worst: Option<Witness> = None;
    let mut worst_each = [f64::INFINITY; 3];
    for (k, v) in fine.defined() {
        let m = margins(&v);
        for i in 0..3 {
            worst_each[i] = worst_each[i].min(m[i]);
            keep_worst(&mut worst, Witness::at(grid, k, m[i] / tols[i]).with("bound", i as f64).with(names[i], m[i]));
        }
    }
    for i in 0..3 {
        out.detail(&format!("{}_margin", names[i]), worst_each[i]);
        out.detail(&format!("{}_tolerance", names[i]), tols[i]);
    }
    if worst.is_none() {
        return Ok(out.inconclusive("no interior node carries both stencils".into(), None));
    }
    Ok(out.settle(worst))
}

/// `L_B(s) ≤ ∫_{Ω∩B} |k| + 2πR` at each level.
pub fn check_length_bound(
    subject: Subject,
    center: [f64; 2],
    radius: f64,
    levels: &[f64],
    opts: &CheckOptions,
) -> Result<CheckResult> {
    subject.require_converged()?;
    let mut out = CheckResult::new(CheckKind::LengthBound, opts.tolerance_scale * 1e-9);
    let mut worst: Option<Witness> = None;
    let mut rejected = 0;
    for &s in levels {
        match length_bound_check(&subject.map.u1, center, radius, s) {
            Ok(b) => keep_worst(
                &mut worst,
                Witness { location: Some(center), level: Some(s), margin: b.slack, values: BTreeMap::new() }
                    .with("length_in_ball", b.length_in_ball)
                    .with("curvature_integral", b.curvature_integral)
                    .with("perimeter", b.perimeter),
            ),
            Err(Error::Precondition(_)) => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    out.detail("levels", levels.len() as f64);
    out.detail("rejected_levels", rejected as f64);
    if worst.is_none() {
        return Ok(out.inconclusive("every level met a critical point".into(), None));
    }
    Ok(out.settle(worst))
}
