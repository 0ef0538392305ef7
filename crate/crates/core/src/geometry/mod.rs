//! Hessian determinants, level-curve curvature `k`, steepest-descent
//! curvature `h`, their complex combination `φ = k + ih`, level curves
//! and the length function `L(s)`.

mod contour;
mod length;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cgrad::{lemma_constant, Coeffs, GradientPair};
use crate::error::{Error, Result};
use crate::field::{gradient, jets, wirtinger, ComplexJet, Field, Jet2, Masked, ScalarField};
use crate::parallel::max_of;
use crate::solver::SINGULAR_GRADIENT;

pub use contour::{curves_csv, curves_svg, extract_level, LevelCurve, Station};
pub use length::{
    cell_quadrature, integration_by_parts, jet_at_point, length_bound_check, length_function, level_length,
    LengthBound, LengthFunction, LengthSample, MapTerms, PartsReport, Quadrature,
};

/// `u_xx u_yy − u_xy²` at interior nodes. The complex form
/// `4(|f_z̄|² − |f_z|²)` is evaluated alongside and must agree to round-off.
pub fn det_hessian(u: &ScalarField) -> Result<Masked<f64>> {
    let j = jets(u);
    let mut worst = 0.0f64;
    for (_, jet) in j.defined() {
        let real = jet.det_hessian();
        let cx = jet.complex().det_hessian();
        let scale = jet.uxx.abs() * jet.uyy.abs() + jet.uxy * jet.uxy + jet.laplacian().powi(2);
        worst = worst.max((real - cx).abs() / scale.max(f64::MIN_POSITIVE));
    }
    if worst > 1e-12 {
        return Err(Error::Inconsistent(format!("Hessian determinant forms differ by {worst:e} relative")));
    }
    Ok(j.map(|_, v| v.map(|v| v.det_hessian())))
}

/// Gauss curvature of the graph, `det H(u)/(1 + |∇u|²)²`.
pub fn gauss_curvature(u: &ScalarField) -> Masked<f64> {
    jets(u).map(|_, j| j.map(|j| j.det_hessian() / (1.0 + j.grad_norm2()).powi(2)))
}

/// Equivalent expressions for the level-curve curvature `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureMode {
    /// `−(u_y²u_xx − 2u_x u_y u_xy + u_x²u_yy)/|∇u|³ = −div(∇u/|∇u|)`.
    Divergence,
    /// `−Δu/|∇u| + ⟨∇|∇u|, ∇u/|∇u|⟩/|∇u|`.
    GradientNorm,
    /// `−(p−1)/(p−2)·Δu/|∇u| + Δ_p u/((p−2)|∇u|^{p−1})`; needs p ≠ 2.
    PLaplacian,
    /// `2|f|k = −2f_z̄ + f/f̄·conj(f_z) + f̄/f·f_z`.
    Complex,
    /// `2|f|k = −2(ln|f|²)_z f̄ + f/f̄·conj(f_z) + 3f̄/f·f_z`.
    ComplexLog,
    /// `−(p−1)/(p−2)·Δu/|∇u|`, valid only where `Δ_p u = 0`.
    PHarmonic,
}

impl CurvatureMode {
    pub const ALL: [CurvatureMode; 6] = [
        CurvatureMode::Divergence,
        CurvatureMode::GradientNorm,
        CurvatureMode::PLaplacian,
        CurvatureMode::Complex,
        CurvatureMode::ComplexLog,
        CurvatureMode::PHarmonic,
    ];

    pub fn needs_p_not_two(self) -> bool {
        matches!(self, CurvatureMode::PLaplacian | CurvatureMode::PHarmonic)
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `⟨∇|∇u|, ∇u/|∇u|⟩ = ⟨∇u, H∇u⟩/|∇u|²`.
pub fn normal_growth(j: &Jet2) -> f64 {
    dot([j.ux, j.uy], j.hess_grad()) / j.grad_norm2()
}

/// `|∇|∇u||² = |H∇u|²/|∇u|²`.
pub fn grad_of_grad_norm2(j: &Jet2) -> f64 {
    let h = j.hess_grad();
    dot(h, h) / j.grad_norm2()
}

/// `k` from one jet, `None` where `|∇u|` is below the singular threshold.
pub fn curvature_at(j: &Jet2, p: f64, mode: CurvatureMode) -> Option<f64> {
    let g = j.grad_norm();
    if g < SINGULAR_GRADIENT {
        return None;
    }
    let k = match mode {
        CurvatureMode::Divergence => {
            -(j.uy * j.uy * j.uxx - 2.0 * j.ux * j.uy * j.uxy + j.ux * j.ux * j.uyy) / (g * g * g)
        }
        CurvatureMode::GradientNorm => -j.laplacian() / g + normal_growth(j) / g,
        CurvatureMode::PLaplacian => {
            let g2 = g * g;
            let lp = g.powf(p - 2.0) * j.laplacian() + (p - 2.0) * g.powf(p - 4.0) * dot([j.ux, j.uy], j.hess_grad());
            -(p - 1.0) / (p - 2.0) * j.laplacian() / g + lp / ((p - 2.0) * g2.powf(0.5 * (p - 1.0)))
        }
        CurvatureMode::Complex => {
            let c = j.complex();
            let u = c.f / c.f.conj();
            let two_fk = -2.0 * c.fzb + u * c.fz.conj() + u.conj() * c.fz;
            two_fk.re / (2.0 * c.f.norm())
        }
        CurvatureMode::ComplexLog => {
            let c = j.complex();
            let u = c.f / c.f.conj();
            // (ln|f|²)_z = f_z/f + (f̄)_z/f̄ with (f̄)_z = conj(f_z̄).
            let log_z = c.fz / c.f + c.fzb.conj() / c.f.conj();
            let two_fk = -2.0 * log_z * c.f.conj() + u * c.fz.conj() + 3.0 * u.conj() * c.fz;
            two_fk.re / (2.0 * c.f.norm())
        }
        CurvatureMode::PHarmonic => -(p - 1.0) / (p - 2.0) * j.laplacian() / g,
    };
    Some(k)
}

/// Size of the individual terms of `k`, used to judge agreement between
/// modes where `k` itself nearly cancels.
pub fn curvature_scale(j: &Jet2) -> f64 {
    let g = j.grad_norm();
    (j.uy * j.uy * j.uxx.abs() + 2.0 * (j.ux * j.uy * j.uxy).abs() + j.ux * j.ux * j.uyy.abs()) / (g * g * g)
}

/// Level-curve curvature per interior node.
pub fn curvature_k(u: &ScalarField, p: f64, mode: CurvatureMode) -> Result<Masked<f64>> {
    if mode.needs_p_not_two() && p == 2.0 {
        return Err(Error::InvalidOption { name: "mode", reason: format!("{mode:?} needs p != 2") });
    }
    Ok(jets(u).map(|_, j| j.as_ref().and_then(|j| curvature_at(j, p, mode))))
}

/// Curvature of the steepest-descent lines,
/// `((u_xx − u_yy)u_x u_y − u_xy(u_x² − u_y²))/|∇u|³`.
pub fn curvature_h_at(j: &Jet2) -> Option<f64> {
    let g = j.grad_norm();
    if g < SINGULAR_GRADIENT {
        return None;
    }
    Some(((j.uxx - j.uyy) * j.ux * j.uy - j.uxy * (j.ux * j.ux - j.uy * j.uy)) / (g * g * g))
}

pub fn curvature_h(u: &ScalarField) -> Masked<f64> {
    jets(u).map(|_, j| j.as_ref().and_then(curvature_h_at))
}

/// `φ = −2∂_z(f̄/|f|) = (−f_z̄ + f̄/f·f_z)/|f|`. The factor ½ in `f` cancels.
pub fn phi_at(c: &ComplexJet) -> Option<C64> {
    let m = c.f.norm();
    if 2.0 * m < SINGULAR_GRADIENT {
        return None;
    }
    Some((-c.fzb + c.f.conj() / c.f * c.fz) / m)
}

pub fn phi(u: &ScalarField) -> Masked<C64> {
    jets(u).map(|_, j| j.as_ref().and_then(|j| phi_at(&j.complex())))
}

/// `φ` by central differences of the unit field `f̄/|f|`; agrees with
/// [`phi`] to stencil order. Nodes next to a critical point are masked.
pub fn phi_wirtinger(u: &ScalarField) -> Masked<C64> {
    let (ux, uy) = gradient(u);
    let unit: Masked<C64> = ux.map(|k, a| {
        let f = C64::new((*a)?, -(*uy.at(k))?);
        (f.norm() >= SINGULAR_GRADIENT).then(|| f.conj() / f.norm())
    });
    let grid = u.grid();
    let filled: Field<C64> = unit.map(|_, v| v.unwrap_or_default());
    let (dz, _) = wirtinger(&filled);
    dz.map(|k, d| {
        let near_singular = crate::field::NEIGHBORS8
            .iter()
            .chain(std::iter::once(&(0, 0)))
            .any(|&(di, dj)| grid.offset_in(k, di, dj).map_or(true, |m| unit.at(m).is_none()));
        if near_singular {
            None
        } else {
            d.map(|d| -2.0 * d)
        }
    })
}

/// Node-wise evaluation of `|φ_{u¹}||f| ≤ C(p)(|f_z| + |g_z|)` and of the
/// identity `φ_{u¹}|f| = (f̄/f − A₁₁)f_z − A₁₂g_z − conj(A₁₁ f_z) − conj(A₁₂ g_z)`,
/// with the mirror statements for `u²`.
#[derive(Clone, Debug, Serialize)]
pub struct PhiReport {
    pub p: f64,
    pub constant: f64,
    pub nodes: [usize; 2],
    /// Largest `|φ||F| − C(p)(|f_z| + |g_z|)` per component.
    pub max_excess: [f64; 2],
    /// Largest gap between `φ|F|` from the jets and the linearized right side.
    pub max_identity_gap: [f64; 2],
    /// Nodes where the second gradient vanished and the `g → 0` limit of
    /// the matrix was used for `u¹`.
    pub scalar_limit_nodes: usize,
    /// Largest gap between the linearized right side and the scalar
    /// formula `f̄/f·f_z + (p−2)/(2p)(f̄/f·f_z + f/f̄·conj(f_z))` at those nodes.
    pub scalar_reduction_gap: f64,
}

pub fn phi_identity_check(pair: &GradientPair) -> PhiReport {
    let p = pair.p;
    let cp = lemma_constant(p);
    let thr = 0.5 * SINGULAR_GRADIENT;
    let mut excess = [f64::NEG_INFINITY; 2];
    let mut gap = [0.0f64; 2];
    let mut nodes = [0usize; 2];
    let mut scalar_nodes = 0;
    let mut scalar_gap = 0.0f64;
    for (_, a, b) in pair.both() {
        let rhs_sum = a.fz.norm() + b.fz.norm();
        let coeffs = Coeffs::new(a.f, b.f, p, thr);
        for (i, (own, other)) in [(a, b), (b, a)].into_iter().enumerate() {
            let Some(phi) = phi_at(&own) else { continue };
            let lhs = phi * own.f.norm();
            let row = match (&coeffs, i) {
                (Some(c), _) => Some([c.a[i][i], c.a[i][1 - i]]),
                (None, 0) if b.f.norm() <= thr => {
                    // g → 0: A₁₁ → (2−p)/(2p)·f̄/f, A₁₂ → 0.
                    Some([(2.0 - p) / (2.0 * p) * a.f.conj() / a.f, C64::new(0.0, 0.0)])
                }
                _ => None,
            };
            nodes[i] += 1;
            excess[i] = excess[i].max(lhs.norm() - cp * rhs_sum);
            let Some([own_a, cross_a]) = row else { continue };
            let unit = own.f.conj() / own.f;
            let lin = (unit - own_a) * own.fz - cross_a * other.fz - (own_a * own.fz).conj() - (cross_a * other.fz).conj();
            gap[i] = gap[i].max((lhs - lin).norm());
            if coeffs.is_none() {
                scalar_nodes += 1;
                let lindqvist = unit * own.fz + (p - 2.0) / (2.0 * p) * (unit * own.fz + unit.conj() * own.fz.conj());
                scalar_gap = scalar_gap.max((lin - lindqvist).norm());
            }
        }
    }
    PhiReport {
        p,
        constant: cp,
        nodes,
        max_excess: excess,
        max_identity_gap: gap,
        scalar_limit_nodes: scalar_nodes,
        scalar_reduction_gap: scalar_gap,
    }
}

/// Largest relative disagreement between curvature modes over nodes with
/// `|∇u| > min_grad`, measured against [`curvature_scale`].
pub fn mode_disagreement(u: &ScalarField, p: f64, modes: &[CurvatureMode], min_grad: f64) -> f64 {
    let j = jets(u);
    max_of(j.defined().filter(|(_, j)| j.grad_norm() > min_grad).map(|(_, j)| {
        let ks: Vec<f64> = modes.iter().filter_map(|&m| curvature_at(&j, p, m)).collect();
        let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / curvature_scale(&j).max(f64::MIN_POSITIVE)
    }))
    .max(0.0)
}
