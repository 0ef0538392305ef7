use num_complex::Complex64;

use crate::field::{jets, Jet2, Masked, PlanarMap, ScalarField};

/// Gradient magnitude below which a node counts as singular.
pub const SINGULAR_GRADIENT: f64 = 1e-8;

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `|Du|^{p−2}Δuⁱ + (p−2)/2 |Du|^{p−4}⟨∇uⁱ, ∇|Du|²⟩` for both equations.
pub fn residual_divergence(u: &PlanarMap) -> (Masked<f64>, Masked<f64>) {
    let p = u.p.get();
    let (j1, j2) = (jets(&u.u1), jets(&u.u2));
    let both = j1.map(|k, a| a.zip(*j2.at(k)));
    let eq = |i: usize| {
        both.map(|_, pair| {
            let (a, b) = (*pair)?;
            let du2 = a.grad_norm2() + b.grad_norm2();
            if du2.sqrt() < SINGULAR_GRADIENT {
                return None;
            }
            let (ha, hb) = (a.hess_grad(), b.hess_grad());
            let grad_du2 = [2.0 * (ha[0] + hb[0]), 2.0 * (ha[1] + hb[1])];
            let c = if i == 0 { a } else { b };
            Some(du2.powf(0.5 * (p - 2.0)) * c.laplacian()
                + 0.5 * (p - 2.0) * du2.powf(0.5 * (p - 4.0)) * dot([c.ux, c.uy], grad_du2))
        })
    };
    (eq(0), eq(1))
}

fn p_laplacian_jet(j: &Jet2, p: f64) -> Option<f64> {
    let g2 = j.grad_norm2();
    if p < 4.0 && g2.sqrt() < SINGULAR_GRADIENT {
        return None;
    }
    let h = j.hess_grad();
    let inner = g2 * j.laplacian() + (p - 2.0) * dot([j.ux, j.uy], h);
    Some(if g2 == 0.0 { 0.0 } else { g2.powf(0.5 * (p - 4.0)) * inner })
}

/// `Δ_p v = |∇v|^{p−4}(|∇v|²Δv + (p−2)/2⟨∇v, ∇|∇v|²⟩)` at interior nodes.
pub fn scalar_p_laplacian(v: &ScalarField, p: f64) -> Masked<f64> {
    jets(v).map(|_, j| j.and_then(|j| p_laplacian_jet(&j, p)))
}

/// `Δ_p v` from the complex gradient:
/// `2^{p−2}|f|^{p−2}(2p f_z̄ + (p−2)(f/f̄·conj(f_z) + f̄/f·f_z))`.
pub fn scalar_p_laplacian_complex(v: &ScalarField, p: f64) -> Masked<f64> {
    jets(v).map(|_, j| {
        let c = j.as_ref()?.complex();
        let m = c.f.norm();
        if 2.0 * m < SINGULAR_GRADIENT {
            return None;
        }
        let ratio = c.f / c.f.conj();
        let inner: Complex64 = 2.0 * p * c.fzb + (p - 2.0) * (ratio * c.fz.conj() + ratio.conj() * c.fz);
        Some(2f64.powf(p - 2.0) * m.powf(p - 2.0) * inner.re)
    })
}

/// Left-hand sides of the pair
/// `|∇u¹|^{4−p}Δ_p u¹ + |∇u²|²Δu¹ + (p−2)/2⟨∇u¹, ∇|∇u²|²⟩ = 0` and its mirror.
/// Each equals `|Du|^{4−p}` times the divergence residual.
pub fn residual_gradrep(u: &PlanarMap) -> (Masked<f64>, Masked<f64>) {
    let p = u.p.get();
    let (j1, j2) = (jets(&u.u1), jets(&u.u2));
    let both = j1.map(|k, a| a.zip(*j2.at(k)));
    let eq = |i: usize| {
        both.map(|_, pair| {
            let (a, b) = (*pair)?;
            if a.grad_norm() < SINGULAR_GRADIENT || b.grad_norm() < SINGULAR_GRADIENT {
                return None;
            }
            let (me, other) = if i == 0 { (a, b) } else { (b, a) };
            let oh = other.hess_grad();
            let grad_other2 = [2.0 * oh[0], 2.0 * oh[1]];
            let lp = p_laplacian_jet(&me, p)?;
            Some(me.grad_norm().powf(4.0 - p) * lp
                + other.grad_norm2() * me.laplacian()
                + 0.5 * (p - 2.0) * dot([me.ux, me.uy], grad_other2))
        })
    };
    (eq(0), eq(1))
}
