//! Complex gradients of the coordinate functions, the coefficient matrix
//! `A(f, g)` that linearizes the system as
//! `[f, g]_z̄ = A [f, g]_z + conj(A) conj([f, g]_z)`, and quasiregularity
//! diagnostics.

mod qr;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{complex_jets, ComplexJet, Masked, PlanarMap};
use crate::parallel::max_of;
use crate::solver::SINGULAR_GRADIENT;

pub use qr::{beltrami_modulus, quasiregularity_report, QRFlag, QRReport};

/// Relative disagreement allowed between the raw and the solved form of
/// the complex system. They are algebraically identical.
pub const FORM_CONSISTENCY: f64 = 1e-9;

/// `|A_ij| ≤ A_p`, the entry bound of the coefficient matrix.
pub fn entry_bound(p: f64) -> f64 {
    if p < 2.0 {
        (2.0 - p) / (2.0 * p)
    } else if p <= 3.0 {
        (p - 2.0) / (2.0 * p)
    } else {
        (p - 2.0) * (p - 1.0) / (4.0 * p)
    }
}

/// The constant `A(p)` in `|f||k| ≤ A(p)(|f_z| + |g_z|)`.
pub fn lemma_constant(p: f64) -> f64 {
    if p < 2.0 {
        2.0 / p
    } else if p <= 3.0 {
        2.0 * (p - 1.0) / p
    } else {
        (p * p - p + 2.0) / (2.0 * p)
    }
}

/// Upper bound on `|g_z|/|f_z|` that makes `2A_p(1 + |g_z|/|f_z|) < 1`.
pub fn qr_ratio_threshold(p: f64) -> f64 {
    let a = entry_bound(p);
    if a == 0.0 {
        f64::INFINITY
    } else {
        (1.0 - 2.0 * a) / (2.0 * a)
    }
}

/// Same threshold as it is usually printed, `(1 − 2A_p)/A_p`. Kept for
/// reporting next to [`qr_ratio_threshold`].
pub fn qr_ratio_threshold_printed(p: f64) -> f64 {
    let a = entry_bound(p);
    if a == 0.0 {
        f64::INFINITY
    } else {
        (1.0 - 2.0 * a) / a
    }
}

/// The matrix `A(f, g)` at one point with its auxiliary scalars.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Coeffs {
    pub a: [[C64; 2]; 2],
    pub phi: f64,
    pub b: f64,
    pub c: f64,
    pub d: C64,
}

impl Coeffs {
    /// Evaluate at `(f, g)`; `None` when either modulus is at most
    /// `threshold`.
    pub fn new(f: C64, g: C64, p: f64, threshold: f64) -> Option<Self> {
        let (mf2, mg2) = (f.norm_sqr(), g.norm_sqr());
        if mf2.sqrt() <= threshold || mg2.sqrt() <= threshold {
            return None;
        }
        let uf = f.conj() / f;
        let ug = g.conj() / g;
        // w = (ḡ/g)(f/f̄) has modulus one, C = 2 + w + w̄ = |1 + w|².
        let w = ug * uf.conj();
        let c = (C64::new(1.0, 0.0) + w).norm_sqr();
        let d = ug + uf;
        let x = mg2 / mf2;
        let b = 2.0 * p + 4.0 / x;
        let q = 2.0 - p;
        // Same value as (2p + 4x)(2p + 4/x) − (2−p)²C without the cancellation.
        let phi = 16.0 * p + 8.0 * p * (x + 1.0 / x) + q * q * (C64::new(1.0, 0.0) - w).norm_sqr();
        let s = q / phi;
        let top = uf * b + d * q;
        let bottom = (phi + q * q * c) / b;
        let a = [
            [top * s, g.conj() / f.conj() * top * s],
            [(f.conj() / g * bottom + f.conj() / g.conj() * d * q) * s, (ug * bottom + d * q) * s],
        ];
        Some(Self { a, phi, b, c, d })
    }

    /// `Φ` exactly as printed, `(2p + 4|g|²/|f|²)(2p + 4|f|²/|g|²) − (2−p)²C`.
    pub fn phi_printed(f: C64, g: C64, p: f64) -> f64 {
        let x = g.norm_sqr() / f.norm_sqr();
        let c = (C64::new(1.0, 0.0) + g.conj() / g * f / f.conj()).norm_sqr();
        (2.0 * p + 4.0 * x) * (2.0 * p + 4.0 / x) - (2.0 - p).powi(2) * c
    }

    /// `16p + 8p(|f|²/|g|² + |g|²/|f|²)`, the lower bound for `|Φ|`.
    pub fn phi_lower_bound(f: C64, g: C64, p: f64) -> f64 {
        let x = g.norm_sqr() / f.norm_sqr();
        16.0 * p + 8.0 * p * (x + 1.0 / x)
    }

    pub fn max_entry(&self) -> f64 {
        self.a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Right-hand side `A F_z + conj(A) conj(F_z)` for `F = (f, g)`.
    pub fn apply(&self, fz: C64, gz: C64) -> [C64; 2] {
        [0, 1].map(|r| {
            let v = self.a[r][0] * fz + self.a[r][1] * gz;
            v + v.conj()
        })
    }
}

/// Complex jets of both coordinate functions.
#[derive(Clone, Debug)]
pub struct GradientPair {
    pub f: Masked<ComplexJet>,
    pub g: Masked<ComplexJet>,
    pub p: f64,
}

impl GradientPair {
    pub fn of(u: &PlanarMap) -> Self {
        Self { f: complex_jets(&u.u1), g: complex_jets(&u.u2), p: u.p.get() }
    }

    /// Nodes where both jets exist.
    pub fn both(&self) -> impl Iterator<Item = (usize, ComplexJet, ComplexJet)> + '_ {
        self.f.defined().filter_map(|(k, a)| self.g.at(k).map(|b| (k, a, b)))
    }
}

/// Per-node coefficient matrix plus the scalar bound `A_p`.
#[derive(Clone, Debug)]
pub struct CoeffMatrix {
    pub p: f64,
    pub entries: Masked<Coeffs>,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoeffSummary {
    pub p: f64,
    pub entry_bound: f64,
    pub defined_nodes: usize,
    pub masked_nodes: usize,
    pub max_entry: f64,
    /// Smallest `|Φ|` minus its lower bound over defined nodes.
    pub min_phi_slack: f64,
}

/// `A(f, g)` at interior nodes where `|∇u¹|, |∇u²|` exceed the singular
/// threshold.
pub fn coefficient_matrix(pair: &GradientPair) -> CoeffMatrix {
    let p = pair.p;
    let entries = pair.f.map(|k, a| {
        let (a, b) = (*a).zip(*pair.g.at(k))?;
        Coeffs::new(a.f, b.f, p, 0.5 * SINGULAR_GRADIENT)
    });
    CoeffMatrix { p, entries, bound: entry_bound(p) }
}

impl CoeffMatrix {
    pub fn summary(&self, pair: &GradientPair) -> CoeffSummary {
        let grid = self.entries.grid();
        let defined = self.entries.count_defined();
        let slack = self.entries.defined().map(|(k, c)| {
            let (f, g) = (pair.f.at(k).expect("defined").f, pair.g.at(k).expect("defined").f);
            c.phi.abs() - Coeffs::phi_lower_bound(f, g, self.p)
        });
        CoeffSummary {
            p: self.p,
            entry_bound: self.bound,
            defined_nodes: defined,
            masked_nodes: grid.interior_nodes().count() - defined,
            max_entry: max_of(self.entries.defined().map(|(_, c)| c.max_entry())).max(0.0),
            min_phi_slack: crate::parallel::min_of(slack),
        }
    }
}

/// Residuals of the complex system in both forms.
#[derive(Clone, Debug)]
pub struct SystemResidual {
    /// `F_z̄ − A F_z − conj(A F_z)` per equation.
    pub operator: [Masked<C64>; 2],
    /// Left minus right side of the unsolved quasilinear system, e.g.
    /// `(2p + 4|g|²/|f|²) f_z̄ − (2−p)(…)`.
    pub raw: [Masked<C64>; 2],
    /// Largest relative gap between `raw` and `M · operator`, with `M` the
    /// matrix of the unsolved system.
    pub inconsistency: f64,
}

impl SystemResidual {
    pub fn operator_norms(&self) -> [f64; 2] {
        self.operator.each_ref().map(|r| max_of(r.defined().map(|(_, z)| z.norm())).max(0.0))
    }
    pub fn raw_norms(&self) -> [f64; 2] {
        self.raw.each_ref().map(|r| max_of(r.defined().map(|(_, z)| z.norm())).max(0.0))
    }
}

struct RawTerms {
    lhs: [C64; 2],
    rhs: [C64; 2],
    diag: [f64; 2],
    scale: [f64; 2],
}

fn raw_terms(a: &ComplexJet, b: &ComplexJet, p: f64) -> RawTerms {
    let q = 2.0 - p;
    let (f, g) = (a.f, b.f);
    let x = g.norm_sqr() / f.norm_sqr();
    let diag = [2.0 * p + 4.0 * x, 2.0 * p + 4.0 / x];
    let half = |h: C64, own: C64, other: &ComplexJet| {
        let terms = [
            q * (own.conj() / own * h),
            q * (own / own.conj() * h.conj()),
        ];
        let cross = [
            q * (other.f.conj() / own * other.fz),
            q * (other.f / own.conj() * other.fz.conj()),
            q * ((other.f.conj() / own.conj() + other.f / own) * other.fzb),
        ];
        (terms, cross)
    };
    let (t1, c1) = half(a.fz, f, b);
    let (t2, c2) = half(b.fz, g, a);
    let rhs = [
        t1.iter().chain(c1.iter()).sum::<C64>(),
        t2.iter().chain(c2.iter()).sum::<C64>(),
    ];
    let lhs = [a.fzb * diag[0], b.fzb * diag[1]];
    let scale = [
        lhs[0].norm() + t1.iter().chain(c1.iter()).map(|z| z.norm()).sum::<f64>(),
        lhs[1].norm() + t2.iter().chain(c2.iter()).map(|z| z.norm()).sum::<f64>(),
    ];
    RawTerms { lhs, rhs, diag, scale }
}

/// Evaluate the system in the solved form and the raw form at every node
/// where the coefficient matrix is defined. Fails when the two forms
/// disagree beyond [`FORM_CONSISTENCY`].
pub fn system_residual(pair: &GradientPair) -> Result<SystemResidual> {
    let p = pair.p;
    let q = 2.0 - p;
    let coeffs = coefficient_matrix(pair);
    let per_node = coeffs.entries.map(|k, c| {
        let c = (*c)?;
        let (a, b) = (pair.f.at(k).expect("coeffs imply jets"), pair.g.at(k).expect("coeffs imply jets"));
        let rhs = c.apply(a.fz, b.fz);
        let op = [a.fzb - rhs[0], b.fzb - rhs[1]];
        let t = raw_terms(&a, &b, p);
        let raw = [t.lhs[0] - t.rhs[0], t.lhs[1] - t.rhs[1]];
        // M = [[d₁, −(2−p)·2Re(g/f)], [−(2−p)·2Re(f/g), d₂]].
        let m12 = -q * 2.0 * (b.f / a.f).re;
        let m21 = -q * 2.0 * (a.f / b.f).re;
        let mop = [t.diag[0] * op[0] + m12 * op[1], m21 * op[0] + t.diag[1] * op[1]];
        let gap = [0, 1].map(|r| (raw[r] - mop[r]).norm() / t.scale[r].max(f64::MIN_POSITIVE));
        Some((op, raw, gap[0].max(gap[1])))
    });
    let pick = |r: usize, which: usize| per_node.map(|_, v| v.map(|(op, raw, _)| if which == 0 { op[r] } else { raw[r] }));
    let inconsistency = max_of(per_node.defined().map(|(_, v)| v.2)).max(0.0);
    if inconsistency > FORM_CONSISTENCY {
        return Err(Error::Inconsistent(format!(
            "raw and solved forms of the complex system differ by {inconsistency:e} relative"
        )));
    }
    Ok(SystemResidual { operator: [pick(0, 0), pick(1, 0)], raw: [pick(0, 1), pick(1, 1)], inconsistency })
}

/// Residual of the scalar equation `f_z̄ = (1/p − 1/2)(f̄/f·f_z + f/f̄·conj(f_z))`,
/// the `g → 0` reduction of the system.
pub fn scalar_residual(jet: &ComplexJet, p: f64) -> C64 {
    let u = jet.f.conj() / jet.f;
    jet.fzb - (1.0 / p - 0.5) * (u * jet.fz + u.conj() * jet.fz.conj())
}

/// `|f_z̄|² + |g_z̄|² − 4(2A_p)²(|f_z|² + |g_z|²)` per node; non-positive
/// for p-harmonic maps.
pub fn conv_est_margin(pair: &GradientPair) -> Masked<f64> {
    let a = entry_bound(pair.p);
    pair.f.map(|k, jf| {
        let (jf, jg) = (*jf).zip(*pair.g.at(k))?;
        Some(jf.fzb.norm_sqr() + jg.fzb.norm_sqr() - 16.0 * a * a * (jf.fz.norm_sqr() + jg.fz.norm_sqr()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hand_example() {
        let one = C64::new(1.0, 0.0);
        let c = Coeffs::new(one, one, 4.0, 1e-8).unwrap();
        assert_relative_eq!(c.phi, 128.0, epsilon = 1e-12);
        assert_relative_eq!(c.b, 12.0);
        assert_relative_eq!(c.c, 4.0);
        assert_relative_eq!(c.d.re, 2.0);
        assert_relative_eq!(c.a[0][0].re, -0.125, epsilon = 1e-15);
        assert_eq!(Coeffs::phi_printed(one, one, 4.0), 128.0);
    }

    #[test]
    fn vanishes_at_two() {
        let c = Coeffs::new(C64::new(0.3, -1.0), C64::new(2.0, 0.5), 2.0, 1e-8).unwrap();
        assert_eq!(c.max_entry(), 0.0);
    }

    #[test]
    fn bound_branches_meet() {
        assert_eq!(entry_bound(2.0), 0.0);
        assert_relative_eq!(entry_bound(4.0 / 3.0), 0.25, epsilon = 1e-15);
        assert_relative_eq!(entry_bound(3.0), (3.0 - 2.0) * 2.0 / 12.0);
        assert_relative_eq!(lemma_constant(2.0), 1.0);
        assert_relative_eq!(lemma_constant(3.0), (9.0 - 3.0 + 2.0) / 6.0);
    }

    #[test]
    fn threshold_masks() {
        assert!(Coeffs::new(C64::new(1.0, 0.0), C64::new(1e-9, 0.0), 3.0, 1e-8).is_none());
    }
}
