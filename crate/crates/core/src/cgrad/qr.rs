use serde::Serialize;

use super::{conv_est_margin, entry_bound, qr_ratio_threshold, qr_ratio_threshold_printed, GradientPair};
use crate::field::{wirtinger, ComplexField, Masked};
use crate::parallel::max_of;

/// `|F_z|` at or below this leaves the Beltrami coefficient undefined.
pub const BELTRAMI_THRESHOLD: f64 = 1e-8;

/// `|F_z̄|/|F_z|` from central differences of a sampled complex field.
pub fn beltrami_modulus(field: &ComplexField) -> Masked<f64> {
    let (dz, dzb) = wirtinger(field);
    dz.map(|k, a| {
        let a = (*a)?;
        let b = (*dzb.at(k))?;
        (a.norm() > BELTRAMI_THRESHOLD).then(|| b.norm() / a.norm())
    })
}

/// Quasiregularity verdict for one complex gradient.
#[derive(Clone, Debug, Serialize)]
pub struct QRFlag {
    /// Supremum of the ratio of the other gradient's `z`-derivative to this one's.
    pub sup_ratio: f64,
    /// Whether `sup_ratio` is below the ratio threshold.
    pub criterion_met: bool,
    /// `2A_p(1 + sup_ratio)`, the distortion bound the criterion yields.
    pub k_criterion: f64,
    /// Measured `sup |μ|` over nodes where it is defined.
    pub sup_mu: f64,
    /// Nodes with `|F_z|` below threshold while `|F_z̄|` is not.
    pub degenerate_nodes: usize,
    /// `max(k_criterion, sup_mu)`.
    pub k: f64,
    pub quasiregular: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct QRReport {
    pub p: f64,
    pub entry_bound: f64,
    pub ratio_threshold: f64,
    pub ratio_threshold_printed: f64,
    /// Largest `|f_z̄| − 2A_p(|f_z| + |g_z|)` and the same for `g`.
    pub qr_coeff_margin: [f64; 2],
    /// Largest `|f_z̄|² + |g_z̄|² − 16A_p²(|f_z|² + |g_z|²)`.
    pub conv_est_margin: f64,
    pub nodes: usize,
    pub f: QRFlag,
    pub g: QRFlag,
    #[serde(skip)]
    pub mu_f: Masked<f64>,
    #[serde(skip)]
    pub mu_g: Masked<f64>,
    /// `|g_z|/|f_z|` per node.
    #[serde(skip)]
    pub ratio: Masked<f64>,
}

fn flag(p: f64, mu: &Masked<f64>, degenerate: usize, sup_ratio: f64) -> QRFlag {
    let a = entry_bound(p);
    let criterion_met = sup_ratio < qr_ratio_threshold(p);
    let k_criterion = 2.0 * a * (1.0 + sup_ratio);
    let sup_mu = if degenerate > 0 { f64::INFINITY } else { mu.max().max(0.0) };
    let k = k_criterion.max(sup_mu);
    QRFlag { sup_ratio, criterion_met, k_criterion, sup_mu, degenerate_nodes: degenerate, k, quasiregular: criterion_met && k < 1.0 }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > BELTRAMI_THRESHOLD {
        Some(num / den)
    } else if num > BELTRAMI_THRESHOLD {
        Some(f64::INFINITY)
    } else {
        None
    }
}

/// Node-wise check of `|f_z̄| ≤ 2A_p(|f_z| + |g_z|)` and its mirror, the
/// combined estimate on `|f_z̄|² + |g_z̄|²`, Beltrami moduli and the
/// ratio criterion for quasiregularity of `f` and `g`.
pub fn quasiregularity_report(pair: &GradientPair) -> QRReport {
    let p = pair.p;
    let a = entry_bound(p);
    let both = pair.f.map(|k, jf| (*jf).zip(*pair.g.at(k)));
    let mu_f = both.map(|_, v| v.and_then(|(f, _)| ratio(f.fzb.norm(), f.fz.norm())));
    let mu_g = both.map(|_, v| v.and_then(|(_, g)| ratio(g.fzb.norm(), g.fz.norm())));
    let ratio_gf = both.map(|_, v| v.and_then(|(f, g)| ratio(g.fz.norm(), f.fz.norm())));
    let ratio_fg = both.map(|_, v| v.and_then(|(f, g)| ratio(f.fz.norm(), g.fz.norm())));
    let margin = |i: usize| {
        max_of(both.defined().map(|(_, (f, g))| {
            let own = if i == 0 { f.fzb } else { g.fzb };
            own.norm() - 2.0 * a * (f.fz.norm() + g.fz.norm())
        }))
    };
    let degenerate = |mu: &Masked<f64>| mu.defined().filter(|(_, v)| v.is_infinite()).count();
    let finite = |mu: &Masked<f64>| mu.map(|_, v| v.filter(|v| v.is_finite()));
    let (mf, mg) = (finite(&mu_f), finite(&mu_g));
    let f = flag(p, &mf, degenerate(&mu_f), ratio_gf.max().max(0.0));
    let g = flag(p, &mg, degenerate(&mu_g), ratio_fg.max().max(0.0));
    QRReport {
        p,
        entry_bound: a,
        ratio_threshold: qr_ratio_threshold(p),
        ratio_threshold_printed: qr_ratio_threshold_printed(p),
        qr_coeff_margin: [margin(0), margin(1)],
        conv_est_margin: conv_est_margin(pair).max(),
        nodes: both.count_defined(),
        f,
        g,
        mu_f,
        mu_g,
        ratio: ratio_gf,
    }
}
