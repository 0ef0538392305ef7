//! Radial maps `u = (H(r)x, H(r)y)`.

mod counterexample;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Exponent, Grid2D, PlanarMap, ScalarField};

pub use counterexample::{
    admissible_c_interval, counterexample_map, t_interval, upper_admissible_c, Counterexample, CounterexampleSpec,
    Verdict, CRITICAL_P,
};

fn denominator(r: f64, h: f64, dh: f64, p: f64) -> f64 {
    (p - 1.0) * dh * dh * r * r * r + 2.0 * (p - 1.0) * h * dh * r * r + p * h * h * r
}

/// Solve the radial equation for `H″`.
pub fn radial_ode_h2(r: f64, h: f64, dh: f64, p: f64) -> Result<f64> {
    let den = denominator(r, h, dh, p);
    let scale = r * (h * h + dh * dh * r * r);
    if !(den.abs() > 1e-14 * scale) || !den.is_finite() {
        return Err(Error::Singular { r, reason: "vanishing coefficient of H''".into() });
    }
    let rest = (2.0 * p - 1.0) * dh.powi(3) * r * r + (5.0 * p - 4.0) * h * dh * dh * r + 3.0 * p * h * h * dh;
    Ok(-rest / den)
}

/// Left-hand side of the radial equation; zero along solutions.
pub fn radial_ode_residual(r: f64, h: f64, dh: f64, ddh: f64, p: f64) -> f64 {
    (p - 1.0) * ddh * dh * dh * r.powi(3)
        + (2.0 * p - 1.0) * dh.powi(3) * r * r
        + 2.0 * (p - 1.0) * h * dh * ddh * r * r
        + (5.0 * p - 4.0) * h * dh * dh * r
        + p * h * h * ddh * r
        + 3.0 * p * h * h * dh
}

/// Sampled profile with derivative; evaluated between samples by cubic
/// Hermite interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub p: f64,
    pub r: Vec<f64>,
    pub h: Vec<f64>,
    pub dh: Vec<f64>,
}

impl RadialProfile {
    pub fn r_range(&self) -> (f64, f64) {
        (self.r[0], *self.r.last().expect("profile is non-empty"))
    }

    /// `(H, H′)` at `r` inside the sampled range.
    pub fn eval(&self, r: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.r_range();
        let slack = 1e-12 * hi.abs();
        if !(r >= lo - slack && r <= hi + slack) {
            return Err(Error::Precondition(format!("r = {r} outside profile range [{lo}, {hi}]")));
        }
        let r = r.clamp(lo, hi);
        let n = self.r.len();
        let i = match self.r.binary_search_by(|v| v.total_cmp(&r)) {
            Ok(i) => return Ok((self.h[i], self.dh[i])),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        let w = r1 - r0;
        let t = (r - r0) / w;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
            t * (1.0 - t) * (1.0 - t),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        let (y0, y1, m0, m1) = (self.h[i], self.h[i + 1], self.dh[i], self.dh[i + 1]);
        let value = h00 * y0 + h10 * w * m0 + h01 * y1 + h11 * w * m1;
        let slope = (6.0 * t * t - 6.0 * t) / w * y0
            + (3.0 * t * t - 4.0 * t + 1.0) * m0
            + (6.0 * t - 6.0 * t * t) / w * y1
            + (3.0 * t * t - 2.0 * t) * m1;
        Ok((value, slope))
    }

    /// `(H, H′, H″)` with `H″` from the ODE.
    pub fn eval2(&self, r: f64) -> Result<(f64, f64, f64)> {
        let (h, dh) = self.eval(r)?;
        Ok((h, dh, radial_ode_h2(r, h, dh, self.p)?))
    }

    /// Sample `(H(r)x, H(r)y)` on the masked-in nodes of `grid`.
    pub fn lift(&self, grid: &Arc<Grid2D>) -> Result<PlanarMap> {
        let mut u1 = vec![0.0; grid.len()];
        let mut u2 = vec![0.0; grid.len()];
        for k in (0..grid.len()).filter(|&k| grid.is_in(k)) {
            let (x, y) = grid.xy(k);
            let (h, _) = self.eval(x.hypot(y))?;
            u1[k] = h * x;
            u2[k] = h * y;
        }
        PlanarMap::new(ScalarField::from_values(grid, u1)?, ScalarField::from_values(grid, u2)?, Exponent::new(self.p)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("# radial profile H(r), H'(r) of u = (H(r)x, H(r)y) solving the p-harmonic radial ODE\nr,H,dH\n");
        for ((r, h), dh) in self.r.iter().zip(&self.h).zip(&self.dh) {
            out.push_str(&format!("{r:e},{h:e},{dh:e}\n"));
        }
        out
    }
}

/// Classic fourth-order Runge–Kutta on `(H, H′)` with a fixed step.
pub fn integrate_radial(p: f64, r0: f64, r1: f64, h0: f64, dh0: f64, step: f64) -> Result<RadialProfile> {
    integrate_monitored(p, r0, r1, h0, dh0, step, |_, _, _| true)?
        .ok_or_else(|| Error::Precondition("monitor rejected the profile".into()))
}

/// As [`integrate_radial`], stopping with `None` as soon as `monitor(r, H, H′)`
/// returns false.
pub(crate) fn integrate_monitored(
    p: f64,
    r0: f64,
    r1: f64,
    h0: f64,
    dh0: f64,
    step: f64,
    mut monitor: impl FnMut(f64, f64, f64) -> bool,
) -> Result<Option<RadialProfile>> {
    Exponent::new(p)?;
    if !(r0 > 0.0 && r1 > r0) {
        return Err(Error::Precondition(format!("need 0 < r0 < r1, got r0 = {r0}, r1 = {r1}")));
    }
    if !(step > 0.0) || !h0.is_finite() || !dh0.is_finite() {
        return Err(Error::Precondition("step must be positive and data finite".into()));
    }
    let n = ((r1 - r0) / step).ceil().max(1.0) as usize;
    let dr = (r1 - r0) / n as f64;
    let f = |r: f64, s: [f64; 2]| -> Result<[f64; 2]> { Ok([s[1], radial_ode_h2(r, s[0], s[1], p)?]) };
    let mut s = [h0, dh0];
    let mut prof = RadialProfile { p, r: vec![r0], h: vec![h0], dh: vec![dh0] };
    if !monitor(r0, h0, dh0) {
        return Ok(None);
    }
    for i in 0..n {
        let r = r0 + i as f64 * dr;
        let k1 = f(r, s)?;
        let k2 = f(r + 0.5 * dr, [s[0] + 0.5 * dr * k1[0], s[1] + 0.5 * dr * k1[1]])?;
        let k3 = f(r + 0.5 * dr, [s[0] + 0.5 * dr * k2[0], s[1] + 0.5 * dr * k2[1]])?;
        let k4 = f(r + dr, [s[0] + dr * k3[0], s[1] + dr * k3[1]])?;
        for c in 0..2 {
            s[c] += dr / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        let rn = if i + 1 == n { r1 } else { r0 + (i + 1) as f64 * dr };
        if !monitor(rn, s[0], s[1]) {
            return Ok(None);
        }
        prof.r.push(rn);
        prof.h.push(s[0]);
        prof.dh.push(s[1]);
    }
    Ok(Some(prof))
}

/// Radial solution `c₁ r^{(p−2)/(p−1)} + c₂` of the scalar p-Laplace
/// equation (`c₁ ln r + c₂` at `p = 2`), centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarRadial {
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
}

impl ScalarRadial {
    pub fn new(p: f64, c1: f64, c2: f64) -> Result<Self> {
        Exponent::new(p)?;
        Ok(Self { p, c1, c2 })
    }

    pub fn exponent(&self) -> f64 {
        (self.p - 2.0) / (self.p - 1.0)
    }

    pub fn value(&self, r: f64) -> f64 {
        if self.p == 2.0 {
            self.c1 * r.ln() + self.c2
        } else {
            self.c1 * r.powf(self.exponent()) + self.c2
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        if self.p == 2.0 {
            self.c1 / r
        } else {
            self.c1 * self.exponent() * r.powf(self.exponent() - 1.0)
        }
    }

    pub fn field(&self, grid: &Arc<Grid2D>) -> Result<ScalarField> {
        let hits_origin = (0..grid.len()).any(|k| grid.is_in(k) && {
            let (x, y) = grid.xy(k);
            x.hypot(y) < 1e-12
        });
        if hits_origin {
            return Err(Error::Singular { r: 0.0, reason: "origin lies in the domain".into() });
        }
        Ok(ScalarField::from_fn(grid, |x, y| self.value(x.hypot(y))))
    }
}

/// Convenience wrapper matching the scalar radial family.
pub fn scalar_radial(p: f64, c1: f64, c2: f64) -> Result<ScalarRadial> {
    ScalarRadial::new(p, c1, c2)
}
