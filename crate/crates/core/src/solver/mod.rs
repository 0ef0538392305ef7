//! Dirichlet solver for p-harmonic maps and the residual forms of the system.

mod energy;
mod residual;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Grid2D, PlanarMap};
use crate::parallel::max_of;
use energy::{axpy, dot, Energy, State};

pub use residual::{residual_divergence, residual_gradrep, scalar_p_laplacian, scalar_p_laplacian_complex, SINGULAR_GRADIENT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GradientDescent,
    DampedNewton,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self { shrink: 0.5, sufficient_decrease: 1e-4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub epsilon_reg: f64,
    pub line_search: LineSearch,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 400,
            grad_tol: 1e-8,
            epsilon_reg: 1e-6,
            line_search: LineSearch::default(),
            method: Method::DampedNewton,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidOption { name, reason: reason.into() });
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol", "must be positive");
        }
        if !(self.epsilon_reg >= 0.0) {
            return bad("epsilon_reg", "must be non-negative");
        }
        let ls = self.line_search;
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return bad("shrink", "must lie in (0, 1)");
        }
        if !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < 0.5) {
            return bad("sufficient_decrease", "must lie in (0, 0.5)");
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be positive");
        }
        Ok(())
    }

    /// Regularization schedule ending at `epsilon_reg`.
    pub fn epsilon_schedule(&self) -> Vec<f64> {
        let mut out: Vec<f64> = [1e-2, 1e-4].into_iter().filter(|&e| e > self.epsilon_reg).collect();
        out.push(self.epsilon_reg);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub epsilon: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    pub final_energy: f64,
    pub grad_norm: f64,
    /// Max-norm of the discrete Euler–Lagrange gradient per component.
    pub gradient_norms: [f64; 2],
    /// Max-norm of the expanded divergence residual per equation.
    pub residual_norms: [f64; 2],
    pub singular_nodes: usize,
    /// Steps accepted on gradient decrease because the energy change was
    /// below round-off.
    pub floor_steps: usize,
    pub stages: Vec<StageReport>,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Armijo,
    Floor,
}

/// One accepted iterate, passed to observers.
#[derive(Clone, Copy, Debug)]
pub struct StepEvent {
    pub epsilon: f64,
    pub energy_before: f64,
    /// Energy change of the step, computed from the increments.
    pub change: f64,
    pub step: f64,
    pub kind: StepKind,
}

/// Regularized discrete energy `Σ w (|G|² + ε²)^{p/2}` of a map.
pub fn energy(u: &PlanarMap, epsilon: f64) -> f64 {
    let grid = u.grid();
    Energy::new(grid, u.p.get(), epsilon).value(&[u.u1.values().to_vec(), u.u2.values().to_vec()])
}

/// Minimize the discrete energy with the boundary-node values of `boundary`.
pub fn solve_dirichlet(boundary: &PlanarMap, opts: &SolveOptions) -> Result<(PlanarMap, SolveReport)> {
    solve_dirichlet_observed(boundary, opts, &mut |_| {})
}

pub fn solve_dirichlet_observed(
    boundary: &PlanarMap,
    opts: &SolveOptions,
    observer: &mut dyn FnMut(&StepEvent),
) -> Result<(PlanarMap, SolveReport)> {
    opts.validate()?;
    boundary.u1.check_finite()?;
    boundary.u2.check_finite()?;
    let grid = boundary.grid();
    let p = boundary.p.get();
    let mut u: State = [initial_guess(grid, boundary.u1.values()), initial_guess(grid, boundary.u2.values())];
    let schedule = opts.epsilon_schedule();
    let mut energy = Energy::new(grid, p, schedule[0]);
    let mut stages = Vec::new();
    let mut iterations = 0;
    let mut floor_steps = 0;
    let mut grad_norm = f64::INFINITY;
    let last = schedule.len() - 1;
    for (n, &eps) in schedule.iter().enumerate() {
        energy.set_eps(eps);
        let tol = if n == last { opts.grad_tol } else { opts.grad_tol.max(1e-5) };
        let mut stage = Stage { energy: &energy, opts, eps, observer: &mut *observer, floor_steps: 0 };
        let (its, gn) = stage.run(&mut u, tol);
        floor_steps += stage.floor_steps;
        iterations += its;
        grad_norm = gn;
        stages.push(StageReport { epsilon: eps, iterations: its, grad_norm: gn });
    }
    let final_grad = energy.gradient(&u);
    let area = grid.cell_area();
    let gradient_norms = [0, 1].map(|c| max_of(final_grad[c].iter().map(|g| g.abs() / area)).max(0.0));
    let final_energy = energy.value(&u);
    let [u1, u2] = u;
    let map = PlanarMap::new(Field::from_values(grid, u1)?, Field::from_values(grid, u2)?, boundary.p)?;
    let residual = residual_divergence(&map);
    let singular_nodes = grid.interior_nodes().filter(|&k| residual.0.at(k).is_none()).count();
    let report = SolveReport {
        method: opts.method,
        iterations,
        final_energy,
        grad_norm,
        gradient_norms,
        residual_norms: [residual.0.max_abs(), residual.1.max_abs()],
        singular_nodes,
        floor_steps,
        stages,
        converged: grad_norm <= opts.grad_tol,
    };
    Ok((map, report))
}

struct Stage<'s, 'a> {
    energy: &'s Energy<'a>,
    opts: &'s SolveOptions,
    eps: f64,
    observer: &'s mut dyn FnMut(&StepEvent),
    floor_steps: usize,
}

impl Stage<'_, '_> {
    fn norm(&self, g: &State) -> f64 {
        let area = self.energy.cell_area();
        max_of(g.iter().flat_map(|c| c.iter().map(|v| v.abs() / area))).max(0.0)
    }

    /// Iterate until the scaled gradient drops below `tol`; returns the
    /// iteration count and the final scaled gradient norm.
    fn run(&mut self, u: &mut State, tol: f64) -> (usize, f64) {
        let mut e = self.energy.value(u);
        let mut g = self.energy.gradient(u);
        let mut gn = self.norm(&g);
        let mut alpha_prev: f64 = 1.0;
        for it in 0..self.opts.max_iters {
            if gn <= tol {
                return (it, gn);
            }
            let (d, alpha0) = match self.opts.method {
                Method::DampedNewton => (self.newton_direction(u, &g, gn), 1.0),
                Method::GradientDescent => {
                    let scale = 1.0 / self.energy.cell_area();
                    (g.clone().map(|c| c.iter().map(|v| -v * scale).collect()), (2.0f64 * alpha_prev).min(1e3))
                }
            };
            let slope = dot(&g, &d);
            let Some((alpha, change)) = self.line_search(u, slope, &d, alpha0) else {
                return (it, gn);
            };
            let un = axpy(alpha, &d, u);
            let gnew = self.energy.gradient(&un);
            let gn_new = self.norm(&gnew);
            let kind = if change < 0.0 { StepKind::Armijo } else { StepKind::Floor };
            if kind == StepKind::Floor {
                if gn_new >= gn {
                    return (it, gn);
                }
                self.floor_steps += 1;
            }
            (self.observer)(&StepEvent { epsilon: self.eps, energy_before: e, change, step: alpha, kind });
            alpha_prev = alpha;
            *u = un;
            e += change;
            g = gnew;
            gn = gn_new;
        }
        (self.opts.max_iters, gn)
    }

    /// Backtracking on the Armijo condition. If the step shrinks to
    /// nothing the unit step is handed back for a gradient test.
    fn line_search(&self, u: &State, slope: f64, d: &State, alpha0: f64) -> Option<(f64, f64)> {
        let ls = self.opts.line_search;
        if !(slope < 0.0) {
            return None;
        }
        let mut alpha = alpha0;
        while alpha > 1e-20 * alpha0 {
            let change = self.energy.delta(u, d, alpha);
            if change < 0.0 && change <= ls.sufficient_decrease * alpha * slope {
                return Some((alpha, change));
            }
            alpha *= ls.shrink;
        }
        Some((alpha0, self.energy.delta(u, d, alpha0)))
    }

    /// Truncated conjugate gradients on `H d = −g`.
    fn newton_direction(&self, u: &State, g: &State, gn: f64) -> State {
        let lin = self.energy.linearize(u);
        let n = g[0].len();
        let mut d: State = [vec![0.0; n], vec![0.0; n]];
        let mut r: State = g.clone().map(|c| c.iter().map(|v| -v).collect());
        let mut q = r.clone();
        let rr0 = dot(&r, &r);
        let mut rr = rr0;
        let rtol = gn.sqrt().min(0.1);
        let max_cg = 40 * (n as f64).sqrt() as usize + 200;
        for it in 0..max_cg {
            let hq = lin.apply(&q);
            let curv = dot(&q, &hq);
            if !(curv > 0.0) {
                if it == 0 {
                    return r;
                }
                break;
            }
            let a = rr / curv;
            d = axpy(a, &q, &d);
            r = axpy(-a, &hq, &r);
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= rtol * rr0.sqrt() {
                break;
            }
            q = axpy(rr_new / rr, &q, &r);
            rr = rr_new;
        }
        d
    }
}

/// Interior start values: average of the row-wise and column-wise linear
/// interpolants between the nearest non-interior nodes.
fn initial_guess(grid: &Grid2D, boundary: &[f64]) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            if !grid.is_interior(k) {
                return if grid.is_in(k) { boundary[k] } else { 0.0 };
            }
            let walk = |di: isize, dj: isize| {
                let mut steps = 0.0;
                let mut m = k;
                loop {
                    m = grid.offset(m, di, dj)?;
                    steps += 1.0;
                    if !grid.is_interior(m) {
                        return grid.is_in(m).then(|| (boundary[m], steps));
                    }
                }
            };
            let interp = |a: Option<(f64, f64)>, b: Option<(f64, f64)>| {
                a.zip(b).map(|((va, da), (vb, db))| (va * db + vb * da) / (da + db))
            };
            let row = interp(walk(-1, 0), walk(1, 0));
            let col = interp(walk(0, -1), walk(0, 1));
            match (row, col) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => 0.0,
            }
        })
        .collect()
}
