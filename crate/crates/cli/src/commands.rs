use std::fs;
use std::path::{Path, PathBuf};

use pharmonic::cgrad::{coefficient_matrix, quasiregularity_report, GradientPair};
use pharmonic::field::io::{fmt_f64, FieldTable};
use pharmonic::field::{components, jets, Exponent, NodeKind, PlanarMap};
use pharmonic::geometry::{
    curvature_h, curvature_k, curves_csv, curves_svg, det_hessian, extract_level, gauss_curvature, length_function,
    CurvatureMode,
};
use pharmonic::radial::{admissible_c_interval, counterexample_map, integrate_radial, CRITICAL_P};
use pharmonic::solver::{solve_dirichlet, SolveReport, SINGULAR_GRADIENT};
use pharmonic::verify::{
    check_complex_bounds, check_hessian_sign, check_isoperimetric, check_kphi_integrability, check_length_bound,
    check_max_principle, CheckKind, CheckOptions, CheckResult, IsoOptions, Subject, Verdict,
};
use serde::Serialize;

use crate::config::{RadialMode, RunConfig};
use crate::error::CliError;

pub const SOLUTION: &str = "solution";
pub const SOLVE_REPORT: &str = "solve_report.json";

/// Everything a command needs besides its own flags.
pub struct Ctx {
    pub cfg: Option<RunConfig>,
    /// Directory relative paths in the config are resolved against.
    pub base: PathBuf,
    pub out: PathBuf,
    pub tolerance_scale: f64,
}

impl Ctx {
    fn cfg(&self) -> Result<&RunConfig, CliError> {
        self.cfg.as_ref().ok_or_else(|| CliError::Usage("this command needs --config".into()))
    }
}

#[derive(Serialize)]
struct Described<'a, T: Serialize> {
    description: &'a str,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(path: &Path, description: &str, body: T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&Described { description, body })?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_text(path: &Path, header: &str, body: &str) -> Result<(), CliError> {
    fs::write(path, format!("# {header}\n{body}"))?;
    Ok(())
}

struct Loaded {
    map: PlanarMap,
    report: Option<SolveReport>,
}

impl Loaded {
    fn subject(&self) -> Subject<'_> {
        match &self.report {
            Some(r) => Subject::solved(&self.map, r),
            None => Subject::constructed(&self.map),
        }
    }
}

fn compute(ctx: &Ctx) -> Result<Loaded, CliError> {
    let cfg = ctx.cfg()?;
    let start = cfg.initial_map(&ctx.base)?;
    if !cfg.solve {
        return Ok(Loaded { map: start, report: None });
    }
    let (map, report) = solve_dirichlet(&start, &cfg.solver)?;
    Ok(Loaded { map, report: Some(report) })
}

fn read_solution(dir: &Path) -> Result<Loaded, CliError> {
    let unreadable = |e: pharmonic::Error| CliError::Usage(format!("cannot read solution in {}: {e}", dir.display()));
    let (table, header) = FieldTable::read(dir, SOLUTION).map_err(unreadable)?;
    let p = header.p.ok_or_else(|| CliError::Usage("solution header lacks p".into()))?;
    let p = Exponent::new(p).map_err(unreadable)?;
    let u1 = table.scalar("u1").map_err(unreadable)?;
    let u2 = table.scalar("u2").map_err(unreadable)?;
    let map = PlanarMap::new(u1, u2, p).map_err(unreadable)?;
    let report_path = dir.join(SOLVE_REPORT);
    let report = if report_path.is_file() {
        Some(serde_json::from_str(&fs::read_to_string(&report_path)?)?)
    } else {
        None
    };
    Ok(Loaded { map, report })
}

fn obtain(ctx: &Ctx, input: Option<&Path>) -> Result<Loaded, CliError> {
    match input {
        Some(dir) => read_solution(dir),
        None => compute(ctx),
    }
}

pub fn solve(ctx: &Ctx) -> Result<(), CliError> {
    let loaded = compute(ctx)?;
    fs::create_dir_all(&ctx.out)?;
    let u = &loaded.map;
    let description = if loaded.report.is_some() {
        "components u1, u2 of the discrete p-harmonic map with the configured boundary values"
    } else {
        "components u1, u2 of the constructed map"
    };
    FieldTable::new(u.grid())
        .with_scalar("u1", &u.u1)
        .with_scalar("u2", &u.u2)
        .write(&ctx.out, SOLUTION, description, Some(u.p.get()))?;
    let _ = fs::remove_file(ctx.out.join(SOLVE_REPORT));
    if let Some(r) = &loaded.report {
        write_json(
            &ctx.out.join(SOLVE_REPORT),
            "solver iterations, final p-energy, max-norm of the energy gradient and of the divergence-form residual",
            r,
        )?;
        println!(
            "solve: {} iterations, energy {}, gradient {}, converged {}",
            r.iterations,
            fmt_f64(r.final_energy),
            fmt_f64(r.grad_norm),
            r.converged
        );
        if !r.converged {
            return Err(CliError::Numerical("solver did not reach the gradient tolerance".into()));
        }
    } else {
        println!("solve: constructed map written without solving");
    }
    Ok(())
}

/// Seven evenly spaced interior values of `u¹` unless levels are given.
fn levels_for(map: &PlanarMap, given: &[f64]) -> Vec<f64> {
    if !given.is_empty() {
        return given.to_vec();
    }
    let grid = map.grid();
    let vals = (0..grid.len()).filter(|&k| grid.is_in(k)).map(|k| *map.u1.at(k));
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Vec::new();
    }
    (1..8).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect()
}

fn default_fd_step(levels: &[f64]) -> f64 {
    let span = levels.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
    let gaps = levels.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|&g| g > 0.0);
    let gap = gaps.fold(f64::INFINITY, f64::min);
    if gap.is_finite() {
        gap / 10.0
    } else {
        1e-2 * span.max(1.0)
    }
}

#[derive(Serialize)]
struct Region {
    nodes: usize,
    lower_left: [f64; 2],
    upper_right: [f64; 2],
}

#[derive(Serialize)]
struct LevelSummary {
    level: f64,
    curves: usize,
    closed: usize,
    length: f64,
}

#[derive(Serialize)]
struct AnalysisSummary {
    p: f64,
    interior_nodes: usize,
    boundary_nodes: usize,
    outside_nodes: usize,
    /// Interior nodes with `|∇u¹|` (resp. `|∇u²|`) below the singular threshold.
    singular_nodes: [usize; 2],
    /// Interior nodes where the level curvature of `u¹` is undefined.
    undefined_curvature_nodes: usize,
    masked_regions: Vec<Region>,
    max_abs_curvature: f64,
    max_abs_det_hessian: [f64; 2],
    levels: Vec<LevelSummary>,
    rejected_levels: Vec<(f64, String)>,
    fd_step: f64,
}

pub fn analyze(ctx: &Ctx, input: Option<&Path>) -> Result<(), CliError> {
    let loaded = obtain(ctx, input)?;
    let u = &loaded.map;
    let grid = u.grid();
    let p = u.p.get();
    fs::create_dir_all(&ctx.out)?;

    let (d1, d2) = (det_hessian(&u.u1)?, det_hessian(&u.u2)?);
    let k = curvature_k(&u.u1, p, CurvatureMode::Divergence)?;
    FieldTable::new(grid)
        .with_masked("det_hessian_u1", &d1)
        .with_masked("det_hessian_u2", &d2)
        .with_masked("gauss_curvature_u1", &gauss_curvature(&u.u1))
        .with_masked("gauss_curvature_u2", &gauss_curvature(&u.u2))
        .with_masked("level_curvature_u1", &k)
        .with_masked("trajectory_curvature_u1", &curvature_h(&u.u1))
        .write(
            &ctx.out,
            "curvature",
            "Hessian determinants of u1 and u2, Gauss curvature det D2u/(1+|grad u|^2)^2 of both graphs, \
             curvature -div(grad u1/|grad u1|) of the level curves of u1 and of their orthogonal trajectories",
            Some(p),
        )?;

    let given = ctx.cfg.as_ref().map(|c| c.analyze.clone()).unwrap_or_default();
    let levels = levels_for(u, &given.levels);
    let curves: Vec<_> = levels.iter().flat_map(|&s| extract_level(&u.u1, s)).collect();
    fs::write(ctx.out.join("levels.svg"), curves_svg(grid, &curves))?;
    write_text(
        &ctx.out.join("levels.csv"),
        "vertices of the level curves {u1 = s} with |grad u1| and level-curve curvature interpolated along them",
        &curves_csv(&curves),
    )?;

    let fd_step = given.fd_step.unwrap_or_else(|| default_fd_step(&levels));
    let lf = length_function(&u.u1, p, &levels, fd_step, Some(u))?;
    write_text(
        &ctx.out.join("length_function.csv"),
        "length L(s) of {u1 = s}; first and second derivatives as line integrals and as centred differences; \
         two-component line integrals for L' and L'' and the gradient integrals of the concavity bound",
        &lf.to_csv(),
    )?;

    let pair = GradientPair::of(u);
    let qr = quasiregularity_report(&pair);
    write_json(
        &ctx.out.join("quasiregularity.json"),
        "Beltrami moduli of both complex gradients, ratio criterion for quasiregularity and node-wise margins of the \
         Wirtinger-derivative bounds",
        &qr,
    )?;
    let coeff = coefficient_matrix(&pair).summary(&pair);
    write_json(
        &ctx.out.join("coefficient_bound.json"),
        "largest entry of the coefficient matrix of the complex system against its bound, and smallest slack of \
         the determinant lower bound",
        &coeff,
    )?;

    let j1 = jets(&u.u1);
    let j2 = jets(&u.u2);
    let singular = |j: &pharmonic::field::Masked<pharmonic::field::Jet2>| {
        j.defined().filter(|(_, j)| j.grad_norm() < SINGULAR_GRADIENT).count()
    };
    let holes = components(grid, |n| grid.is_interior(n) && k.at(n).is_none());
    let masked_regions = holes
        .iter()
        .map(|c| {
            let pts: Vec<(f64, f64)> = c.iter().map(|&n| grid.xy(n)).collect();
            let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| {
                pts.iter().map(pick).fold(init, f)
            };
            Region {
                nodes: c.len(),
                lower_left: [fold(f64::min, f64::INFINITY, |q| q.0), fold(f64::min, f64::INFINITY, |q| q.1)],
                upper_right: [fold(f64::max, f64::NEG_INFINITY, |q| q.0), fold(f64::max, f64::NEG_INFINITY, |q| q.1)],
            }
        })
        .collect();
    let level_summaries = levels
        .iter()
        .map(|&s| {
            let of: Vec<_> = curves.iter().filter(|c| c.level == s).collect();
            LevelSummary {
                level: s,
                curves: of.len(),
                closed: of.iter().filter(|c| c.closed).count(),
                length: of.iter().map(|c| c.length).sum(),
            }
        })
        .collect();
    let summary = AnalysisSummary {
        p,
        interior_nodes: grid.count(NodeKind::Interior),
        boundary_nodes: grid.count(NodeKind::Boundary),
        outside_nodes: grid.count(NodeKind::Outside),
        singular_nodes: [singular(&j1), singular(&j2)],
        undefined_curvature_nodes: holes.iter().map(Vec::len).sum(),
        masked_regions,
        max_abs_curvature: k.max_abs(),
        max_abs_det_hessian: [d1.max_abs(), d2.max_abs()],
        levels: level_summaries,
        rejected_levels: lf.rejected.clone(),
        fd_step,
    };
    write_json(
        &ctx.out.join("analysis.json"),
        "node counts, nodes where derivatives of the level geometry are undefined, level-curve counts and lengths",
        &summary,
    )?;
    println!(
        "analyze: {} levels, {} curves, {} undefined-curvature nodes in {} regions",
        levels.len(),
        curves.len(),
        summary.undefined_curvature_nodes,
        summary.masked_regions.len()
    );
    Ok(())
}

fn run_check(kind: CheckKind, ctx: &Ctx, loaded: &Loaded, opts: &CheckOptions) -> Result<CheckResult, CliError> {
    let cfg = ctx.cfg()?;
    let spec = &cfg.check;
    let subject = loaded.subject();
    let ball = || {
        spec.ball.ok_or_else(|| CliError::Usage(format!("check {kind:?} needs `check.ball` in the config")))
    };
    let default_levels = levels_for(&loaded.map, &cfg.analyze.levels);
    Ok(match kind {
        CheckKind::HessianSign => check_hessian_sign(subject, opts)?,
        CheckKind::MaxPrinciple => check_max_principle(subject, opts)?,
        CheckKind::ComplexBounds => check_complex_bounds(subject, opts)?,
        CheckKind::CurvatureIntegrability => {
            let b = ball()?;
            check_kphi_integrability(subject, b.center, b.radius, opts)?
        }
        CheckKind::LengthBound => {
            let b = ball()?;
            let levels = if spec.levels.is_empty() { default_levels } else { spec.levels.clone() };
            check_length_bound(subject, b.center, b.radius, &levels, opts)?
        }
        CheckKind::Isoperimetric => {
            let mut iso: IsoOptions = spec.iso.clone();
            if iso.levels.is_empty() {
                iso.levels = default_levels;
            }
            check_isoperimetric(subject, &iso, opts)?
        }
    })
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Violated => "violated",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn check(ctx: &Ctx, input: Option<&Path>) -> Result<(), CliError> {
    let cfg = ctx.cfg()?;
    let spec = &cfg.check;
    let loaded = if spec.run.is_empty() { None } else { Some(obtain(ctx, input)?) };
    let opts = CheckOptions { tolerance_scale: ctx.tolerance_scale, grad_tol: cfg.solver.grad_tol };
    let mut results = Vec::new();
    if let Some(loaded) = &loaded {
        for &kind in &spec.run {
            results.push(run_check(kind, ctx, loaded, &opts)?);
        }
    }
    fs::create_dir_all(&ctx.out)?;
    fs::write(ctx.out.join("checks.json"), serde_json::to_string_pretty(&results)? + "\n")?;

    println!("{:<26} {:<13} {:>14} {:>14}", "check", "verdict", "margin", "tolerance");
    let mut failures = Vec::new();
    for r in &results {
        let name = serde_json::to_value(r.check)?.as_str().unwrap_or_default().to_string();
        let margin = r.witness.as_ref().map_or("-".to_string(), |w| format!("{:.6e}", w.margin));
        println!("{name:<26} {:<13} {margin:>14} {:>14.6e}", verdict_name(r.verdict), r.tolerance);
        if let Some(w) = r.witness.as_ref().filter(|_| r.verdict == Verdict::Violated) {
            let at = w.location.map(|[x, y]| format!(" at ({x:.6}, {y:.6})")).unwrap_or_default();
            let lvl = w.level.map(|s| format!(" level {s:.6}")).unwrap_or_default();
            println!("  witness{at}{lvl}: margin {:.6e}", w.margin);
        }
        let bad = match r.verdict {
            Verdict::Violated => !spec.allow_violated.contains(&r.check),
            Verdict::Inconclusive => !spec.allow_inconclusive,
            Verdict::Holds => false,
        };
        if bad {
            failures.push(format!("{name} {}", verdict_name(r.verdict)));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!("failed checks: {}", failures.join(", "))))
    }
}

#[derive(Serialize)]
struct IntervalReport {
    p: f64,
    critical_p: f64,
    nonempty: bool,
    c_low: Option<f64>,
    c_high: Option<f64>,
}

pub struct RadialArgs {
    pub mode: Option<RadialMode>,
    pub p: Option<f64>,
    pub c: Option<f64>,
    pub n: Option<usize>,
}

pub fn radial(ctx: &Ctx, args: &RadialArgs) -> Result<(), CliError> {
    let spec = ctx.cfg.as_ref().map(|c| c.radial.clone()).unwrap_or_default();
    let mode = args.mode.or(spec.mode).ok_or_else(|| CliError::Usage("radial needs --mode".into()))?;
    let p = args
        .p
        .or(ctx.cfg.as_ref().map(|c| c.p))
        .ok_or_else(|| CliError::Usage("radial needs --p or a config".into()))?;
    Exponent::new(p).map_err(|e| CliError::Usage(format!("field `p`: {e}")))?;
    fs::create_dir_all(&ctx.out)?;
    match mode {
        RadialMode::Profile => {
            let prof = integrate_radial(p, spec.r0, spec.r1, spec.h0, spec.dh0, spec.step)?;
            fs::write(ctx.out.join("radial_profile.csv"), prof.to_csv())?;
            println!("radial: profile with {} samples on [{}, {}]", prof.r.len(), spec.r0, spec.r1);
        }
        RadialMode::AdmissibleInterval => {
            let iv = admissible_c_interval(p);
            let report = IntervalReport {
                p,
                critical_p: CRITICAL_P,
                nonempty: iv.is_some_and(|(lo, hi)| hi > lo),
                c_low: iv.map(|v| v.0),
                c_high: iv.map(|v| v.1),
            };
            write_json(
                &ctx.out.join("admissible_interval.json"),
                "apertures c > 1 for which the sign quadratic in t has real roots bracketing admissible radial data",
                &report,
            )?;
            match iv {
                Some((lo, hi)) => println!("radial: admissible c in ({lo}, {hi:.15}]"),
                None => println!("radial: no admissible c for p = {p}"),
            }
        }
        RadialMode::Counterexample => {
            let c = match args.c.or(spec.c) {
                Some(c) => c,
                None => {
                    let (lo, hi) = admissible_c_interval(p).ok_or_else(|| {
                        CliError::Usage(format!("p = {p} does not exceed 6+4*sqrt(2); no counterexample exists"))
                    })?;
                    0.5 * (lo + hi)
                }
            };
            let n = args.n.unwrap_or(spec.n);
            let ce = counterexample_map(p, c, n, ctx.tolerance_scale)?;
            #[derive(Serialize)]
            struct Body<'a> {
                spec: &'a pharmonic::radial::CounterexampleSpec,
                verdict: &'a pharmonic::radial::Verdict,
            }
            write_json(
                &ctx.out.join("counterexample.json"),
                "radial data on a thin sector and the minima of det D2u1, det D2u2 over its nodes with their tolerance",
                Body { spec: &ce.spec, verdict: &ce.verdict },
            )?;
            fs::write(ctx.out.join("counterexample_profile.csv"), ce.profile.to_csv())?;
            FieldTable::new(&ce.grid).with_scalar("u1", &ce.map.u1).with_scalar("u2", &ce.map.u2).write(
                &ctx.out,
                "counterexample_map",
                "components u1 = H(r)x, u2 = H(r)y of the radial sector map",
                Some(p),
            )?;
            let v = &ce.verdict;
            println!(
                "radial: min det D2u1 = {:.6e}, min det D2u2 = {:.6e}, tolerance {:.6e}",
                v.min_det_u1, v.min_det_u2, v.tolerance
            );
            if !v.both_nonnegative {
                return Err(CliError::Numerical("a Hessian determinant is negative beyond tolerance".into()));
            }
        }
    }
    Ok(())
}

const SUMMARIES: [&str; 7] = [
    SOLVE_REPORT,
    "analysis.json",
    "quasiregularity.json",
    "coefficient_bound.json",
    "checks.json",
    "counterexample.json",
    "admissible_interval.json",
];

pub fn report(ctx: &Ctx) -> Result<(), CliError> {
    let mut out = String::new();
    for name in SUMMARIES {
        let path = ctx.out.join(name);
        if path.is_file() {
            out.push_str(&format!("== {name} ==\n"));
            out.push_str(&fs::read_to_string(path)?);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("no summaries in {}", ctx.out.display())));
    }
    fs::write(ctx.out.join("report.txt"), &out)?;
    print!("{out}");
    Ok(())
}
