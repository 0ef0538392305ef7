//! TOML run configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use pharmonic::field::{make_grid, Exponent, Extent, Field, Grid2D, PlanarMap, Shape};
use pharmonic::radial::{counterexample_map, integrate_radial, scalar_radial, Counterexample};
use pharmonic::solver::SolveOptions;
use pharmonic::verify::{CheckKind, IsoOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    /// Solve the Dirichlet problem; otherwise the boundary family is taken
    /// as the map itself.
    #[serde(default = "yes")]
    pub solve: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub boundary: Boundary,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub analyze: AnalyzeSpec,
    #[serde(default)]
    pub check: CheckSpec,
    #[serde(default)]
    pub radial: RadialSpec,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub extent: Extent,
    #[serde(default = "rectangle")]
    pub shape: Shape,
    pub nx: usize,
    pub ny: usize,
}

fn rectangle() -> Shape {
    Shape::Rectangle
}

/// `c·x^a·y^b`.
pub type Term = (u32, u32, f64);

fn poly(terms: &[Term], x: f64, y: f64) -> f64 {
    terms.iter().map(|&(a, b, c)| c * x.powi(a as i32) * y.powi(b as i32)).sum()
}

/// Boundary data, evaluated at every masked-in node.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Boundary {
    Polynomial {
        u1: Vec<Term>,
        u2: Vec<Term>,
    },
    /// Random polynomial of total degree `degree` from the run seed.
    Random {
        degree: u32,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// `(H(r)x, H(r)y)` with `H` integrated from `(h0, dh0)` at `r0`.
    RadialOde {
        r0: f64,
        r1: f64,
        h0: f64,
        dh0: f64,
        #[serde(default = "default_step")]
        step: f64,
    },
    /// `u¹ = c1·r^γ + c2` (or `c1 ln r + c2` at p = 2); `u²` is zero, a copy
    /// of `u¹`, or a polynomial.
    ScalarRadial {
        c1: f64,
        c2: f64,
        #[serde(default)]
        same: bool,
        #[serde(default)]
        u2: Vec<Term>,
    },
    /// `u¹ = inner` for `r < split` and `outer` beyond, about `center`.
    RadialStep {
        #[serde(default)]
        center: [f64; 2],
        split: f64,
        inner: f64,
        outer: f64,
        u2: Vec<Term>,
    },
    /// The sector map built for aperture `c`; brings its own grid.
    Counterexample {
        c: f64,
        #[serde(default = "default_sector_n")]
        n: usize,
    },
    /// Columns `x,y,u1,u2` over the masked-in nodes in index order, as
    /// written by `solve`.
    Csv {
        path: PathBuf,
    },
}

fn unit() -> f64 {
    1.0
}
fn default_step() -> f64 {
    1e-3
}
fn default_sector_n() -> usize {
    101
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSpec {
    /// Contour levels of `u¹`; seven evenly spaced interior values if empty.
    pub levels: Vec<f64>,
    pub fd_step: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSpec {
    pub run: Vec<CheckKind>,
    /// Checks whose violation does not fail the run.
    pub allow_violated: Vec<CheckKind>,
    pub allow_inconclusive: bool,
    pub ball: Option<Ball>,
    /// Levels for the length bound.
    pub levels: Vec<f64>,
    pub iso: IsoOptions,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            run: Vec::new(),
            allow_violated: Vec::new(),
            allow_inconclusive: true,
            ball: None,
            levels: Vec::new(),
            iso: IsoOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RadialMode {
    Profile,
    Counterexample,
    AdmissibleInterval,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadialSpec {
    pub mode: Option<RadialMode>,
    pub c: Option<f64>,
    pub n: usize,
    pub r0: f64,
    pub r1: f64,
    pub h0: f64,
    pub dh0: f64,
    pub step: f64,
}

impl Default for RadialSpec {
    fn default() -> Self {
        Self { mode: None, c: None, n: 101, r0: 1.0, r1: 2.0, h0: 1.0, dh0: 0.0, step: 1e-3 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        cfg.validate(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    fn validate(&self, base: &Path) -> Result<(), CliError> {
        Exponent::new(self.p).map_err(|e| CliError::Usage(format!("config field `p`: {e}")))?;
        self.solver.validate().map_err(|e| CliError::Usage(format!("config section `solver`: {e}")))?;
        if let Boundary::Csv { path } = &self.boundary {
            let full = base.join(path);
            if !full.is_file() {
                return Err(CliError::Usage(format!(
                    "config field `boundary.path`: {} does not exist",
                    full.display()
                )));
            }
        }
        if self.grid.is_none() && !matches!(self.boundary, Boundary::Counterexample { .. }) {
            return Err(CliError::Usage("config section `grid` is required for this boundary family".into()));
        }
        if let Some(b) = &self.check.ball {
            if !(b.radius > 0.0) {
                return Err(CliError::Usage("config field `check.ball.radius` must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn exponent(&self) -> Exponent {
        Exponent::new(self.p).expect("validated")
    }

    /// Grid and map the run starts from: boundary data for a solve, the
    /// finished map otherwise.
    pub fn initial_map(&self, base: &Path) -> Result<PlanarMap, CliError> {
        let p = self.exponent();
        if let Boundary::Counterexample { c, n } = self.boundary {
            let Counterexample { map, .. } = counterexample_map(self.p, c, n, 1.0)?;
            return Ok(map);
        }
        let grid = self.make_grid()?;
        Ok(match &self.boundary {
            Boundary::Polynomial { u1, u2 } => PlanarMap::from_fn(&grid, p, |x, y| (poly(u1, x, y), poly(u2, x, y))),
            Boundary::Random { degree, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut draw = || -> Vec<Term> {
                    let mut t = Vec::new();
                    for a in 0..=*degree {
                        for b in 0..=(*degree - a) {
                            t.push((a, b, amplitude * rng.gen_range(-1.0..1.0)));
                        }
                    }
                    t
                };
                let (u1, u2) = (draw(), draw());
                PlanarMap::from_fn(&grid, p, |x, y| (poly(&u1, x, y), poly(&u2, x, y)))
            }
            Boundary::RadialOde { r0, r1, h0, dh0, step } => integrate_radial(self.p, *r0, *r1, *h0, *dh0, *step)?.lift(&grid)?,
            Boundary::ScalarRadial { c1, c2, same, u2 } => {
                let v = scalar_radial(self.p, *c1, *c2)?.field(&grid)?;
                let w = if *same { v.clone() } else { Field::from_fn(&grid, |x, y| poly(u2, x, y)) };
                PlanarMap::new(v, w, p)?
            }
            Boundary::RadialStep { center, split, inner, outer, u2 } => PlanarMap::from_fn(&grid, p, |x, y| {
                let r = (x - center[0]).hypot(y - center[1]);
                (if r < *split { *inner } else { *outer }, poly(u2, x, y))
            }),
            Boundary::Csv { path } => read_boundary_csv(&grid, &base.join(path), p)?,
            Boundary::Counterexample { .. } => unreachable!(),
        })
    }

    fn make_grid(&self) -> Result<Arc<Grid2D>, CliError> {
        let g = self.grid.as_ref().expect("validated");
        make_grid(g.extent, g.shape, g.nx, g.ny).map_err(|e| CliError::Usage(format!("config section `grid`: {e}")))
    }
}

fn read_boundary_csv(grid: &Arc<Grid2D>, path: &Path, p: Exponent) -> Result<PlanarMap, CliError> {
    let bad = |msg: String| CliError::Usage(format!("boundary CSV {}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| bad(e.to_string()))?;
    let heads: Vec<String> = reader.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    let col = |name: &str| heads.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column {name}")));
    let (cx, cy, c1, c2) = (col("x")?, col("y")?, col("u1")?, col("u2")?);
    let mut u1 = vec![0.0; grid.len()];
    let mut u2 = vec![0.0; grid.len()];
    let mut nodes = (0..grid.len()).filter(|&k| grid.is_in(k));
    let tol = 1e-9 * (grid.hx() + grid.hy());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |c: usize| -> Result<f64, CliError> {
            rec.get(c).and_then(|s| s.parse().ok()).ok_or_else(|| bad(format!("row {row}: bad number in column {c}")))
        };
        let k = nodes.next().ok_or_else(|| bad("more rows than grid nodes".into()))?;
        let (x, y) = grid.xy(k);
        if (num(cx)? - x).abs() > tol || (num(cy)? - y).abs() > tol {
            return Err(bad(format!("row {row} is not at node ({x}, {y})")));
        }
        u1[k] = num(c1)?;
        u2[k] = num(c2)?;
    }
    if nodes.next().is_some() {
        return Err(bad("fewer rows than grid nodes".into()));
    }
    Ok(PlanarMap::new(Field::from_values(grid, u1)?, Field::from_values(grid, u2)?, p)?)
}
