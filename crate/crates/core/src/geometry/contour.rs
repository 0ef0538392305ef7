//! Marching squares over fully masked-in cells.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::field::io::fmt_f64;
use crate::field::{jets, Grid2D, Jet2, Masked, ScalarField};

use super::{curvature_at, CurvatureMode};

/// Where a vertex sits: `t` of the way from node `a` to node `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Station {
    pub a: usize,
    pub b: usize,
    pub t: f64,
}

impl Station {
    /// Linear blend of two node values; `None` if either is missing.
    pub fn lerp<T>(&self, field: &Masked<T>) -> Option<T>
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let a = (*field.at(self.a))?;
        if self.t == 0.0 {
            return Some(a);
        }
        Some(a * (1.0 - self.t) + (*field.at(self.b))? * self.t)
    }
}

/// One connected piece of `{u = s}`: a closed loop or a polyline ending
/// on the edge of the masked region. Oriented with `∇u` on the right.
#[derive(Clone, Debug, Serialize)]
pub struct LevelCurve {
    pub level: f64,
    pub closed: bool,
    pub vertices: Vec<[f64; 2]>,
    #[serde(skip)]
    pub stations: Vec<Station>,
    /// `|∇u|` interpolated from node jets, `None` near the mask edge.
    pub grad_norm: Vec<Option<f64>>,
    pub curvature: Vec<Option<f64>>,
    pub length: f64,
}

impl LevelCurve {
    pub fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        let m = if self.closed { n } else { n.saturating_sub(1) };
        (0..m).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Trapezoid weights: half the length of the two adjacent segments.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.vertices.len();
        let mut w = vec![0.0; n];
        for (i, (a, b)) in self.segments().enumerate() {
            let l = dist(a, b);
            w[i] += 0.5 * l;
            w[(i + 1) % n] += 0.5 * l;
        }
        w
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Node(usize),
    /// Edge from node `k` to its east (`true`) or north neighbour.
    Edge(usize, bool),
}

struct Crossing {
    key: Key,
    station: Station,
}

fn crossing(u: &ScalarField, s: f64, a: usize, b: usize, east: bool) -> Option<Crossing> {
    let (va, vb) = (*u.at(a), *u.at(b));
    if (va > s) == (vb > s) {
        return None;
    }
    let t = (s - va) / (vb - va);
    Some(if t <= 0.0 {
        Crossing { key: Key::Node(a), station: Station { a, b: a, t: 0.0 } }
    } else if t >= 1.0 {
        Crossing { key: Key::Node(b), station: Station { a: b, b, t: 0.0 } }
    } else {
        Crossing { key: Key::Edge(a, east), station: Station { a, b, t } }
    })
}

fn position(grid: &Grid2D, st: &Station) -> [f64; 2] {
    let (xa, ya) = grid.xy(st.a);
    let (xb, yb) = grid.xy(st.b);
    [xa + st.t * (xb - xa), ya + st.t * (yb - ya)]
}

struct Segment {
    ends: [Key; 2],
    cell: usize,
}

/// Bilinear gradient of the cell with lower-left node `k` at local `(tx, ty)`.
fn cell_gradient(u: &ScalarField, k: usize, tx: f64, ty: f64) -> [f64; 2] {
    let g = u.grid();
    let nx = g.nx();
    let (v00, v10, v01, v11) = (*u.at(k), *u.at(k + 1), *u.at(k + nx), *u.at(k + nx + 1));
    [
        ((v10 - v00) * (1.0 - ty) + (v11 - v01) * ty) / g.hx(),
        ((v01 - v00) * (1.0 - tx) + (v11 - v10) * tx) / g.hy(),
    ]
}

/// All curves of `{u = s}`, ordered by their first key. Empty when the
/// level is not crossed.
pub fn extract_level(u: &ScalarField, s: f64) -> Vec<LevelCurve> {
    let node_jets = jets(u);
    extract_level_with(u, &node_jets, s)
}

pub(crate) fn extract_level_with(u: &ScalarField, node_jets: &Masked<Jet2>, s: f64) -> Vec<LevelCurve> {
    let grid = u.grid();
    let nx = grid.nx();
    let mut stations: BTreeMap<Key, Station> = BTreeMap::new();
    let mut segments: Vec<Segment> = Vec::new();
    let mut seen: BTreeSet<(Key, Key)> = BTreeSet::new();

    for j in 0..grid.ny() - 1 {
        for i in 0..nx - 1 {
            let k00 = grid.index(i, j);
            let (k10, k01, k11) = (k00 + 1, k00 + nx, k00 + nx + 1);
            if ![k00, k10, k01, k11].iter().all(|&k| grid.is_in(k)) {
                continue;
            }
            // bottom, right, top, left
            let edges = [
                crossing(u, s, k00, k10, true),
                crossing(u, s, k10, k11, false),
                crossing(u, s, k01, k11, true),
                crossing(u, s, k00, k01, false),
            ];
            let hit: Vec<usize> = (0..4).filter(|&e| edges[e].is_some()).collect();
            let pairs: Vec<(usize, usize)> = match hit.len() {
                2 => vec![(hit[0], hit[1])],
                4 => {
                    let centre = 0.25 * (u.at(k00) + u.at(k10) + u.at(k01) + u.at(k11));
                    if (centre > s) == (*u.at(k00) > s) {
                        vec![(0, 1), (2, 3)]
                    } else {
                        vec![(3, 0), (1, 2)]
                    }
                }
                _ => vec![],
            };
            for (e1, e2) in pairs {
                let (c1, c2) = (edges[e1].as_ref().unwrap(), edges[e2].as_ref().unwrap());
                if c1.key == c2.key {
                    continue;
                }
                let sorted = if c1.key < c2.key { (c1.key, c2.key) } else { (c2.key, c1.key) };
                if !seen.insert(sorted) {
                    continue;
                }
                stations.insert(c1.key, c1.station);
                stations.insert(c2.key, c2.station);
                segments.push(Segment { ends: [c1.key, c2.key], cell: k00 });
            }
        }
    }

    let mut adjacency: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (n, seg) in segments.iter().enumerate() {
        adjacency.entry(seg.ends[0]).or_default().push(n);
        adjacency.entry(seg.ends[1]).or_default().push(n);
    }
    let mut used = vec![false; segments.len()];
    let odd: Vec<Key> = adjacency.iter().filter(|(_, v)| v.len() % 2 == 1).map(|(k, _)| *k).collect();
    let all: Vec<Key> = adjacency.keys().copied().collect();

    let mut curves = Vec::new();
    for start in odd.into_iter().chain(all) {
        while let Some(first) = adjacency[&start].iter().copied().find(|&n| !used[n]) {
            let mut keys = vec![start];
            let mut cells = Vec::new();
            let mut at = start;
            let mut next = Some(first);
            while let Some(n) = next {
                used[n] = true;
                let seg = &segments[n];
                at = if seg.ends[0] == at { seg.ends[1] } else { seg.ends[0] };
                keys.push(at);
                cells.push(seg.cell);
                next = adjacency[&at].iter().copied().find(|&m| !used[m]);
            }
            let closed = at == start && keys.len() > 2;
            if closed {
                keys.pop();
            }
            curves.push(build_curve(u, node_jets, s, &keys, &cells, &stations, closed));
        }
    }
    curves
}

fn build_curve(
    u: &ScalarField,
    node_jets: &Masked<Jet2>,
    s: f64,
    keys: &[Key],
    cells: &[usize],
    stations: &BTreeMap<Key, Station>,
    closed: bool,
) -> LevelCurve {
    let grid = u.grid();
    let mut st: Vec<Station> = keys.iter().map(|k| stations[k]).collect();
    let mut vertices: Vec<[f64; 2]> = st.iter().map(|s| position(grid, s)).collect();

    // Sign of Σ d × ∇u over segments: positive means ∇u is on the left.
    let mut turn = 0.0;
    for (n, &cell) in cells.iter().enumerate() {
        let (a, b) = (vertices[n], vertices[(n + 1) % vertices.len()]);
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let (x0, y0) = grid.xy(cell);
        let g = cell_gradient(u, cell, (mid[0] - x0) / grid.hx(), (mid[1] - y0) / grid.hy());
        turn += (b[0] - a[0]) * g[1] - (b[1] - a[1]) * g[0];
    }
    if turn > 0.0 {
        vertices.reverse();
        st.reverse();
    }

    let vertex_jets: Vec<Option<Jet2>> = st.iter().map(|s| s.lerp(node_jets)).collect();
    let grad_norm = vertex_jets.iter().map(|j| j.map(|j| j.grad_norm())).collect();
    let curvature = vertex_jets
        .iter()
        .map(|j| j.and_then(|j| curvature_at(&j, 2.0, CurvatureMode::Divergence)))
        .collect();
    let mut curve = LevelCurve { level: s, closed, vertices, stations: st, grad_norm, curvature, length: 0.0 };
    curve.length = crate::parallel::tree_sum(&curve.segments().map(|(a, b)| dist(a, b)).collect::<Vec<_>>());
    curve
}

/// SVG with one `<path>` per curve; `y` grows upward as in the grid.
pub fn curves_svg(grid: &Grid2D, curves: &[LevelCurve]) -> String {
    let e = grid.extent();
    let (w, h) = (e.x_max - e.x_min, e.y_max - e.y_min);
    let stroke = 0.002 * w.max(h);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        fmt_f64(e.x_min),
        fmt_f64(-e.y_max),
        fmt_f64(w),
        fmt_f64(h)
    );
    let _ = writeln!(out, r#"<g transform="scale(1,-1)" fill="none" stroke="black" stroke-width="{}">"#, fmt_f64(stroke));
    for c in curves {
        let mut d = String::new();
        for (n, v) in c.vertices.iter().enumerate() {
            let _ = write!(d, "{}{} {} ", if n == 0 { "M" } else { "L" }, fmt_f64(v[0]), fmt_f64(v[1]));
        }
        if c.closed {
            d.push('Z');
        }
        let _ = writeln!(out, r#"<path data-level="{}" d="{}"/>"#, fmt_f64(c.level), d.trim_end());
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// Rows `level,curve,vertex,x,y,grad_norm,curvature`; missing samples empty.
pub fn curves_csv(curves: &[LevelCurve]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut out = String::from("level,curve,closed,vertex,x,y,grad_norm,curvature\n");
    for (ci, c) in curves.iter().enumerate() {
        for (vi, v) in c.vertices.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{ci},{},{vi},{},{},{},{}",
                fmt_f64(c.level),
                c.closed,
                fmt_f64(v[0]),
                fmt_f64(v[1]),
                opt(c.grad_norm[vi]),
                opt(c.curvature[vi])
            );
        }
    }
    out
}
