//! Conforming triangulations of `Ω = D \ (D₁ ∪ D₂)`.
//!
//! The neck `|x'| ≤ R1` is a mapped tensor grid with a fixed number of
//! layers across the gap; the rest of the domain is a constrained Delaunay
//! triangulation that shares the stitch nodes at `|x'| = R1`. Symmetric
//! geometries are meshed on the upper half and mirrored, which makes the
//! discrete problem exactly symmetric.

mod neck;
mod outer;
pub mod sizing;

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GapGeometry, Mode};
use sizing::{curve_parameters, SizeField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    OuterD,
    InclusionD1,
    InclusionD2,
    /// Symmetry axis `r = 0` of an axisymmetric mesh.
    Axis,
}

impl BoundaryTag {
    fn mirrored(self) -> Self {
        match self {
            BoundaryTag::InclusionD1 => BoundaryTag::InclusionD2,
            BoundaryTag::InclusionD2 => BoundaryTag::InclusionD1,
            t => t,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryTag::OuterD => "OuterD",
            BoundaryTag::InclusionD1 => "InclusionD1",
            BoundaryTag::InclusionD2 => "InclusionD2",
            BoundaryTag::Axis => "Axis",
        })
    }
}

impl std::str::FromStr for BoundaryTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "OuterD" => BoundaryTag::OuterD,
            "InclusionD1" => BoundaryTag::InclusionD1,
            "InclusionD2" => BoundaryTag::InclusionD2,
            "Axis" => BoundaryTag::Axis,
            _ => return Err(Error::Config(format!("unknown boundary tag {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub mode: Mode,
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Marks triangles of the structured neck.
    pub neck: Vec<bool>,
    /// Oriented boundary edges (domain on the left) with their tag.
    pub boundary: Vec<([usize; 2], BoundaryTag)>,
    /// Layers across the gap of the structured neck; 0 when there is none.
    pub layers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshParams {
    pub layers: usize,
    pub grading_exponent: f64,
    pub target_outer_h: f64,
    /// Neck column spacing is `neck_step · δ(x')^g`.
    pub neck_step: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams {
            layers: 8,
            grading_exponent: 0.5,
            target_outer_h: 0.25,
            neck_step: 0.04,
        }
    }
}

impl MeshParams {
    pub fn check(&self) -> Result<()> {
        if self.layers < 4 {
            return Err(Error::Config(format!("mesh.layers must be at least 4, got {}", self.layers)));
        }
        let g = self.grading_exponent;
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::Config(format!("mesh.grading_exponent must lie in (0, 1], got {g}")));
        }
        for (name, v) in [("target_outer_h", self.target_outer_h), ("neck_step", self.neck_step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("mesh.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

const D1: u8 = 1;
const D2: u8 = 2;
const OUTER: u8 = 4;
const AXIS: u8 = 8;
const MIRROR: u8 = 16;

#[derive(Default)]
struct Builder {
    nodes: Vec<[f64; 2]>,
    masks: Vec<u8>,
}

impl Builder {
    fn add(&mut self, p: [f64; 2], mask: u8) -> usize {
        self.nodes.push(p);
        self.masks.push(mask);
        self.nodes.len() - 1
    }

    /// Interior nodes along a curve, spaced by the size field.
    fn curve(
        &mut self,
        size: &SizeField,
        hmax: f64,
        mask: u8,
        f: impl Fn(f64) -> [f64; 2],
    ) -> Vec<usize> {
        curve_parameters(&f, |p| size.size(p, hmax))
            .into_iter()
            .map(|t| self.add(f(t), mask))
            .collect()
    }
}

/// Start and end angles of the arc of the circle around `c` from `a` to `b`
/// that passes through angle `via`.
fn arc_angles(c: [f64; 2], a: [f64; 2], b: [f64; 2], via: f64) -> (f64, f64) {
    let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
    let mut tb = (b[1] - c[1]).atan2(b[0] - c[0]);
    while tb <= ta {
        tb += 2.0 * PI;
    }
    let mut v = via;
    while v < ta {
        v += 2.0 * PI;
    }
    while v >= ta + 2.0 * PI {
        v -= 2.0 * PI;
    }
    if v <= tb {
        (ta, tb)
    } else {
        (ta, tb - 2.0 * PI)
    }
}

fn arc(c: [f64; 2], r: f64, (t0, t1): (f64, f64)) -> impl Fn(f64) -> [f64; 2] {
    move |t| {
        let th = t0 + t * (t1 - t0);
        [c[0] + r * th.cos(), c[1] + r * th.sin()]
    }
}

fn segment(a: [f64; 2], b: [f64; 2]) -> impl Fn(f64) -> [f64; 2] {
    move |t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Builds the graded two-inclusion mesh.
pub fn generate_mesh(geom: &GapGeometry, params: &MeshParams) -> Result<Mesh> {
    params.check()?;
    geom.check()?;
    let l = params.layers;
    let axi = geom.mode == Mode::Axisymmetric;
    let half = geom.symmetric && l % 2 == 0;
    let r1 = geom.r1();
    let cap1 = geom.cap(true)?;
    let cap2 = geom.cap(false)?;
    let rout = geom.outer_radius;

    let pos = neck::columns(geom, params);
    let xs: Vec<f64> = if axi {
        pos
    } else {
        pos[1..]
            .iter()
            .rev()
            .map(|x| -x)
            .chain(pos.iter().copied())
            .collect()
    };
    let k0 = if half { l / 2 } else { 0 };
    let rows = l - k0;

    let mut b = Builder::default();
    let mut grid = vec![vec![0usize; rows + 1]; xs.len()];
    for (i, &x) in xs.iter().enumerate() {
        for k in k0..=l {
            let mut mask = 0;
            if k == l {
                mask |= D1;
            }
            if k == 0 {
                mask |= D2;
            }
            if half && k == k0 {
                mask |= MIRROR;
            }
            if axi && i == 0 {
                mask |= AXIS;
            }
            grid[i][k - k0] = b.add([x, neck::row_y(geom, x, k, l)], mask);
        }
    }
    let mut tris = Vec::new();
    for i in 0..xs.len() - 1 {
        for k in 0..rows {
            let q = [grid[i][k], grid[i + 1][k], grid[i + 1][k + 1], grid[i][k + 1]];
            tris.extend(neck::split_quad(&b.nodes, q));
        }
    }
    let n_neck = tris.len();

    let (ylo, yhi) = (geom.lower_y(r1), geom.upper_y(r1));
    let size = SizeField {
        stitches: if axi {
            vec![(r1, ylo, yhi)]
        } else {
            vec![(-r1, ylo, yhi), (r1, ylo, yhi)]
        },
        h0: geom.delta(r1) / l as f64,
        growth: 0.3,
    };
    let h_out = params.target_outer_h;
    let h_inc = h_out.min(0.1 * geom.inclusion_radius);
    let last = xs.len() - 1;
    let (xj1, xj2) = (cap1.junction, cap2.junction);
    let c1 = [0.0, cap1.centre];
    let c2 = [0.0, cap2.centre];
    let up = move |x0: f64, x1: f64| {
        move |t: f64| {
            let x = x0 + t * (x1 - x0);
            [x, geom.upper_y(x)]
        }
    };
    let lo = move |x0: f64, x1: f64| {
        move |t: f64| {
            let x = x0 + t * (x1 - x0);
            [x, geom.lower_y(x)]
        }
    };

    let mut lp: Vec<usize> = Vec::new();
    let mut loops = Vec::new();
    let top = rows;
    let a_top = grid[last][top];
    let pj1 = [xj1, geom.upper_y(xj1)];
    let pj2 = [xj2, geom.lower_y(xj2)];
    match (axi, half) {
        (false, false) => {
            let bj = b.add(pj1, D1);
            let cj = b.add([-xj1, pj1[1]], D1);
            let fj = b.add([-xj2, pj2[1]], D2);
            let gj = b.add(pj2, D2);
            lp.push(a_top);
            lp.extend(b.curve(&size, h_inc, D1, up(r1, xj1)));
            lp.push(bj);
            let ang = arc_angles(c1, pj1, [-xj1, pj1[1]], PI / 2.0);
            lp.extend(b.curve(&size, h_inc, D1, arc(c1, cap1.radius, ang)));
            lp.push(cj);
            lp.extend(b.curve(&size, h_inc, D1, up(-xj1, -r1)));
            lp.extend((1..=top).rev().map(|k| grid[0][k]));
            lp.push(grid[0][0]);
            lp.extend(b.curve(&size, h_inc, D2, lo(-r1, -xj2)));
            lp.push(fj);
            let ang = arc_angles(c2, [-xj2, pj2[1]], pj2, -PI / 2.0);
            lp.extend(b.curve(&size, h_inc, D2, arc(c2, cap2.radius, ang)));
            lp.push(gj);
            lp.extend(b.curve(&size, h_inc, D2, lo(xj2, r1)));
            lp.extend((0..top).map(|k| grid[last][k]));
            loops.push(std::mem::take(&mut lp));

            let o = b.add([rout, 0.0], OUTER);
            lp.push(o);
            lp.extend(b.curve(&size, h_out, OUTER, arc([0.0; 2], rout, (0.0, 2.0 * PI))));
            loops.push(std::mem::take(&mut lp));
        }
        (false, true) => {
            let o1 = b.add([rout, 0.0], OUTER | MIRROR);
            let o2 = b.add([-rout, 0.0], OUTER | MIRROR);
            let bj = b.add(pj1, D1);
            let cj = b.add([-xj1, pj1[1]], D1);
            lp.push(o1);
            lp.extend(b.curve(&size, h_out, OUTER, arc([0.0; 2], rout, (0.0, PI))));
            lp.push(o2);
            lp.extend(b.curve(&size, h_out, MIRROR, segment([-rout, 0.0], [-r1, 0.0])));
            lp.extend((0..top).map(|k| grid[0][k]));
            lp.push(grid[0][top]);
            lp.extend(b.curve(&size, h_inc, D1, up(-r1, -xj1)));
            lp.push(cj);
            let ang = arc_angles(c1, [-xj1, pj1[1]], pj1, PI / 2.0);
            lp.extend(b.curve(&size, h_inc, D1, arc(c1, cap1.radius, ang)));
            lp.push(bj);
            lp.extend(b.curve(&size, h_inc, D1, up(xj1, r1)));
            lp.extend((1..=top).rev().map(|k| grid[last][k]));
            lp.push(grid[last][0]);
            lp.extend(b.curve(&size, h_out, MIRROR, segment([r1, 0.0], [rout, 0.0])));
            loops.push(std::mem::take(&mut lp));
        }
        (true, false) => {
            let tout = b.add([0.0, rout], OUTER | AXIS);
            let bout = b.add([0.0, -rout], OUTER | AXIS);
            let t1 = [0.0, cap1.centre + cap1.radius];
            let b2 = [0.0, cap2.centre - cap2.radius];
            let t1i = b.add(t1, D1 | AXIS);
            let b2i = b.add(b2, D2 | AXIS);
            let bj = b.add(pj1, D1);
            let gj = b.add(pj2, D2);
            lp.push(bout);
            lp.extend(b.curve(&size, h_out, AXIS, segment([0.0, -rout], b2)));
            lp.push(b2i);
            let ang = arc_angles(c2, b2, pj2, 0.0);
            lp.extend(b.curve(&size, h_inc, D2, arc(c2, cap2.radius, ang)));
            lp.push(gj);
            lp.extend(b.curve(&size, h_inc, D2, lo(xj2, r1)));
            lp.extend((0..top).map(|k| grid[last][k]));
            lp.push(a_top);
            lp.extend(b.curve(&size, h_inc, D1, up(r1, xj1)));
            lp.push(bj);
            let ang = arc_angles(c1, pj1, t1, 0.0);
            lp.extend(b.curve(&size, h_inc, D1, arc(c1, cap1.radius, ang)));
            lp.push(t1i);
            lp.extend(b.curve(&size, h_out, AXIS, segment(t1, [0.0, rout])));
            lp.push(tout);
            lp.extend(b.curve(&size, h_out, OUTER, arc([0.0; 2], rout, (PI / 2.0, -PI / 2.0))));
            loops.push(std::mem::take(&mut lp));
        }
        (true, true) => {
            let t1 = [0.0, cap1.centre + cap1.radius];
            let t1i = b.add(t1, D1 | AXIS);
            let tout = b.add([0.0, rout], OUTER | AXIS);
            let o1 = b.add([rout, 0.0], OUTER | MIRROR);
            let bj = b.add(pj1, D1);
            lp.push(t1i);
            lp.extend(b.curve(&size, h_out, AXIS, segment(t1, [0.0, rout])));
            lp.push(tout);
            lp.extend(b.curve(&size, h_out, OUTER, arc([0.0; 2], rout, (PI / 2.0, 0.0))));
            lp.push(o1);
            lp.extend(b.curve(&size, h_out, MIRROR, segment([rout, 0.0], [r1, 0.0])));
            lp.extend((0..top).map(|k| grid[last][k]));
            lp.push(a_top);
            lp.extend(b.curve(&size, h_inc, D1, up(r1, xj1)));
            lp.push(bj);
            let ang = arc_angles(c1, pj1, t1, 0.0);
            lp.extend(b.curve(&size, h_inc, D1, arc(c1, cap1.radius, ang)));
            loops.push(std::mem::take(&mut lp));
        }
    }

    let outer_tris = outer::triangulate(&loops, &mut b.nodes, h_out)?;
    b.masks.resize(b.nodes.len(), 0);
    tris.extend(outer_tris);
    let mut neck_flags = vec![false; tris.len()];
    neck_flags[..n_neck].iter_mut().for_each(|f| *f = true);

    let boundary = tag_boundary(&b.nodes, &b.masks, &tris)?;
    let mut mesh = Mesh {
        mode: geom.mode,
        nodes: b.nodes,
        triangles: tris,
        neck: neck_flags,
        boundary,
        layers: l,
    };
    if half {
        mesh.mirror();
    }
    if axi {
        for p in &mut mesh.nodes {
            if p[0].abs() < 1e-14 {
                p[0] = 0.0;
            }
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Edges used by exactly one triangle, oriented with the triangle on the
/// left, sorted by their unordered key.
fn open_edges(tris: &[[usize; 3]]) -> Result<Vec<[usize; 2]>> {
    let mut all: Vec<([usize; 2], [usize; 2])> = Vec::with_capacity(3 * tris.len());
    for t in tris {
        for j in 0..3 {
            let (a, b) = (t[j], t[(j + 1) % 3]);
            all.push(([a.min(b), a.max(b)], [a, b]));
        }
    }
    all.sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        match j - i {
            1 => out.push(all[i].1),
            2 => {}
            _ => {
                return Err(Error::Mesh {
                    x: f64::NAN,
                    y: f64::NAN,
                    msg: format!("edge {:?} shared by {} triangles", all[i].0, j - i),
                })
            }
        }
        i = j;
    }
    Ok(out)
}

fn tag_boundary(
    nodes: &[[f64; 2]],
    masks: &[u8],
    tris: &[[usize; 3]],
) -> Result<Vec<([usize; 2], BoundaryTag)>> {
    let mut out = Vec::new();
    for e in open_edges(tris)? {
        let m = masks[e[0]] & masks[e[1]];
        if m & MIRROR != 0 && nodes[e[0]][1] == 0.0 && nodes[e[1]][1] == 0.0 {
            continue;
        }
        let tag = match m & !MIRROR {
            D1 => BoundaryTag::InclusionD1,
            D2 => BoundaryTag::InclusionD2,
            OUTER => BoundaryTag::OuterD,
            AXIS => BoundaryTag::Axis,
            _ => {
                let (p, q) = (nodes[e[0]], nodes[e[1]]);
                return Err(Error::mesh(
                    [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])],
                    "boundary edge does not belong to a single boundary curve",
                ));
            }
        };
        out.push((e, tag));
    }
    Ok(out)
}

fn area2(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1])
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn tri_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].map(|i| self.nodes[i])
    }

    pub fn area(&self, t: usize) -> f64 {
        let [p, q, r] = self.corners(t);
        0.5 * area2(p, q, r)
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [p, q, r] = self.corners(t);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Sorted, deduplicated nodes on edges with the given tag.
    pub fn tag_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary
            .iter()
            .filter(|(_, t)| *t == tag)
            .flat_map(|(e, _)| *e)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Nodes on the symmetry axis.
    pub fn axis_nodes(&self) -> Vec<usize> {
        self.tag_nodes(BoundaryTag::Axis)
    }

    /// Checks orientation, conformity and the boundary tag partition.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.neck.len() != self.triangles.len() {
            return Err(Error::mesh([f64::NAN; 2], "neck flags do not match the triangle count"));
        }
        let mut used = vec![false; n];
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::mesh([f64::NAN; 2], format!("triangle {t} has invalid indices {tri:?}")));
            }
            let a = self.area(t);
            if !(a > 0.0) {
                return Err(Error::mesh(
                    self.centroid(t),
                    format!("triangle {t} is inverted or degenerate (area {a:e})"),
                ));
            }
            tri.iter().for_each(|&i| used[i] = true);
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::mesh(self.nodes[i], format!("node {i} belongs to no triangle")));
        }
        let mut open: Vec<[usize; 2]> = open_edges(&self.triangles)?
            .into_iter()
            .map(|e| [e[0].min(e[1]), e[0].max(e[1])])
            .collect();
        open.sort_unstable();
        let mut tagged: Vec<[usize; 2]> = self
            .boundary
            .iter()
            .map(|(e, _)| [e[0].min(e[1]), e[0].max(e[1])])
            .collect();
        tagged.sort_unstable();
        if let Some(w) = tagged.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::mesh(self.nodes[w[0][0]], format!("edge {:?} tagged twice", w[0])));
        }
        if open != tagged {
            let stray = open
                .iter()
                .find(|e| tagged.binary_search(e).is_err())
                .or_else(|| tagged.iter().find(|e| open.binary_search(e).is_err()))
                .copied()
                .unwrap();
            let (p, q) = (self.nodes[stray[0]], self.nodes[stray[1]]);
            return Err(Error::mesh(
                [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])],
                format!("boundary edge {stray:?} is untagged or tagged edge is interior"),
            ));
        }
        if self.mode == Mode::Axisymmetric {
            if let Some(p) = self.nodes.iter().find(|p| p[0] < 0.0) {
                return Err(Error::mesh(*p, "axisymmetric node with r < 0"));
            }
            for (e, t) in &self.boundary {
                if *t == BoundaryTag::Axis && (self.nodes[e[0]][0] != 0.0 || self.nodes[e[1]][0] != 0.0) {
                    return Err(Error::mesh(self.nodes[e[0]], "axis edge off r = 0"));
                }
            }
        }
        Ok(())
    }

    /// Reflects across `x_n = 0`, reusing nodes on the mirror line.
    fn mirror(&mut self) {
        let n0 = self.nodes.len();
        let mut map = vec![0usize; n0];
        for i in 0..n0 {
            let p = self.nodes[i];
            map[i] = if p[1] == 0.0 {
                i
            } else {
                self.nodes.push([p[0], -p[1]]);
                self.nodes.len() - 1
            };
        }
        let t0 = self.triangles.len();
        for t in 0..t0 {
            let [a, b, c] = self.triangles[t];
            self.triangles.push([map[a], map[c], map[b]]);
            self.neck.push(self.neck[t]);
        }
        let b0 = self.boundary.len();
        for k in 0..b0 {
            let ([a, b], tag) = self.boundary[k];
            self.boundary.push(([map[b], map[a]], tag.mirrored()));
        }
    }

    /// Uniform midpoint refinement: each triangle becomes four.
    pub fn refine(&self) -> Mesh {
        self.refine_with(None)
    }

    /// Midpoint refinement that snaps new boundary nodes with `project`.
    pub fn refine_projected(&self, project: &dyn Fn(BoundaryTag, [f64; 2]) -> [f64; 2]) -> Mesh {
        self.refine_with(Some(project))
    }

    fn refine_with(&self, project: Option<&dyn Fn(BoundaryTag, [f64; 2]) -> [f64; 2]>) -> Mesh {
        let mut nodes = self.nodes.clone();
        let mut mids: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * self.triangles.len() / 2);
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| {
            let key = (a.min(b), a.max(b));
            *mids.entry(key).or_insert_with(|| {
                let (p, q) = (nodes[a], nodes[b]);
                nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut neck = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
            neck.extend([self.neck[t]; 4]);
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for &([a, b], tag) in &self.boundary {
            let m = mid(a, b, &mut nodes);
            if let Some(f) = project {
                nodes[m] = f(tag, nodes[m]);
            }
            boundary.push(([a, m], tag));
            boundary.push(([m, b], tag));
        }
        Mesh {
            mode: self.mode,
            nodes,
            triangles,
            neck,
            boundary,
            layers: self.layers,
        }
    }

    /// Plain-text export, see the crate README for the format.
    pub fn write_text(&self, w: &mut dyn Write) -> std::io::Result<()> {
        let mode = match self.mode {
            Mode::Planar => "planar",
            Mode::Axisymmetric => "axisymmetric",
        };
        writeln!(w, "# neckfield mesh v1 mode={mode} layers={}", self.layers)?;
        writeln!(w, "{}", self.nodes.len())?;
        for p in &self.nodes {
            writeln!(w, "{:e} {:e}", p[0], p[1])?;
        }
        writeln!(w, "{}", self.triangles.len())?;
        for (t, n) in self.triangles.iter().zip(&self.neck) {
            writeln!(w, "{} {} {} {}", t[0], t[1], t[2], u8::from(*n))?;
        }
        writeln!(w, "{}", self.boundary.len())?;
        for (e, tag) in &self.boundary {
            writeln!(w, "{} {} {tag}", e[0], e[1])?;
        }
        Ok(())
    }

    pub fn read_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |ln: usize, msg: &str| Error::Config(format!("mesh line {}: {msg}", ln + 1));
        let (ln, header) = lines.next().ok_or_else(|| err(0, "empty file"))?;
        let mut mode = None;
        let mut layers = 0;
        if !header.starts_with("# neckfield mesh v1") {
            return Err(err(ln, "missing `# neckfield mesh v1` header"));
        }
        for kv in header.split_whitespace() {
            match kv.split_once('=') {
                Some(("mode", "planar")) => mode = Some(Mode::Planar),
                Some(("mode", "axisymmetric")) => mode = Some(Mode::Axisymmetric),
                Some(("layers", v)) => layers = v.parse().map_err(|_| err(ln, "bad layers"))?,
                Some((k, _)) => return Err(err(ln, &format!("unknown header key {k}"))),
                None => {}
            }
        }
        let mode = mode.ok_or_else(|| err(ln, "header lacks mode"))?;
        let mut lines = lines.filter(|(_, l)| !l.starts_with('#'));
        let mut next = || lines.next();
        fn fields(l: &str) -> Vec<&str> {
            l.split_whitespace().collect()
        }
        let (ln, l) = next().ok_or_else(|| err(0, "missing node count"))?;
        let nn: usize = l.trim().parse().map_err(|_| err(ln, "bad node count"))?;
        let mut nodes = Vec::with_capacity(nn);
        for _ in 0..nn {
            let (ln, l) = next().ok_or_else(|| err(0, "truncated node list"))?;
            let f = fields(l);
            if f.len() != 2 {
                return Err(err(ln, "expected `x y`"));
            }
            let x = f[0].parse().map_err(|_| err(ln, "bad x"))?;
            let y = f[1].parse().map_err(|_| err(ln, "bad y"))?;
            nodes.push([x, y]);
        }
        let (ln, l) = next().ok_or_else(|| err(0, "missing triangle count"))?;
        let nt: usize = l.trim().parse().map_err(|_| err(ln, "bad triangle count"))?;
        let mut triangles = Vec::with_capacity(nt);
        let mut neck = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = next().ok_or_else(|| err(0, "truncated triangle list"))?;
            let f = fields(l);
            if f.len() != 3 && f.len() != 4 {
                return Err(err(ln, "expected `i j k [neck]`"));
            }
            let mut t = [0usize; 3];
            for (s, v) in t.iter_mut().zip(&f) {
                *s = v.parse().map_err(|_| err(ln, "bad index"))?;
            }
            triangles.push(t);
            neck.push(f.get(3).is_some_and(|v| *v == "1"));
        }
        let (ln, l) = next().ok_or_else(|| err(0, "missing boundary count"))?;
        let nb: usize = l.trim().parse().map_err(|_| err(ln, "bad boundary count"))?;
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (ln, l) = next().ok_or_else(|| err(0, "truncated boundary list"))?;
            let f = fields(l);
            if f.len() != 3 {
                return Err(err(ln, "expected `i j TAG`"));
            }
            let a = f[0].parse().map_err(|_| err(ln, "bad index"))?;
            let b = f[1].parse().map_err(|_| err(ln, "bad index"))?;
            boundary.push(([a, b], f[2].parse()?));
        }
        let mesh = Mesh {
            mode,
            nodes,
            triangles,
            neck,
            boundary,
            layers,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_text(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Mesh::read_text(&text)
    }
}

/// Boundary projector snapping refined nodes onto the exact curves.
pub fn projector(geom: &GapGeometry) -> Result<impl Fn(BoundaryTag, [f64; 2]) -> [f64; 2] + '_> {
    let c1 = geom.cap(true)?;
    let c2 = geom.cap(false)?;
    Ok(move |tag: BoundaryTag, p: [f64; 2]| match tag {
        BoundaryTag::OuterD => geom.project_outer(p),
        BoundaryTag::InclusionD1 => geom.project_inclusion(true, &c1, p),
        BoundaryTag::InclusionD2 => geom.project_inclusion(false, &c2, p),
        BoundaryTag::Axis => p,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshQuality {
    /// Smallest interior angle in degrees.
    pub min_angle: f64,
    /// Largest `longest edge / matching altitude`.
    pub max_aspect: f64,
    /// Number of fibers per layer count.
    pub layer_histogram: BTreeMap<usize, usize>,
    pub min_layers: Option<usize>,
    pub node_count: usize,
    pub tri_count: usize,
}

/// Angle and aspect metrics plus the neck layer histogram.
///
/// Fibers are vertical lines through the midpoints between consecutive
/// neck node abscissae; each layer of the mapped grid contributes two
/// triangles to a fiber.
pub fn check_quality(mesh: &Mesh) -> MeshQuality {
    let mut min_angle = 180.0f64;
    let mut max_aspect = 0.0f64;
    for t in 0..mesh.tri_count() {
        let c = mesh.corners(t);
        let e: Vec<[f64; 2]> = (0..3)
            .map(|i| [c[(i + 1) % 3][0] - c[i][0], c[(i + 1) % 3][1] - c[i][1]])
            .collect();
        let len: Vec<f64> = e.iter().map(|v| v[0].hypot(v[1])).collect();
        for i in 0..3 {
            let (u, v) = (e[i], e[(i + 2) % 3]);
            let cos = -(u[0] * v[0] + u[1] * v[1]) / (len[i] * len[(i + 2) % 3]);
            min_angle = min_angle.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
        }
        let lmax = len.iter().cloned().fold(0.0, f64::max);
        let alt = 2.0 * mesh.area(t).abs() / lmax;
        max_aspect = max_aspect.max(lmax / alt);
    }

    let neck: Vec<usize> = (0..mesh.tri_count()).filter(|&t| mesh.neck[t]).collect();
    let mut xs: Vec<f64> = neck
        .iter()
        .flat_map(|&t| mesh.triangles[t])
        .map(|i| mesh.nodes[i][0])
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let fibers: Vec<f64> = xs.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut crossings = vec![0usize; fibers.len()];
    for &t in &neck {
        let c = mesh.corners(t);
        let lo = c.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let a = fibers.partition_point(|&f| f <= lo);
        let b = fibers.partition_point(|&f| f < hi);
        crossings[a..b].iter_mut().for_each(|k| *k += 1);
    }
    let mut layer_histogram = BTreeMap::new();
    for c in &crossings {
        *layer_histogram.entry(c / 2).or_insert(0) += 1;
    }
    MeshQuality {
        min_angle,
        max_aspect,
        min_layers: layer_histogram.keys().next().copied(),
        layer_histogram,
        node_count: mesh.node_count(),
        tri_count: mesh.tri_count(),
    }
}

fn circle_loop(b: &mut Builder, c: [f64; 2], r: f64, n: usize, mask: u8) -> Vec<usize> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            b.add([c[0] + r * t.cos(), c[1] + r * t.sin()], mask)
        })
        .collect()
}

fn debug_mesh(b: Builder, loops: Vec<Vec<usize>>, h: f64) -> Result<Mesh> {
    let mut b = b;
    let tris = outer::triangulate(&loops, &mut b.nodes, h)?;
    b.masks.resize(b.nodes.len(), 0);
    let boundary = tag_boundary(&b.nodes, &b.masks, &tris)?;
    let mesh = Mesh {
        mode: Mode::Planar,
        neck: vec![false; tris.len()],
        nodes: b.nodes,
        triangles: tris,
        boundary,
        layers: 0,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Quality disk of the given radius with boundary spacing `h` and no
/// inclusions; all boundary edges are tagged `OuterD`.
pub fn disk_mesh(radius: f64, h: f64) -> Result<Mesh> {
    let mut b = Builder::default();
    let n = ((2.0 * PI * radius / h).ceil() as usize).max(8);
    let lp = circle_loop(&mut b, [0.0, 0.0], radius, n, OUTER);
    debug_mesh(b, vec![lp], h)
}

/// Annulus `r_in < |x| < r_out` with `n` nodes on each circle; the inner
/// circle is tagged `InclusionD1`.
pub fn annulus_mesh(r_in: f64, r_out: f64, n: usize) -> Result<Mesh> {
    if !(0.0 < r_in && r_in < r_out) {
        return Err(Error::Geometry(format!("annulus needs 0 < r_in < r_out, got {r_in}, {r_out}")));
    }
    let mut b = Builder::default();
    let inner = circle_loop(&mut b, [0.0, 0.0], r_in, n, D1);
    let outer = circle_loop(&mut b, [0.0, 0.0], r_out, n, OUTER);
    debug_mesh(b, vec![inner, outer], 2.0 * PI * r_out / n as f64)
}

/// Projector for [`annulus_mesh`].
pub fn annulus_projector(r_in: f64, r_out: f64) -> impl Fn(BoundaryTag, [f64; 2]) -> [f64; 2] {
    move |tag, p| {
        let r = p[0].hypot(p[1]);
        let s = if tag == BoundaryTag::InclusionD1 { r_in } else { r_out } / r;
        [p[0] * s, p[1] * s]
    }
}
