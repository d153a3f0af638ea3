//! Two-inclusion gap geometries.
//!
//! Near the origin each inclusion boundary is the graph of a radial profile:
//! the upper one is `x_n = ε/2 + h₁(x')`, the lower one `x_n = -ε/2 - h₂(x')`
//! where `h₂` is stored as a nonnegative function. Away from the neck the
//! graph is closed off by a circular cap that is tangent to it at the
//! junction.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact positive rational, used for the convexity order `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Order {
    pub num: u32,
    pub den: u32,
}

impl Order {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain("order denominator must be nonzero".into()));
        }
        let g = gcd(num, den);
        Ok(Order {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(m: u32) -> Self {
        Order { num: m, den: 1 }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Exact three-way comparison against an integer.
    pub fn cmp_int(self, k: u32) -> std::cmp::Ordering {
        (self.num as u64).cmp(&(k as u64 * self.den as u64))
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl std::str::FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("cannot parse order {s:?}, expected \"p\" or \"p/q\""));
        match s.trim().split_once('/') {
            Some((p, q)) => Order::new(
                p.trim().parse().map_err(|_| bad())?,
                q.trim().parse().map_err(|_| bad())?,
            ),
            None => Ok(Order::integer(s.trim().parse().map_err(|_| bad())?)),
        }
    }
}

impl Serialize for Order {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.den == 1 {
            s.serialize_u32(self.num)
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Order {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(m) => Ok(Order::integer(m)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `κ r^{1+α}`.
    HolderPower { alpha: f64, kappa: f64 },
    /// `λ r^m`.
    PowerM { m: Order, lambda: f64 },
    /// Zero on `r ≤ r0`, then `κ (r - r0)²`. A positive `collar` replaces
    /// the first stretch by a cubic so the second derivative is continuous.
    FlatPlateau { r0: f64, kappa: f64, collar: f64 },
}

/// Radial gap profile `h(x') = f(|x'|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Profile {
    #[serde(flatten)]
    pub kind: ProfileKind,
    /// Neck half-width `R1`.
    pub r1: f64,
}

impl Profile {
    pub fn holder(alpha: f64, kappa: f64, r1: f64) -> Self {
        Profile {
            kind: ProfileKind::HolderPower { alpha, kappa },
            r1,
        }
    }

    pub fn power(m: Order, lambda: f64, r1: f64) -> Self {
        Profile {
            kind: ProfileKind::PowerM { m, lambda },
            r1,
        }
    }

    pub fn flat(r0: f64, kappa: f64, r1: f64) -> Self {
        Profile {
            kind: ProfileKind::FlatPlateau {
                r0,
                kappa,
                collar: 0.0,
            },
            r1,
        }
    }

    pub fn check(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Geometry(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.r1, "R1")?;
        match self.kind {
            ProfileKind::HolderPower { alpha, kappa } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::Geometry(format!("alpha must lie in (0, 1), got {alpha}")));
                }
                pos(kappa, "kappa")
            }
            ProfileKind::PowerM { m, lambda } => {
                if m.cmp_int(2).is_lt() {
                    return Err(Error::Geometry(format!("m must be at least 2, got {m}")));
                }
                pos(lambda, "lambda")
            }
            ProfileKind::FlatPlateau { r0, kappa, collar } => {
                pos(r0, "r0")?;
                pos(kappa, "kappa")?;
                if !(collar >= 0.0 && collar.is_finite()) {
                    return Err(Error::Geometry(format!("collar must be nonnegative, got {collar}")));
                }
                if r0 >= self.r1 {
                    return Err(Error::Geometry(format!(
                        "plateau radius r0={r0} must be smaller than R1={}",
                        self.r1
                    )));
                }
                Ok(())
            }
        }
    }

    /// `f(r)` for `r ≥ 0`, with no range check.
    pub fn f(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::HolderPower { alpha, kappa } => kappa * r.powf(1.0 + alpha),
            ProfileKind::PowerM { m, lambda } => lambda * r.powf(m.value()),
            ProfileKind::FlatPlateau { r0, kappa, collar } => {
                let s = r - r0;
                if s <= 0.0 {
                    0.0
                } else if s < collar {
                    kappa * s * s * s / (3.0 * collar)
                } else {
                    let t = s - collar;
                    kappa * collar * collar / 3.0 + kappa * collar * t + kappa * t * t
                }
            }
        }
    }

    /// `f'(r)`.
    pub fn df(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::HolderPower { alpha, kappa } => (1.0 + alpha) * kappa * r.powf(alpha),
            ProfileKind::PowerM { m, lambda } => {
                let m = m.value();
                m * lambda * r.powf(m - 1.0)
            }
            ProfileKind::FlatPlateau { r0, kappa, collar } => {
                let s = r - r0;
                if s <= 0.0 {
                    0.0
                } else if s < collar {
                    kappa * s * s / collar
                } else {
                    kappa * collar + 2.0 * kappa * (s - collar)
                }
            }
        }
    }

    /// `f''(r)`; infinite at the origin for Hölder profiles.
    pub fn d2f(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::HolderPower { alpha, kappa } => {
                (1.0 + alpha) * alpha * kappa * r.powf(alpha - 1.0)
            }
            ProfileKind::PowerM { m, lambda } => {
                let m = m.value();
                m * (m - 1.0) * lambda * r.powf(m - 2.0)
            }
            ProfileKind::FlatPlateau { r0, kappa, collar } => {
                let s = r - r0;
                if s <= 0.0 {
                    0.0
                } else if s < collar {
                    2.0 * kappa * s / collar
                } else {
                    2.0 * kappa
                }
            }
        }
    }

    /// Signed one-dimensional derivative `d/dx f(|x|)`.
    pub fn slope(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            x.signum() * self.df(x.abs())
        }
    }

    /// Radius of the contact set where the profile vanishes.
    pub fn plateau_radius(&self) -> f64 {
        match self.kind {
            ProfileKind::FlatPlateau { r0, .. } => r0,
            _ => 0.0,
        }
    }

    fn check_range(&self, xprime: f64) -> Result<()> {
        let lim = 2.0 * self.r1;
        if xprime.is_finite() && xprime.abs() <= lim * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "|x'| = {} outside the profile range [0, 2R1] = [0, {lim}]",
                xprime.abs()
            )))
        }
    }
}

/// `h(x')` for `|x'| ≤ 2R1`.
pub fn eval_h(profile: &Profile, xprime: f64) -> Result<f64> {
    profile.check_range(xprime)?;
    Ok(profile.f(xprime.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `n = 2`, coordinates `(x₁, x₂)`.
    Planar,
    /// `n = 3` with rotational symmetry about the `x_n` axis, solved in
    /// the meridian half-plane `(r, z)`.
    Axisymmetric,
}

impl Mode {
    pub fn dim(self) -> u32 {
        match self {
            Mode::Planar => 2,
            Mode::Axisymmetric => 3,
        }
    }
}

/// The full two-inclusion problem geometry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapGeometry {
    pub upper: Profile,
    /// Stored nonnegative; the physical wall is `x_n = -ε/2 - h₂(x')`.
    pub lower: Profile,
    pub eps: f64,
    pub inclusion_radius: f64,
    pub outer_radius: f64,
    pub symmetric: bool,
    pub mode: Mode,
}

/// Circular closure of one inclusion. The centre lies on the axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cap {
    /// `|x'|` where the graph hands over to the arc.
    pub junction: f64,
    /// Signed `x_n` of the centre.
    pub centre: f64,
    pub radius: f64,
}

impl GapGeometry {
    /// Mirror-symmetric pair sharing one profile.
    pub fn symmetric(
        profile: Profile,
        eps: f64,
        inclusion_radius: f64,
        outer_radius: f64,
        mode: Mode,
    ) -> Self {
        GapGeometry {
            upper: profile,
            lower: profile,
            eps,
            inclusion_radius,
            outer_radius,
            symmetric: true,
            mode,
        }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        GapGeometry { eps, ..self.clone() }
    }

    /// Neck half-width; the smaller of the two profiles' `R1`.
    pub fn r1(&self) -> f64 {
        self.upper.r1.min(self.lower.r1)
    }

    pub fn dim(&self) -> u32 {
        self.mode.dim()
    }

    /// Checks parameters, positivity of the gap and containment.
    pub fn check(&self) -> Result<()> {
        self.upper.check()?;
        self.lower.check()?;
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Geometry(format!("eps must be positive, got {}", self.eps)));
        }
        if self.symmetric && self.upper != self.lower {
            return Err(Error::Geometry(
                "symmetric geometry requires identical upper and lower profiles".into(),
            ));
        }
        let r1 = self.r1();
        for i in 0..=200 {
            let x = 2.0 * r1 * i as f64 / 200.0;
            self.gap_width(x)?;
        }
        let c1 = self.cap(true)?;
        let c2 = self.cap(false)?;
        let reach = (c1.centre.abs() + c1.radius).max(c2.centre.abs() + c2.radius);
        if reach >= self.outer_radius {
            return Err(Error::Construction(format!(
                "inclusions reach |x| = {reach:.6} but the outer radius is {}",
                self.outer_radius
            )));
        }
        Ok(())
    }

    /// `x_n` of the upper wall above `x'` (graph part only).
    pub fn upper_y(&self, x: f64) -> f64 {
        0.5 * self.eps + self.upper.f(x.abs())
    }

    /// `x_n` of the lower wall below `x'` (graph part only).
    pub fn lower_y(&self, x: f64) -> f64 {
        -0.5 * self.eps - self.lower.f(x.abs())
    }

    /// `δ(x') = ε + h₁(x') - h₂(x')` in the signed convention.
    pub fn gap_width(&self, xprime: f64) -> Result<f64> {
        self.upper.check_range(xprime)?;
        self.lower.check_range(xprime)?;
        let d = self.delta(xprime);
        if d > 0.0 {
            Ok(d)
        } else {
            Err(Error::Geometry(format!(
                "inclusions overlap at x' = {xprime}: gap width {d}"
            )))
        }
    }

    /// Unchecked gap width.
    pub fn delta(&self, x: f64) -> f64 {
        let r = x.abs();
        self.eps + self.upper.f(r) + self.lower.f(r)
    }

    /// Radius of the common flat contact set.
    pub fn plateau_radius(&self) -> f64 {
        self.upper.plateau_radius().min(self.lower.plateau_radius())
    }

    /// `|Σ'|`: plateau length `2r0` when planar, disk area `πr0²` when
    /// axisymmetric.
    pub fn sigma_area(&self) -> f64 {
        let r0 = self.plateau_radius();
        match self.mode {
            Mode::Planar => 2.0 * r0,
            Mode::Axisymmetric => std::f64::consts::PI * r0 * r0,
        }
    }

    pub fn p1(&self) -> [f64; 2] {
        [0.0, 0.5 * self.eps]
    }

    pub fn p2(&self) -> [f64; 2] {
        [0.0, -0.5 * self.eps]
    }

    /// Tangent-matched circular cap for the upper (`true`) or lower inclusion.
    pub fn cap(&self, upper: bool) -> Result<Cap> {
        let p = if upper { &self.upper } else { &self.lower };
        let big_r = self.inclusion_radius;
        if !(big_r.is_finite() && big_r > 0.0) {
            return Err(Error::Geometry(format!(
                "inclusion_radius must be positive, got {big_r}"
            )));
        }
        // Centre-on-axis radius of the circle tangent to the graph at r.
        let g = |r: f64| {
            let s = p.df(r);
            if s <= 0.0 {
                f64::INFINITY
            } else {
                r * (1.0 + s * s).sqrt() / s - big_r
            }
        };
        let (lo, hi) = (p.r1, 2.0 * p.r1);
        let n = 400;
        let mut a = lo;
        let mut ga = g(a);
        let mut bracket = None;
        if ga == 0.0 {
            bracket = Some((a, a));
        }
        for i in 1..=n {
            if bracket.is_some() {
                break;
            }
            let b = lo + (hi - lo) * i as f64 / n as f64;
            let gb = g(b);
            if ga.is_finite() && gb.is_finite() && (ga <= 0.0) != (gb <= 0.0) {
                bracket = Some((a, b));
            }
            (a, ga) = (b, gb);
        }
        let Some((mut a, mut b)) = bracket else {
            return Err(Error::Construction(format!(
                "no tangent-matched cap of radius {big_r} meets the {} graph on [R1, 2R1] = [{lo}, {hi}]",
                if upper { "upper" } else { "lower" }
            )));
        };
        let sa = g(a) <= 0.0;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            if (g(m) <= 0.0) == sa {
                a = m;
            } else {
                b = m;
            }
        }
        let xj = 0.5 * (a + b);
        let s = p.df(xj);
        let yc = 0.5 * self.eps + p.f(xj) + big_r / (1.0 + s * s).sqrt();
        Ok(Cap {
            junction: xj,
            centre: if upper { yc } else { -yc },
            radius: big_r,
        })
    }

    /// Closest point on the upper (`true`) or lower inclusion boundary,
    /// used to snap refined boundary nodes back onto the exact curve.
    pub fn project_inclusion(&self, upper: bool, cap: &Cap, p: [f64; 2]) -> [f64; 2] {
        let xj = cap.junction;
        let on_graph = p[0].abs() <= xj
            && if upper {
                p[1] <= self.upper_y(xj) + 1e-12
            } else {
                p[1] >= self.lower_y(xj) - 1e-12
            };
        if on_graph {
            let y = if upper {
                self.upper_y(p[0])
            } else {
                self.lower_y(p[0])
            };
            [p[0], y]
        } else {
            let dx = p[0];
            let dy = p[1] - cap.centre;
            let r = dx.hypot(dy);
            [dx * cap.radius / r, cap.centre + dy * cap.radius / r]
        }
    }

    pub fn project_outer(&self, p: [f64; 2]) -> [f64; 2] {
        let r = p[0].hypot(p[1]);
        [p[0] * self.outer_radius / r, p[1] * self.outer_radius / r]
    }
}

/// Dirichlet data on `∂D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryData {
    Constant { value: f64 },
    LinearXn,
    LinearX1,
    /// `Σ c_k x_n^k`.
    Polynomial { coeffs: Vec<f64> },
}

impl BoundaryData {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match self {
            BoundaryData::Constant { value } => *value,
            BoundaryData::LinearXn => p[1],
            BoundaryData::LinearX1 => p[0],
            BoundaryData::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * p[1] + c)
            }
        }
    }

    pub fn check(&self, mode: Mode) -> Result<()> {
        match (self, mode) {
            (BoundaryData::LinearX1, Mode::Axisymmetric) => Err(Error::Config(
                "phi = x1 is not rotationally symmetric; axisymmetric mode accepts only x_n-dependent data"
                    .into(),
            )),
            (BoundaryData::Constant { value }, _) if !value.is_finite() => {
                Err(Error::Config(format!("phi constant must be finite, got {value}")))
            }
            (BoundaryData::Polynomial { coeffs }, _) if coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::Config("phi polynomial coefficients must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether the data is odd under `x_n ↦ -x_n`.
    pub fn is_odd_in_xn(&self) -> bool {
        match self {
            BoundaryData::Constant { value } => *value == 0.0,
            BoundaryData::LinearXn => true,
            BoundaryData::LinearX1 => false,
            BoundaryData::Polynomial { coeffs } => {
                coeffs.iter().step_by(2).all(|&c| c == 0.0)
            }
        }
    }
}

/// Closed, counter-clockwise boundary polylines. The closing point is not
/// repeated.
#[derive(Clone, Debug, Default)]
pub struct Curves {
    pub d1: Vec<[f64; 2]>,
    pub d2: Vec<[f64; 2]>,
    pub outer: Vec<[f64; 2]>,
}

impl Curves {
    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "tag"])?;
        for (tag, pts) in [("D1", &self.d1), ("D2", &self.d2), ("D", &self.outer)] {
            for p in pts {
                w.write_record([format!("{:e}", p[0]), format!("{:e}", p[1]), tag.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Default chord tolerance relative to `ε`.
const CHORD_TOL_REL: f64 = 1e-3;

/// Boundary polylines for `∂D₁`, `∂D₂` and `∂D`.
pub fn build_geometry(geom: &GapGeometry) -> Result<Curves> {
    build_geometry_with(geom, CHORD_TOL_REL * geom.eps)
}

/// As [`build_geometry`] with an explicit chord (sagitta) tolerance.
pub fn build_geometry_with(geom: &GapGeometry, chord_tol: f64) -> Result<Curves> {
    geom.check()?;
    let d1 = inclusion_polyline(geom, true, chord_tol)?;
    let d2 = inclusion_polyline(geom, false, chord_tol)?;
    let step = 0.02 * geom.inclusion_radius;
    let n = ((2.0 * std::f64::consts::PI * geom.outer_radius / step).ceil() as usize).max(64);
    let outer = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            [geom.outer_radius * t.cos(), geom.outer_radius * t.sin()]
        })
        .collect();
    Ok(Curves { d1, d2, outer })
}

/// Samples `x ∈ [0, xj]` of the graph of one inclusion.
fn graph_abscissae(geom: &GapGeometry, upper: bool, xj: f64, chord_tol: f64) -> Vec<f64> {
    let p = if upper { &geom.upper } else { &geom.lower };
    let cap_step = 0.02 * geom.inclusion_radius;
    let mut xs = vec![0.0];
    let mut x = 0.0;
    while x < xj {
        let bound = (0.05 * geom.delta(x)).min(cap_step);
        let mut h = bound;
        loop {
            let b = (x + h).min(xj);
            let mid = 0.5 * (x + b);
            let sag = (p.f(mid) - 0.5 * (p.f(x) + p.f(b))).abs();
            let chord = (b - x).hypot(p.f(b) - p.f(x));
            if (sag <= chord_tol && chord <= bound) || h < 1e-14 {
                break;
            }
            h *= 0.5;
        }
        let rest = xj - (x + h);
        if rest > 0.0 && rest < 1e-3 * h {
            // Split instead of leaving a sliver before the junction.
            h = 0.5 * (xj - x);
        }
        x = (x + h).min(xj);
        xs.push(x);
    }
    xs
}

fn inclusion_polyline(geom: &GapGeometry, upper: bool, chord_tol: f64) -> Result<Vec<[f64; 2]>> {
    let cap = geom.cap(upper)?;
    let xs = graph_abscissae(geom, upper, cap.junction, chord_tol);
    let y = |x: f64| {
        if upper {
            geom.upper_y(x)
        } else {
            geom.lower_y(x)
        }
    };
    // Graph from -xj to xj, traversed left to right for the upper inclusion
    // (its interior lies above) and right to left for the lower one.
    let mut graph: Vec<[f64; 2]> = xs.iter().rev().map(|&x| [-x, y(x)]).collect();
    graph.extend(xs.iter().skip(1).map(|&x| [x, y(x)]));
    if !upper {
        graph.reverse();
    }
    let start = graph.last().copied().unwrap();
    let end = graph[0];
    let a0 = (start[1] - cap.centre).atan2(start[0]);
    let mut a1 = (end[1] - cap.centre).atan2(end[0]);
    while a1 <= a0 {
        a1 += 2.0 * std::f64::consts::PI;
    }
    let step = 0.02 * cap.radius;
    let n = (((a1 - a0) * cap.radius / step).ceil() as usize).max(8);
    let mut pts = graph;
    for i in 1..n {
        let t = a0 + (a1 - a0) * i as f64 / n as f64;
        pts.push([cap.radius * t.cos(), cap.centre + cap.radius * t.sin()]);
    }
    Ok(pts)
}

/// Twice the signed area of a closed polyline.
pub fn signed_area2(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum()
}

/// Winding number of a closed polyline around `p`.
pub fn winding_number(poly: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && cross > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && cross < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Conditions a profile can be checked against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Condition {
    /// `κ₀|x'|^α ≤ |∇h| ≤ κ₁|x'|^α`.
    Holder { alpha: f64 },
    /// `λ₀|x'|^m ≤ h ≤ λ₁|x'|^m`.
    MConvex { m: Order },
    /// Vanishing on the plateau, zero slope on its edge, and a positive
    /// second derivative outside it.
    Flat { r0: f64 },
}

impl Condition {
    /// The condition a profile kind is designed to satisfy.
    pub fn natural(profile: &Profile) -> Self {
        match profile.kind {
            ProfileKind::HolderPower { alpha, .. } => Condition::Holder { alpha },
            ProfileKind::PowerM { m, .. } => Condition::MConvex { m },
            ProfileKind::FlatPlateau { r0, .. } => Condition::Flat { r0 },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Named measured constants, e.g. `kappa0`, `kappa1`.
    pub measured: Vec<(String, f64)>,
    /// `|x'|` values at which the condition failed.
    pub witnesses: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    /// Largest relative mismatch between analytic and finite-difference
    /// first derivatives over the sample grid.
    pub fd_mismatch: f64,
}

impl ValidationReport {
    pub fn get(&self, check: &str, key: &str) -> Option<f64> {
        self.checks
            .iter()
            .find(|c| c.name == check)?
            .measured
            .iter()
            .find(|(k, _)| k == key)
            .map(|&(_, v)| v)
    }
}

/// Largest tolerated spread `max/min` of a measured "constant".
const SPREAD_LIMIT: f64 = 10.0;
const MAX_WITNESSES: usize = 16;

/// Checks a profile against the conditions of its own kind.
pub fn validate_profile(profile: &Profile) -> ValidationReport {
    validate_against(profile, Condition::natural(profile))
}

/// Checks a profile against an arbitrary condition.
pub fn validate_against(profile: &Profile, cond: Condition) -> ValidationReport {
    let r1 = profile.r1;
    let fd_h = 1e-6 * r1;
    let fd = |r: f64| (profile.f(r + fd_h) - profile.f((r - fd_h).abs())) / (2.0 * fd_h);
    let grid: Vec<f64> = (0..=400)
        .map(|i| 1e-4 * r1 * (2e4f64).powf(i as f64 / 400.0))
        .collect();

    let mut fd_mismatch = 0.0f64;
    for &r in &grid {
        if r > 2.0 * fd_h {
            let a = profile.df(r);
            let scale = a.abs().max(1e-300);
            fd_mismatch = fd_mismatch.max((fd(r) - a).abs() / scale);
        }
    }

    let mut checks = vec![CheckResult {
        name: "origin".into(),
        passed: profile.f(0.0) == 0.0 && fd(0.0).abs() <= 1e-6,
        measured: vec![("h0".into(), profile.f(0.0)), ("dh0".into(), fd(0.0))],
        witnesses: vec![],
    }];

    let spread_check = |name: &str, lo: &str, hi: &str, ratios: Vec<(f64, f64)>| {
        let min = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let max = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
        let passed = min > 0.0 && max / min <= SPREAD_LIMIT && max.is_finite();
        let centre = (min.max(1e-300) * max).sqrt();
        let band = SPREAD_LIMIT.sqrt();
        let witnesses = if passed {
            vec![]
        } else {
            ratios
                .iter()
                .filter(|(_, q)| !(*q >= centre / band && *q <= centre * band))
                .map(|&(r, _)| r)
                .take(MAX_WITNESSES)
                .collect()
        };
        CheckResult {
            name: name.into(),
            passed,
            measured: vec![(lo.into(), min), (hi.into(), max)],
            witnesses,
        }
    };

    match cond {
        Condition::Holder { alpha } => {
            let ratios = grid.iter().map(|&r| (r, profile.df(r).abs() / r.powf(alpha))).collect();
            checks.push(spread_check("holder_gradient", "kappa0", "kappa1", ratios));
        }
        Condition::MConvex { m } => {
            let mv = m.value();
            let ratios = grid.iter().map(|&r| (r, profile.f(r) / r.powf(mv))).collect();
            checks.push(spread_check("m_convex", "lambda0", "lambda1", ratios));
        }
        Condition::Flat { r0 } => {
            let inside: Vec<f64> = (0..=100).map(|i| r0 * i as f64 / 100.0).collect();
            let bad: Vec<f64> = inside
                .iter()
                .copied()
                .filter(|&r| profile.f(r) != 0.0)
                .take(MAX_WITNESSES)
                .collect();
            let hmax = inside.iter().map(|&r| profile.f(r).abs()).fold(0.0, f64::max);
            checks.push(CheckResult {
                name: "plateau_vanishes".into(),
                passed: bad.is_empty(),
                measured: vec![("max_h".into(), hmax)],
                witnesses: bad,
            });
            let edge = profile.df(r0).abs();
            checks.push(CheckResult {
                name: "plateau_edge_flat".into(),
                passed: edge <= 1e-12,
                measured: vec![("dh_edge".into(), edge)],
                witnesses: if edge <= 1e-12 { vec![] } else { vec![r0] },
            });
            let collar = match profile.kind {
                ProfileKind::FlatPlateau { collar, .. } => collar,
                _ => 0.0,
            };
            let start = r0 + collar;
            let outside: Vec<f64> = (1..=200)
                .map(|i| start + (2.0 * r1 - start) * i as f64 / 200.0)
                .collect();
            let kappa2 = outside.iter().map(|&r| profile.d2f(r)).fold(f64::INFINITY, f64::min);
            let bad: Vec<f64> = outside
                .iter()
                .copied()
                .filter(|&r| !(profile.d2f(r) > 0.0))
                .take(MAX_WITNESSES)
                .collect();
            checks.push(CheckResult {
                name: "convex_outside".into(),
                passed: bad.is_empty() && kappa2 > 0.0,
                measured: vec![("kappa2".into(), kappa2)],
                witnesses: bad,
            });
        }
    }
    let passed = checks.iter().all(|c| c.passed) && fd_mismatch < 1e-4;
    ValidationReport {
        passed,
        checks,
        fd_mismatch,
    }
}
