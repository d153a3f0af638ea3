//! Perfect-conductivity solves on a [`Mesh`].
//!
//! Each inclusion boundary is condensed to one floating unknown. The
//! subproblems `v₀, v₁, v₂` are fixed-boundary solves on the interior
//! unknowns alone; the direct solve keeps the floating unknowns and so
//! yields `C₁, C₂` from the zero-flux conditions.

pub mod assembly;
mod linalg;

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{ubar, ubar_grad};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryData, GapGeometry, Mode, ProfileKind};
use crate::mesh::{BoundaryTag, Mesh};
use assembly::{basis_gradients, weight, Csr};
use linalg::LinearSolver;
pub use linalg::SolverBackend;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveOptions {
    pub backend: SolverBackend,
    /// Relative residual tolerance of the linear solves.
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            backend: SolverBackend::Cholesky,
            tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dof {
    Free(usize),
    Float(usize),
    Outer,
}

/// Assembled stiffness with the floating-potential condensation.
pub struct System<'m> {
    pub mesh: &'m Mesh,
    /// Full `n × n` stiffness matrix.
    pub stiffness: Csr,
    dofs: Vec<Dof>,
    n_free: usize,
    /// Which of `∂D₁`, `∂D₂` are present.
    floats: Vec<BoundaryTag>,
    options: SolveOptions,
    condensed: LinearSolver,
    interior: OnceLock<std::result::Result<LinearSolver, String>>,
}

/// Nodal P1 field with access to its per-triangle gradients.
#[derive(Clone, Debug)]
pub struct HarmonicField<'m> {
    pub mesh: &'m Mesh,
    pub values: Vec<f64>,
}

impl<'m> HarmonicField<'m> {
    pub fn new(mesh: &'m Mesh, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.node_count());
        HarmonicField { mesh, values }
    }

    pub fn mode(&self) -> Mode {
        self.mesh.mode
    }

    pub fn gradient(&self, t: usize) -> [f64; 2] {
        let (g, _) = basis_gradients(self.mesh.corners(t));
        let tri = self.mesh.triangles[t];
        let mut out = [0.0; 2];
        for (gi, &n) in g.iter().zip(&tri) {
            out[0] += gi[0] * self.values[n];
            out[1] += gi[1] * self.values[n];
        }
        out
    }

    pub fn gradients(&self) -> Vec<[f64; 2]> {
        (0..self.mesh.tri_count())
            .into_par_iter()
            .map(|t| self.gradient(t))
            .collect()
    }

    /// `∫ |∇u|² dμ`.
    pub fn energy(&self) -> f64 {
        let per: Vec<f64> = (0..self.mesh.tri_count())
            .into_par_iter()
            .map(|t| {
                let g = self.gradient(t);
                weight(self.mode(), self.mesh.centroid(t)) * self.mesh.area(t) * (g[0] * g[0] + g[1] * g[1])
            })
            .collect();
        per.iter().sum()
    }

    pub fn combine(&self, a: f64, other: &HarmonicField<'_>, b: f64) -> HarmonicField<'m> {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        HarmonicField::new(self.mesh, values)
    }
}

/// Capacity coefficients and resolved constants.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CapacitySystem {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    /// `-(C₁ - C₂) a₁₁`.
    pub btilde1: f64,
    /// Flux of `u_b = C₂(v₁+v₂) + v₀` through `∂D₁`.
    pub btilde1_check: f64,
    /// `a₁₁` from boundary-edge flux quadrature.
    pub a11_boundary: f64,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GradientStats {
    pub max_grad_neck: f64,
    pub max_grad_global: f64,
    /// `|∇u|` at the sample points from `P₂` to `P₁`.
    pub grad_on_segment: Vec<f64>,
    pub segment_min: f64,
    pub energy: f64,
}

/// Gradient statistics of `w = v₁ - ū₁` in the neck.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ResidualStats {
    pub max_grad_w: f64,
    /// `max |∇w| (ε + |x'|^{1+α})^{1/(1+α)}` for Hölder geometries, the
    /// plain maximum otherwise.
    pub max_weighted: f64,
    /// `∫_neck |∇w|² dμ`.
    pub energy_w: f64,
}

/// Relative gap between volume and boundary evaluations of `a₁₁` above
/// which a warning is attached.
const FLUX_MISMATCH: f64 = 0.05;

/// Assembles the stiffness matrix and factors the condensed operator.
pub fn assemble_system(mesh: &Mesh, options: SolveOptions) -> Result<System<'_>> {
    let n = mesh.node_count();
    let mut dofs = vec![Dof::Free(0); n];
    let mut floats = Vec::new();
    for tag in [BoundaryTag::InclusionD1, BoundaryTag::InclusionD2] {
        let nodes = mesh.tag_nodes(tag);
        if !nodes.is_empty() {
            for i in nodes {
                dofs[i] = Dof::Float(floats.len());
            }
            floats.push(tag);
        }
    }
    let outer = mesh.tag_nodes(BoundaryTag::OuterD);
    if outer.is_empty() {
        return Err(Error::Assembly(
            "no Dirichlet boundary: the floating system is singular".into(),
        ));
    }
    for &i in &outer {
        if matches!(dofs[i], Dof::Float(_)) {
            return Err(Error::Assembly(format!("node {i} lies on an inclusion and on the outer boundary")));
        }
        dofs[i] = Dof::Outer;
    }
    let mut n_free = 0;
    for d in dofs.iter_mut() {
        if let Dof::Free(k) = d {
            *k = n_free;
            n_free += 1;
        }
    }

    let stiffness = assembly::stiffness(mesh);
    let idx = |d: Dof| match d {
        Dof::Free(k) => Some(k),
        Dof::Float(c) => Some(n_free + c),
        Dof::Outer => None,
    };
    let mut trip = Vec::with_capacity(stiffness.vals.len());
    for i in 0..n {
        let Some(a) = idx(dofs[i]) else { continue };
        for (j, v) in stiffness.row(i) {
            if let Some(b) = idx(dofs[j]) {
                trip.push((a, b, v));
            }
        }
    }
    let condensed = Csr::from_triplets(n_free + floats.len(), trip);
    let condensed = LinearSolver::new(condensed, options.backend, options.tol)?;
    Ok(System {
        mesh,
        stiffness,
        dofs,
        n_free,
        floats,
        options,
        condensed,
        interior: OnceLock::new(),
    })
}

impl<'m> System<'m> {
    /// Dimension of the condensed operator: free nodes plus one unknown per
    /// inclusion.
    pub fn condensed_dim(&self) -> usize {
        self.condensed.dim()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_inclusions(&self) -> usize {
        self.floats.len()
    }

    /// The condensed operator itself.
    pub fn condensed_matrix(&self) -> &Csr {
        self.condensed.matrix()
    }

    fn interior(&self) -> Result<&LinearSolver> {
        let s = self.interior.get_or_init(|| {
            let a = self.condensed.matrix();
            let trip: Vec<(usize, usize, f64)> = (0..self.n_free)
                .flat_map(|i| a.row(i).filter(|&(j, _)| j < self.n_free).map(move |(j, v)| (i, j, v)))
                .collect();
            LinearSolver::new(Csr::from_triplets(self.n_free, trip), self.options.backend, self.options.tol)
                .map_err(|e| e.to_string())
        });
        s.as_ref().map_err(|m| Error::solver(m.clone()))
    }

    fn float_of(&self, tag: BoundaryTag) -> Option<usize> {
        self.floats.iter().position(|t| *t == tag)
    }

    /// Solves with all boundary values prescribed: `fixed(node)` gives the
    /// value on inclusion and outer nodes.
    fn fixed_solve(&self, fixed: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
        let n = self.mesh.node_count();
        let mut u = vec![0.0; n];
        for i in 0..n {
            if !matches!(self.dofs[i], Dof::Free(_)) {
                u[i] = fixed(i);
            }
        }
        let mut rhs = vec![0.0; self.n_free];
        for i in 0..n {
            let Dof::Free(a) = self.dofs[i] else { continue };
            for (j, v) in self.stiffness.row(i) {
                if !matches!(self.dofs[j], Dof::Free(_)) {
                    rhs[a] -= v * u[j];
                }
            }
        }
        let x = self.interior()?.solve(&rhs)?;
        for i in 0..n {
            if let Dof::Free(a) = self.dofs[i] {
                u[i] = x[a];
            }
        }
        Ok(u)
    }

    fn outer_value(&self, phi: &BoundaryData, i: usize) -> f64 {
        phi.eval(self.mesh.nodes[i])
    }

    /// Flux `∫_{∂D_k} ∂v/∂ν` through an inclusion, `ν` pointing into `Ω`,
    /// in the variational (residual) form.
    pub fn inclusion_flux(&self, field: &[f64], tag: BoundaryTag) -> f64 {
        let ku = self.stiffness.matvec(field);
        self.mesh.tag_nodes(tag).iter().map(|&i| -ku[i]).sum()
    }

    /// Flux through the outer boundary with the outward normal of `Ω`.
    pub fn outer_flux(&self, field: &[f64]) -> f64 {
        let ku = self.stiffness.matvec(field);
        self.mesh.tag_nodes(BoundaryTag::OuterD).iter().map(|&i| ku[i]).sum()
    }

    /// Same flux evaluated by edge quadrature of the boundary triangles'
    /// gradients; first-order accurate, used as a consistency diagnostic.
    pub fn boundary_flux(&self, field: &HarmonicField<'_>, tag: BoundaryTag) -> f64 {
        let mesh = self.mesh;
        let owner = edge_owner(mesh);
        mesh.boundary
            .iter()
            .filter(|(_, t)| *t == tag)
            .map(|(e, _)| {
                let t = owner[&(e[0].min(e[1]), e[0].max(e[1]))];
                let g = field.gradient(t);
                let (p, q) = (mesh.nodes[e[0]], mesh.nodes[e[1]]);
                // Left normal of the oriented edge points into Ω.
                let nu = [-(q[1] - p[1]), q[0] - p[0]];
                let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                weight(mesh.mode, mid) * (g[0] * nu[0] + g[1] * nu[1])
            })
            .sum()
    }
}

fn edge_owner(mesh: &Mesh) -> std::collections::HashMap<(usize, usize), usize> {
    let mut m = std::collections::HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for j in 0..3 {
            let (a, b) = (tri[j], tri[(j + 1) % 3]);
            m.insert((a.min(b), a.max(b)), t);
        }
    }
    m
}

/// `(v₀, v₁, v₂)`: `v₁ = 1` on `∂D₁`, `v₂ = 1` on `∂D₂`, `v₀ = φ` on `∂D`,
/// each vanishing on the remaining boundaries. A missing inclusion gives a
/// zero field.
pub fn solve_subproblems<'m>(
    sys: &System<'m>,
    phi: &BoundaryData,
) -> Result<(HarmonicField<'m>, HarmonicField<'m>, HarmonicField<'m>)> {
    let mesh = sys.mesh;
    let v0 = sys.fixed_solve(|i| match sys.dofs[i] {
        Dof::Outer => sys.outer_value(phi, i),
        _ => 0.0,
    })?;
    let unit = |tag: BoundaryTag| -> Result<Vec<f64>> {
        match sys.float_of(tag) {
            None => Ok(vec![0.0; mesh.node_count()]),
            Some(c) => sys.fixed_solve(|i| f64::from(sys.dofs[i] == Dof::Float(c))),
        }
    };
    let v1 = unit(BoundaryTag::InclusionD1)?;
    let v2 = unit(BoundaryTag::InclusionD2)?;
    Ok((
        HarmonicField::new(mesh, v0),
        HarmonicField::new(mesh, v1),
        HarmonicField::new(mesh, v2),
    ))
}

/// `a_ij = -∫∇vᵢ·∇vⱼ`, `b_i = -∫∇vᵢ·∇v₀` by the volume form; constants
/// are left at zero.
pub fn capacity_matrix(
    sys: &System<'_>,
    v0: &HarmonicField<'_>,
    v1: &HarmonicField<'_>,
    v2: &HarmonicField<'_>,
) -> CapacitySystem {
    let k = &sys.stiffness;
    let a = |x: &HarmonicField<'_>, y: &HarmonicField<'_>| -k.bilinear(&x.values, &y.values);
    let a11 = a(v1, v1);
    let a11_boundary = sys.boundary_flux(v1, BoundaryTag::InclusionD1);
    let mismatch = (a11_boundary - a11).abs() / a11.abs().max(f64::MIN_POSITIVE);
    let warning = (a11 != 0.0 && mismatch > FLUX_MISMATCH).then(|| {
        format!(
            "volume and boundary evaluations of a11 differ by {:.1}% ({a11:e} vs {a11_boundary:e})",
            100.0 * mismatch
        )
    });
    CapacitySystem {
        a11,
        a12: a(v1, v2),
        a21: a(v2, v1),
        a22: a(v2, v2),
        b1: a(v1, v0),
        b2: a(v2, v0),
        a11_boundary,
        warning,
        ..CapacitySystem::default()
    }
}

/// Resolves `C₁, C₂` from the two zero-flux conditions
/// `C₁a₁₁ + C₂a₁₂ + b₁ = 0`, `C₁a₂₁ + C₂a₂₂ + b₂ = 0`. With a single
/// inclusion only the first equation is used.
pub fn solve_constants(cap: &CapacitySystem) -> Result<CapacitySystem> {
    let mut out = cap.clone();
    let single = cap.a22 == 0.0 && cap.a12 == 0.0 && cap.a21 == 0.0;
    if single {
        if cap.a11 == 0.0 {
            return Err(Error::solver("a11 = 0: degenerate geometry"));
        }
        out.c1 = -cap.b1 / cap.a11;
        out.c2 = 0.0;
    } else {
        let det = cap.a11 * cap.a22 - cap.a12 * cap.a21;
        let scale = (cap.a11 * cap.a22).abs() + (cap.a12 * cap.a21).abs();
        if !(det.abs() > 1e-14 * scale) {
            return Err(Error::solver(format!(
                "singular flux system (det {det:e}): degenerate geometry"
            )));
        }
        out.c1 = (-cap.b1 * cap.a22 + cap.b2 * cap.a12) / det;
        out.c2 = (-cap.a11 * cap.b2 + cap.a21 * cap.b1) / det;
    }
    out.btilde1 = -(out.c1 - out.c2) * cap.a11;
    out.btilde1_check = out.c2 * (cap.a11 + cap.a12) + cap.b1;
    Ok(out)
}

/// Residuals of the two flux equations relative to their largest term.
pub fn flux_residuals(cap: &CapacitySystem) -> [f64; 2] {
    let r = |a: f64, b: f64, c: f64| {
        let terms = [cap.c1 * a, cap.c2 * b, c];
        let s = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
        if s == 0.0 {
            0.0
        } else {
            terms.iter().sum::<f64>().abs() / s
        }
    };
    [r(cap.a11, cap.a12, cap.b1), r(cap.a21, cap.a22, cap.b2)]
}

/// `u = C₁v₁ + C₂v₂ + v₀`.
pub fn reconstruct_u<'m>(
    v0: &HarmonicField<'m>,
    v1: &HarmonicField<'_>,
    v2: &HarmonicField<'_>,
    c1: f64,
    c2: f64,
) -> HarmonicField<'m> {
    let values = (0..v0.values.len())
        .map(|i| c1 * v1.values[i] + c2 * v2.values[i] + v0.values[i])
        .collect();
    HarmonicField::new(v0.mesh, values)
}

/// One constrained solve with floating unknowns on the inclusions. Returns
/// the field and the constants (`C₂ = 0` if there is no second inclusion).
pub fn direct_solve<'m>(sys: &System<'m>, phi: &BoundaryData) -> Result<(HarmonicField<'m>, f64, f64)> {
    let mesh = sys.mesh;
    let n = mesh.node_count();
    let nc = sys.condensed_dim();
    let mut u = vec![0.0; n];
    let mut rhs = vec![0.0; nc];
    for i in 0..n {
        if sys.dofs[i] == Dof::Outer {
            u[i] = sys.outer_value(phi, i);
        }
    }
    for i in 0..n {
        let a = match sys.dofs[i] {
            Dof::Free(a) => a,
            Dof::Float(c) => sys.n_free + c,
            Dof::Outer => continue,
        };
        for (j, v) in sys.stiffness.row(i) {
            if sys.dofs[j] == Dof::Outer {
                rhs[a] -= v * u[j];
            }
        }
    }
    let x = sys.condensed.solve(&rhs)?;
    for i in 0..n {
        match sys.dofs[i] {
            Dof::Free(a) => u[i] = x[a],
            Dof::Float(c) => u[i] = x[sys.n_free + c],
            Dof::Outer => {}
        }
    }
    let c = |tag| sys.float_of(tag).map_or(0.0, |k| x[sys.n_free + k]);
    Ok((
        HarmonicField::new(mesh, u),
        c(BoundaryTag::InclusionD1),
        c(BoundaryTag::InclusionD2),
    ))
}

/// Number of sample points on `P₂P₁`.
pub const SEGMENT_SAMPLES: usize = 33;

/// Gradient maxima, the `P₂P₁` profile and the energy of a field.
pub fn gradient_stats(field: &HarmonicField<'_>, geom: &GapGeometry) -> Result<GradientStats> {
    let mesh = field.mesh;
    let grads = field.gradients();
    let norms: Vec<f64> = grads.iter().map(|g| g[0].hypot(g[1])).collect();
    let max_grad_global = norms.iter().cloned().fold(0.0, f64::max);
    let max_grad_neck = norms
        .iter()
        .zip(&mesh.neck)
        .filter(|(_, n)| **n)
        .map(|(g, _)| *g)
        .fold(0.0, f64::max);
    let pts = segment_points(geom);
    let grad_on_segment = sample_gradients(mesh, &grads, &pts)?;
    let segment_min = grad_on_segment.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(GradientStats {
        max_grad_neck,
        max_grad_global,
        grad_on_segment,
        segment_min,
        energy: field.energy(),
    })
}

/// Equispaced points from `P₂` to `P₁`, pulled inward by `10⁻³ε`.
pub fn segment_points(geom: &GapGeometry) -> Vec<[f64; 2]> {
    let off = 1e-3 * geom.eps;
    let (a, b) = (geom.p2()[1] + off, geom.p1()[1] - off);
    (0..SEGMENT_SAMPLES)
        .map(|k| [0.0, a + (b - a) * k as f64 / (SEGMENT_SAMPLES - 1) as f64])
        .collect()
}

/// `|∇u|` at each point, averaged over all triangles containing it.
fn sample_gradients(mesh: &Mesh, grads: &[[f64; 2]], pts: &[[f64; 2]]) -> Result<Vec<f64>> {
    let xmin = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let xmax = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let cands: Vec<usize> = (0..mesh.tri_count())
        .filter(|&t| {
            let c = mesh.corners(t);
            c.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min) <= xmax
                && c.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) >= xmin
        })
        .collect();
    pts.iter()
        .map(|&p| {
            let mut sum = [0.0; 2];
            let mut k = 0;
            for &t in &cands {
                if contains(mesh.corners(t), p) {
                    sum[0] += grads[t][0];
                    sum[1] += grads[t][1];
                    k += 1;
                }
            }
            if k == 0 {
                return Err(Error::mesh(p, "segment sample point lies outside the mesh"));
            }
            Ok((sum[0] / k as f64).hypot(sum[1] / k as f64))
        })
        .collect()
}

fn contains(c: [[f64; 2]; 3], p: [f64; 2]) -> bool {
    let (_, area) = basis_gradients(c);
    let tol = -1e-12 * area.abs();
    let sub = |a: [f64; 2], b: [f64; 2]| 0.5 * ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]));
    sub(c[0], c[1]) >= tol && sub(c[1], c[2]) >= tol && sub(c[2], c[0]) >= tol
}

/// Statistics of `w = v₁ - I_h ū₁` over the neck triangles, where `I_h` is
/// nodal interpolation.
pub fn residual_w(v1: &HarmonicField<'_>, geom: &GapGeometry) -> ResidualStats {
    let mesh = v1.mesh;
    let alpha = match geom.upper.kind {
        ProfileKind::HolderPower { alpha, .. } => Some(alpha),
        _ => None,
    };
    let per: Vec<Option<(f64, f64, f64)>> = (0..mesh.tri_count())
        .into_par_iter()
        .map(|t| {
            if !mesh.neck[t] {
                return None;
            }
            let (g, area) = basis_gradients(mesh.corners(t));
            let tri = mesh.triangles[t];
            let mut gw = v1.gradient(t);
            for (gi, &n) in g.iter().zip(&tri) {
                let ub = ubar(geom, mesh.nodes[n]);
                gw[0] -= gi[0] * ub;
                gw[1] -= gi[1] * ub;
            }
            let norm = gw[0].hypot(gw[1]);
            let c = mesh.centroid(t);
            let weighted = match alpha {
                Some(a) => norm * (geom.eps + c[0].abs().powf(1.0 + a)).powf(1.0 / (1.0 + a)),
                None => norm,
            };
            Some((norm, weighted, weight(mesh.mode, c) * area * norm * norm))
        })
        .collect();
    let mut s = ResidualStats::default();
    for (n, w, e) in per.into_iter().flatten() {
        s.max_grad_w = s.max_grad_w.max(n);
        s.max_weighted = s.max_weighted.max(w);
        s.energy_w += e;
    }
    s
}

/// Statistics of `w = v₁ - ū₁` using the exact gradient of `ū₁` at each
/// neck centroid. Only meaningful when the horizontal neck spacing is
/// fine on the scale where `∇ū₁` varies.
pub fn residual_w_exact(v1: &HarmonicField<'_>, geom: &GapGeometry) -> ResidualStats {
    let mesh = v1.mesh;
    let mut s = ResidualStats::default();
    for t in 0..mesh.tri_count() {
        if !mesh.neck[t] {
            continue;
        }
        let c = mesh.centroid(t);
        let gu = ubar_grad(geom, c);
        let g = v1.gradient(t);
        let n = (g[0] - gu[0]).hypot(g[1] - gu[1]);
        s.max_grad_w = s.max_grad_w.max(n);
        s.max_weighted = s.max_weighted.max(n);
        s.energy_w += weight(mesh.mode, c) * mesh.area(t) * n * n;
    }
    s
}

#[cfg(test)]
mod tests;
