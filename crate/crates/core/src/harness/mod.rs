//! ε-sweeps, exponent fits and verdicts.

mod checks;
mod fit;
pub mod plot;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::Envelope;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryData, GapGeometry};
use crate::mesh::{generate_mesh, projector, Mesh, MeshParams};
use crate::solver::{
    assemble_system, capacity_matrix, gradient_stats, reconstruct_u, residual_w, solve_constants,
    solve_subproblems, HarmonicField, SolveOptions,
};

pub use checks::{
    boundedness_check, capacity_check, cdiff_check, lower_bound_check, rate_check, residual_check,
    stability, verify_envelope, EnvelopeReport, LowerReport, SlopeReport, StabilityReport, Verdict,
};
pub use fit::{fit_exponent, fit_loglog, FitResult};
pub use report::{read_records_csv, report, write_records_csv, Check, Report};

/// Records whose Richardson drift exceeds this (percent) are excluded from
/// fits.
pub const DRIFT_LIMIT: f64 = 5.0;
/// The largest ε is dropped from fits above this drift (percent).
pub const WINDOW_DRIFT: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// Base geometry; its `eps` is replaced by each sweep value.
    pub geometry: GapGeometry,
    pub eps: Vec<f64>,
    pub mesh: MeshParams,
    pub phi: BoundaryData,
    pub solve: SolveOptions,
    /// Envelope used for `envelope_C`; the geometry's own when `None`.
    pub envelope: Option<Envelope>,
    /// Solve again on the once-refined mesh to measure drift.
    pub richardson: bool,
}

impl SweepConfig {
    pub fn new(geometry: GapGeometry, eps: Vec<f64>) -> Self {
        SweepConfig {
            geometry,
            eps,
            mesh: MeshParams::default(),
            phi: BoundaryData::LinearXn,
            solve: SolveOptions::default(),
            envelope: None,
            richardson: true,
        }
    }
}

/// `n` log-spaced values from `a` to `b`, both included exactly.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| match k {
                0 => a,
                k if k == n - 1 => b,
                k => (a.ln() + (b.ln() - a.ln()) * k as f64 / (n - 1) as f64).exp(),
            })
            .collect(),
    }
}

/// Measurements at one ε.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub max_grad_neck: f64,
    pub grad_segment_min: f64,
    pub a11: f64,
    pub a12: f64,
    pub b1: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub cdiff: f64,
    pub energy_u: f64,
    pub energy_w: f64,
    #[serde(rename = "envelope_C")]
    pub envelope_c: f64,
    /// Percent change of `max_grad_neck` under one uniform refinement.
    pub refinement_drift: f64,
    pub btilde1: f64,
    /// `max |∇(v₁ - ū₁)|` in the neck, weighted for Hölder geometries.
    pub max_grad_w: f64,
    /// `max |∇(v₁ + v₂)|` over the whole domain.
    pub grad_v12_max: f64,
    /// Drift above [`DRIFT_LIMIT`].
    pub flagged: bool,
}

impl SweepRecord {
    /// Numeric column by CSV header name.
    pub fn get(&self, field: &str) -> Option<f64> {
        Some(match field {
            "eps" => self.eps,
            "max_grad_neck" => self.max_grad_neck,
            "grad_segment_min" => self.grad_segment_min,
            "a11" => self.a11,
            "a12" => self.a12,
            "b1" => self.b1,
            "C1" => self.c1,
            "C2" => self.c2,
            "cdiff" => self.cdiff,
            "energy_u" => self.energy_u,
            "energy_w" => self.energy_w,
            "envelope_C" => self.envelope_c,
            "refinement_drift" => self.refinement_drift,
            "btilde1" => self.btilde1,
            "max_grad_w" => self.max_grad_w,
            "grad_v12_max" => self.grad_v12_max,
            _ => return None,
        })
    }

    pub const FIELDS: [&'static str; 16] = [
        "eps",
        "max_grad_neck",
        "grad_segment_min",
        "a11",
        "a12",
        "b1",
        "C1",
        "C2",
        "cdiff",
        "energy_u",
        "energy_w",
        "envelope_C",
        "refinement_drift",
        "btilde1",
        "max_grad_w",
        "grad_v12_max",
    ];
}

/// `max over neck triangles of |∇u| / (shape + 1)`. The unit term stands
/// for the bounded part of the gradient away from the narrowest point.
pub fn envelope_constant(u: &HarmonicField<'_>, env: &Envelope, eps: f64) -> Result<f64> {
    let mesh = u.mesh;
    let mut c: f64 = 0.0;
    for t in 0..mesh.tri_count() {
        if !mesh.neck[t] {
            continue;
        }
        let g = u.gradient(t);
        let shape = env.shape(mesh.centroid(t)[0], eps)?;
        c = c.max(g[0].hypot(g[1]) / (shape + 1.0));
    }
    Ok(c)
}

struct Point {
    max_grad_neck: f64,
    record: SweepRecord,
}

fn solve_point(mesh: &Mesh, geom: &GapGeometry, cfg: &SweepConfig, env: &Envelope) -> Result<Point> {
    let sys = assemble_system(mesh, cfg.solve)?;
    let (v0, v1, v2) = solve_subproblems(&sys, &cfg.phi)?;
    let cap = solve_constants(&capacity_matrix(&sys, &v0, &v1, &v2))?;
    let u = reconstruct_u(&v0, &v1, &v2, cap.c1, cap.c2);
    let stats = gradient_stats(&u, geom)?;
    let w = residual_w(&v1, geom);
    let v12 = v1.combine(1.0, &v2, 1.0);
    let grad_v12_max = v12
        .gradients()
        .iter()
        .map(|g| g[0].hypot(g[1]))
        .fold(0.0, f64::max);
    let record = SweepRecord {
        eps: geom.eps,
        max_grad_neck: stats.max_grad_neck,
        grad_segment_min: stats.segment_min,
        a11: cap.a11,
        a12: cap.a12,
        b1: cap.b1,
        c1: cap.c1,
        c2: cap.c2,
        cdiff: (cap.c1 - cap.c2).abs(),
        energy_u: stats.energy,
        energy_w: w.energy_w,
        envelope_c: envelope_constant(&u, env, geom.eps)?,
        refinement_drift: 0.0,
        btilde1: cap.btilde1,
        max_grad_w: w.max_weighted,
        grad_v12_max,
        flagged: false,
    };
    Ok(Point {
        max_grad_neck: stats.max_grad_neck,
        record,
    })
}

fn at_eps(e: Error, eps: f64) -> Error {
    let tag = |m: String| format!("at eps = {eps:e}: {m}");
    match e {
        Error::Geometry(m) => Error::Geometry(tag(m)),
        Error::Construction(m) => Error::Construction(tag(m)),
        Error::Assembly(m) => Error::Assembly(tag(m)),
        Error::Mesh { x, y, msg } => Error::Mesh { x, y, msg: tag(msg) },
        Error::Solver {
            msg,
            residual_history,
        } => Error::Solver {
            msg: tag(msg),
            residual_history,
        },
        other => other,
    }
}

/// Runs mesh → solve → statistics at one ε.
pub fn sweep_point(cfg: &SweepConfig, eps: f64) -> Result<SweepRecord> {
    let geom = cfg.geometry.with_eps(eps);
    let run = || -> Result<SweepRecord> {
        geom.check()?;
        cfg.phi.check(geom.mode)?;
        let env = match &cfg.envelope {
            Some(e) => {
                e.check_compatible(&geom)?;
                *e
            }
            None => Envelope::for_geometry(&geom),
        };
        let mesh = generate_mesh(&geom, &cfg.mesh)?;
        let coarse = solve_point(&mesh, &geom, cfg, &env)?;
        let mut rec = coarse.record;
        if cfg.richardson {
            let fine_mesh = mesh.refine_projected(&projector(&geom)?);
            let fine = solve_point(&fine_mesh, &geom, cfg, &env)?;
            rec.refinement_drift = if fine.max_grad_neck > 0.0 {
                100.0 * (fine.max_grad_neck - coarse.max_grad_neck).abs() / fine.max_grad_neck
            } else {
                0.0
            };
            rec.flagged = rec.refinement_drift > DRIFT_LIMIT;
        }
        Ok(rec)
    };
    run().map_err(|e| at_eps(e, eps))
}

/// One record per ε, sorted by increasing ε. Points run in parallel; the
/// result does not depend on the thread count.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    if cfg.eps.is_empty() {
        return Err(Error::Config("sweep needs at least one eps value".into()));
    }
    let mut records = cfg
        .eps
        .par_iter()
        .map(|&e| sweep_point(cfg, e))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    Ok(records)
}
