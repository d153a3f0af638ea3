//! Closed-form blow-up rates, the auxiliary field `ū₁`, pointwise gradient
//! envelopes and capacity asymptotes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{GapGeometry, Order, ProfileKind};

fn check_n(n: u32) -> Result<()> {
    if n >= 2 {
        Ok(())
    } else {
        Err(Error::Domain(format!("dimension n must be at least 2, got {n}")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("eps must lie in (0, 1], got {eps}")))
    }
}

fn inv_log(eps: f64) -> Result<f64> {
    if eps < 1.0 {
        Ok(1.0 / eps.ln().abs())
    } else {
        Err(Error::Domain(format!(
            "the logarithmic branch needs eps < 1, got {eps}"
        )))
    }
}

/// `ε^{α/(1+α)}` for `n = 2`, else 1.
pub fn rate_holder(n: u32, alpha: f64, eps: f64) -> Result<f64> {
    check_n(n)?;
    check_eps(eps)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(if n == 2 {
        eps.powf(alpha / (1.0 + alpha))
    } else {
        1.0
    })
}

/// `√ε` for `n = 2`, `1/|ln ε|` for `n = 3`, else 1.
pub fn rate_classic(n: u32, eps: f64) -> Result<f64> {
    check_n(n)?;
    check_eps(eps)?;
    match n {
        2 => Ok(eps.sqrt()),
        3 => inv_log(eps),
        _ => Ok(1.0),
    }
}

/// `ε^{1-(n-1)/m}` if `m > n-1`, `1/|ln ε|` if `m = n-1`, else 1.
///
/// The branch is chosen by exact rational comparison, so the jump at
/// `m = n-1` is reproduced as is.
pub fn rate_mconvex(n: u32, m: Order, eps: f64) -> Result<f64> {
    check_n(n)?;
    check_eps(eps)?;
    if m.cmp_int(2).is_lt() {
        return Err(Error::Domain(format!("m must be at least 2, got {m}")));
    }
    match m.cmp_int(n - 1) {
        std::cmp::Ordering::Greater => Ok(eps.powf(1.0 - (n - 1) as f64 / m.value())),
        std::cmp::Ordering::Equal => inv_log(eps),
        std::cmp::Ordering::Less => Ok(1.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RateFamily {
    Holder { n: u32, alpha: f64 },
    Classic { n: u32 },
    MConvex { n: u32, m: Order },
}

impl RateFamily {
    pub fn eval(&self, eps: f64) -> Result<f64> {
        match *self {
            RateFamily::Holder { n, alpha } => rate_holder(n, alpha, eps),
            RateFamily::Classic { n } => rate_classic(n, eps),
            RateFamily::MConvex { n, m } => rate_mconvex(n, m, eps),
        }
    }
}

fn in_neck(geom: &GapGeometry, x: [f64; 2]) -> Result<()> {
    let r1 = geom.r1();
    let tol = 1e-9 * geom.eps;
    if x[0].abs() > r1 * (1.0 + 1e-12)
        || x[1] > geom.upper_y(x[0]) + tol
        || x[1] < geom.lower_y(x[0]) - tol
    {
        return Err(Error::Domain(format!(
            "point ({}, {}) lies outside the neck",
            x[0], x[1]
        )));
    }
    Ok(())
}

/// `ū₁(x) = (x_n + ε/2 + h₂(x')) / δ(x')`; 1 on the upper wall, 0 on the
/// lower one, linear in between.
pub fn aux_ubar(geom: &GapGeometry, x: [f64; 2]) -> Result<f64> {
    in_neck(geom, x)?;
    Ok(ubar(geom, x))
}

/// Exact gradient of [`aux_ubar`].
pub fn aux_ubar_grad(geom: &GapGeometry, x: [f64; 2]) -> Result<[f64; 2]> {
    in_neck(geom, x)?;
    Ok(ubar_grad(geom, x))
}

pub(crate) fn ubar(geom: &GapGeometry, x: [f64; 2]) -> f64 {
    let r = x[0].abs();
    (x[1] + 0.5 * geom.eps + geom.lower.f(r)) / geom.delta(r)
}

pub(crate) fn ubar_grad(geom: &GapGeometry, x: [f64; 2]) -> [f64; 2] {
    let d = geom.delta(x[0]);
    let u = ubar(geom, x);
    let s1 = geom.upper.slope(x[0]);
    let s2 = geom.lower.slope(x[0]);
    [(s2 - u * (s1 + s2)) / d, 1.0 / d]
}

/// Geometry class an envelope or asymptote refers to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeKind {
    Holder { alpha: f64 },
    MConvex { m: Order },
    Flat { r0: f64, sigma_area: f64 },
}

impl EnvelopeKind {
    /// The class matching a geometry's upper profile.
    pub fn for_geometry(geom: &GapGeometry) -> Self {
        match geom.upper.kind {
            ProfileKind::HolderPower { alpha, .. } => EnvelopeKind::Holder { alpha },
            ProfileKind::PowerM { m, .. } => EnvelopeKind::MConvex { m },
            ProfileKind::FlatPlateau { .. } => EnvelopeKind::Flat {
                r0: geom.plateau_radius(),
                sigma_area: geom.sigma_area(),
            },
        }
    }

    pub fn rate(&self, n: u32) -> RateFamily {
        match *self {
            EnvelopeKind::Holder { alpha } => RateFamily::Holder { n, alpha },
            EnvelopeKind::MConvex { m } => RateFamily::MConvex { n, m },
            EnvelopeKind::Flat { .. } => RateFamily::Classic { n },
        }
    }
}

/// Pointwise gradient bound `C · shape(x', ε)` in the neck.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Envelope {
    #[serde(flatten)]
    pub kind: EnvelopeKind,
    pub n: u32,
}

impl Envelope {
    pub fn new(kind: EnvelopeKind, n: u32) -> Self {
        Envelope { kind, n }
    }

    pub fn for_geometry(geom: &GapGeometry) -> Self {
        Envelope::new(EnvelopeKind::for_geometry(geom), geom.dim())
    }

    /// Rejects pairings where the envelope refers to a different geometry
    /// class or dimension.
    pub fn check_compatible(&self, geom: &GapGeometry) -> Result<()> {
        if self.n != geom.dim() {
            return Err(Error::Domain(format!(
                "envelope dimension {} does not match the geometry dimension {}",
                self.n,
                geom.dim()
            )));
        }
        let flat_geom = matches!(geom.upper.kind, ProfileKind::FlatPlateau { .. });
        let flat_env = matches!(self.kind, EnvelopeKind::Flat { .. });
        if flat_geom != flat_env {
            return Err(Error::Domain(format!(
                "{:?} envelope does not apply to a {} geometry",
                self.kind,
                if flat_geom { "flat-plateau" } else { "power-law" }
            )));
        }
        Ok(())
    }

    /// The envelope with `C = 1` at distance `r = |x'|` from the axis.
    pub fn shape(&self, r: f64, eps: f64) -> Result<f64> {
        let rho = self.kind.rate(self.n).eval(eps)?;
        let r = r.abs();
        Ok(match self.kind {
            EnvelopeKind::Holder { alpha } => rho / (eps + r.powf(1.0 + alpha)),
            EnvelopeKind::MConvex { m } => rho / (eps + r.powf(m.value())),
            EnvelopeKind::Flat { r0, sigma_area } => {
                let dist = (r - r0).max(0.0);
                eps / ((sigma_area + eps / rho) * (eps + dist * dist))
            }
        })
    }
}

/// `C · shape` at `x`, after checking that `x` is in the neck and that the
/// envelope matches the geometry.
pub fn envelope_value(
    env: &Envelope,
    geom: &GapGeometry,
    x: [f64; 2],
    eps: f64,
    fitted_c: f64,
) -> Result<f64> {
    env.check_compatible(geom)?;
    in_neck(geom, x)?;
    Ok(fitted_c * env.shape(x[0], eps)?)
}

/// Predicted scale of `|a₁₁|`: `|Σ'|/ε + ρ_n⁻¹` (flat), `ρ_{n,α}⁻¹`
/// (Hölder) or `ρ_{n,m}⁻¹` (m-convex).
pub fn capacity_asymptote(kind: &EnvelopeKind, n: u32, eps: f64) -> Result<f64> {
    let rho = kind.rate(n).eval(eps)?;
    Ok(match *kind {
        EnvelopeKind::Flat { sigma_area, .. } => sigma_area / eps + 1.0 / rho,
        _ => 1.0 / rho,
    })
}

/// Predicted scale of `|C₁ - C₂|`: `ρ` for the power-law classes,
/// `ε / (|Σ'| + ερ_n⁻¹)` for the flat class.
pub fn cdiff_bound(kind: &EnvelopeKind, n: u32, eps: f64) -> Result<f64> {
    let rho = kind.rate(n).eval(eps)?;
    Ok(match *kind {
        EnvelopeKind::Flat { sigma_area, .. } => eps / (sigma_area + eps / rho),
        _ => rho,
    })
}
