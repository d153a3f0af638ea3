use serde::Serialize;

use super::fit::{fit_loglog, fit_window};
use super::{FitResult, SweepRecord};
use crate::asymptotics::{capacity_asymptote, cdiff_bound, Envelope, EnvelopeKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The check has nothing to measure (for instance a constant solution).
    Vacuous,
}

impl Verdict {
    fn from(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self != Verdict::Fail
    }
}

/// Measured log-log slope against a predicted one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeReport {
    pub quantity: String,
    #[serde(flatten)]
    pub fit: FitResult,
    pub expected_slope: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Ratio of the largest to the smallest value of one record column.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub quantity: String,
    pub min: f64,
    pub max: f64,
    pub ratio: f64,
    pub limit: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    /// `(ε, C(ε))` pairs.
    pub constants: Vec<[f64; 2]>,
    #[serde(rename = "Cmax_over_Cmin")]
    pub cmax_over_cmin: Option<f64>,
    pub limit: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerReport {
    /// `(ε, q(ε))` with `q = min_segment |∇u| · ε / ρ(ε)`.
    pub q: Vec<[f64; 2]>,
    pub qmin: f64,
    pub qmax: f64,
    pub q_at_eps_max: f64,
    pub btilde1_min: f64,
    pub btilde1_at_eps_max: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn column(records: &[&SweepRecord], field: &str) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| r.get(field).ok_or_else(|| Error::Fit(format!("unknown record field {field:?}"))))
        .collect()
}

fn slope_report(
    quantity: &str,
    eps: &[f64],
    measured: &[f64],
    predicted: &[f64],
    tolerance: f64,
) -> Result<SlopeReport> {
    let fit = fit_loglog(eps, measured)?;
    let expected_slope = fit_loglog(eps, predicted)?.slope;
    Ok(SlopeReport {
        quantity: quantity.into(),
        verdict: Verdict::from((fit.slope - expected_slope).abs() <= tolerance),
        fit,
        expected_slope,
        tolerance,
    })
}

/// Slope of `max_grad_neck` against the envelope at `x' = 0`.
pub fn rate_check(records: &[SweepRecord], env: &Envelope, tolerance: f64) -> Result<SlopeReport> {
    let w = fit_window(records);
    let eps = column(&w, "eps")?;
    let predicted = eps.iter().map(|&e| env.shape(0.0, e)).collect::<Result<Vec<_>>>()?;
    slope_report("max_grad_neck", &eps, &column(&w, "max_grad_neck")?, &predicted, tolerance)
}

/// Slope of `|a₁₁|` against the capacity asymptote.
pub fn capacity_check(
    records: &[SweepRecord],
    kind: &EnvelopeKind,
    n: u32,
    tolerance: f64,
) -> Result<SlopeReport> {
    let w = fit_window(records);
    let eps = column(&w, "eps")?;
    let a11: Vec<f64> = column(&w, "a11")?.iter().map(|a| a.abs()).collect();
    let predicted = eps
        .iter()
        .map(|&e| capacity_asymptote(kind, n, e))
        .collect::<Result<Vec<_>>>()?;
    slope_report("abs_a11", &eps, &a11, &predicted, tolerance)
}

/// Slope of `|C₁ - C₂|` against its predicted scale.
pub fn cdiff_check(
    records: &[SweepRecord],
    kind: &EnvelopeKind,
    n: u32,
    tolerance: f64,
) -> Result<SlopeReport> {
    let w = fit_window(records);
    let eps = column(&w, "eps")?;
    let predicted = eps
        .iter()
        .map(|&e| cdiff_bound(kind, n, e))
        .collect::<Result<Vec<_>>>()?;
    slope_report("cdiff", &eps, &column(&w, "cdiff")?, &predicted, tolerance)
}

/// `max / min` of a positive column over all records.
pub fn stability(records: &[SweepRecord], field: &str, limit: f64) -> Result<StabilityReport> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let all: Vec<&SweepRecord> = records.iter().collect();
    let v = column(&all, field)?;
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (ratio, verdict) = if max == 0.0 {
        (1.0, Verdict::Vacuous)
    } else {
        let ratio = if min > 0.0 { max / min } else { f64::INFINITY };
        (ratio, Verdict::from(ratio <= limit))
    };
    Ok(StabilityReport {
        quantity: field.into(),
        min,
        max,
        ratio,
        limit,
        verdict,
    })
}

/// Sweep maximum of a column against its value at the largest ε.
pub fn boundedness_check(records: &[SweepRecord], field: &str, limit: f64) -> Result<StabilityReport> {
    let top = records
        .iter()
        .max_by(|a, b| a.eps.total_cmp(&b.eps))
        .ok_or(Error::NoRecords)?;
    let all: Vec<&SweepRecord> = records.iter().collect();
    let v = column(&all, field)?;
    let base = column(&[top], field)?[0];
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let (ratio, verdict) = if max == 0.0 {
        (1.0, Verdict::Vacuous)
    } else {
        let ratio = if base > 0.0 { max / base } else { f64::INFINITY };
        (ratio, Verdict::from(ratio < limit))
    };
    Ok(StabilityReport {
        quantity: format!("{field}_over_largest_eps"),
        min,
        max,
        ratio,
        limit,
        verdict,
    })
}

/// Stability of the `w = v₁ - ū₁` maximum (factor 3) and energy (factor 2).
pub fn residual_check(records: &[SweepRecord]) -> Result<[StabilityReport; 2]> {
    Ok([stability(records, "max_grad_w", 3.0)?, stability(records, "energy_w", 2.0)?])
}

/// ε-stability of the fitted envelope constant.
pub fn verify_envelope(records: &[SweepRecord]) -> Result<EnvelopeReport> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let constants: Vec<[f64; 2]> = records.iter().map(|r| [r.eps, r.envelope_c]).collect();
    let min = constants.iter().map(|c| c[1]).fold(f64::INFINITY, f64::min);
    let max = constants.iter().map(|c| c[1]).fold(f64::NEG_INFINITY, f64::max);
    let limit = 3.0;
    let (cmax_over_cmin, verdict) = if max == 0.0 {
        (None, Verdict::Vacuous)
    } else if min > 0.0 {
        let r = max / min;
        (Some(r), Verdict::from(r <= limit))
    } else {
        (None, Verdict::Fail)
    };
    Ok(EnvelopeReport {
        constants,
        cmax_over_cmin,
        limit,
        verdict,
    })
}

/// Lower bound on `P₁P₂`: `q(ε)` within a factor 3 over the sweep and not
/// below a third of its value at the largest ε, and `|b̃₁|` at least half
/// its value at the largest ε.
pub fn lower_bound_check(records: &[SweepRecord], kind: &EnvelopeKind, n: u32) -> Result<LowerReport> {
    let mut sorted: Vec<&SweepRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let top = *sorted.last().ok_or(Error::NoRecords)?;
    let rate = kind.rate(n);
    let q = sorted
        .iter()
        .map(|r| Ok([r.eps, r.grad_segment_min * r.eps / rate.eval(r.eps)?]))
        .collect::<Result<Vec<[f64; 2]>>>()?;
    let qmin = q.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let qmax = q.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let q_at_eps_max = q.last().unwrap()[1];
    let bt: Vec<f64> = sorted.iter().map(|r| r.btilde1.abs()).collect();
    let btilde1_min = bt.iter().cloned().fold(f64::INFINITY, f64::min);
    let btilde1_at_eps_max = top.btilde1.abs();
    let scale = sorted.iter().map(|r| r.a11.abs()).fold(0.0, f64::max).max(1.0);
    let (verdict, note) = if bt.iter().all(|b| *b <= 1e-12 * scale) {
        (Verdict::Vacuous, Some("vacuous: b̃₁[φ]=0".to_string()))
    } else {
        let ok = qmin > 0.0
            && qmax / qmin <= 3.0
            && qmin >= q_at_eps_max / 3.0
            && btilde1_min >= 0.5 * btilde1_at_eps_max;
        (Verdict::from(ok), None)
    };
    Ok(LowerReport {
        q,
        qmin,
        qmax,
        q_at_eps_max,
        btilde1_min,
        btilde1_at_eps_max,
        verdict,
        note,
    })
}
