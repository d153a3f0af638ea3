use serde::{Deserialize, Serialize};

use super::{SweepRecord, WINDOW_DRIFT};
use crate::error::{Error, Result};

/// Least-squares line through `(log x, log y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Smallest and largest `x` used.
    #[serde(rename = "eps_range")]
    pub x_range: [f64; 2],
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!("{} x values but {} y values", xs.len(), ys.len())));
    }
    if xs.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {}", xs.len())));
    }
    for (x, y) in xs.iter().zip(ys) {
        if !(*x > 0.0 && x.is_finite()) {
            return Err(Error::Fit(format!("nonpositive x value {x}")));
        }
        if !(*y > 0.0 && y.is_finite()) {
            return Err(Error::Fit(format!("nonpositive y value {y} at x = {x}")));
        }
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        n_points: xs.len(),
        x_range: [lo, hi],
    })
}

/// Records entering a fit: unflagged, and without the largest ε when its
/// drift exceeds the window threshold.
pub(crate) fn fit_window(records: &[SweepRecord]) -> Vec<&SweepRecord> {
    let mut kept: Vec<&SweepRecord> = records.iter().filter(|r| !r.flagged).collect();
    kept.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    if kept.last().is_some_and(|r| r.refinement_drift > WINDOW_DRIFT) {
        kept.pop();
    }
    kept
}

/// Fits `log y_field` against `log x_field` over the fit window.
pub fn fit_exponent(records: &[SweepRecord], x_field: &str, y_field: &str) -> Result<FitResult> {
    let field = |r: &SweepRecord, f: &str| {
        r.get(f)
            .ok_or_else(|| Error::Fit(format!("unknown record field {f:?}")))
    };
    let window = fit_window(records);
    let xs = window.iter().map(|r| field(r, x_field)).collect::<Result<Vec<_>>>()?;
    let ys = window.iter().map(|r| field(r, y_field)).collect::<Result<Vec<_>>>()?;
    fit_loglog(&xs, &ys)
}
