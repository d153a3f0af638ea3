use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::checks::{
    boundedness_check, capacity_check, cdiff_check, lower_bound_check, rate_check, residual_check,
    verify_envelope, EnvelopeReport, LowerReport, SlopeReport, StabilityReport,
};
use super::SweepRecord;
use crate::asymptotics::Envelope;
use crate::error::{Error, Result};

/// Slope tolerance of the gradient rate fit.
pub const RATE_TOL: f64 = 0.05;
/// Slope tolerance of the capacity and constant-difference fits.
pub const SCALING_TOL: f64 = 0.07;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Rate,
    Envelope,
    Lower,
    Capacity,
    Cdiff,
    Residual,
    Boundedness,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Rate,
        Check::Envelope,
        Check::Lower,
        Check::Capacity,
        Check::Cdiff,
        Check::Residual,
        Check::Boundedness,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub envelope_kind: Envelope,
    pub n_records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<SlopeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<LowerReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity: Option<SlopeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cdiff: Option<SlopeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<Vec<StabilityReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundedness: Option<Vec<StabilityReport>>,
    pub passed: bool,
}

/// Runs the selected checks on a sweep.
pub fn report(records: &[SweepRecord], env: &Envelope, checks: &[Check]) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let has = |c: Check| checks.contains(&c);
    let mut r = Report {
        envelope_kind: *env,
        n_records: records.len(),
        fit: None,
        envelope: None,
        lower: None,
        capacity: None,
        cdiff: None,
        residual: None,
        boundedness: None,
        passed: true,
    };
    if has(Check::Rate) {
        r.fit = Some(rate_check(records, env, RATE_TOL)?);
    }
    if has(Check::Envelope) {
        r.envelope = Some(verify_envelope(records)?);
    }
    if has(Check::Lower) {
        r.lower = Some(lower_bound_check(records, &env.kind, env.n)?);
    }
    if has(Check::Capacity) {
        r.capacity = Some(capacity_check(records, &env.kind, env.n, SCALING_TOL)?);
    }
    if has(Check::Cdiff) {
        r.cdiff = Some(cdiff_check(records, &env.kind, env.n, SCALING_TOL)?);
    }
    if has(Check::Residual) {
        r.residual = Some(residual_check(records)?.to_vec());
    }
    if has(Check::Boundedness) {
        r.boundedness = Some(vec![
            boundedness_check(records, "grad_v12_max", 2.0)?,
            boundedness_check(records, "energy_w", 2.0)?,
        ]);
    }
    let mut verdicts = Vec::new();
    verdicts.extend(r.fit.iter().map(|s| s.verdict));
    verdicts.extend(r.capacity.iter().map(|s| s.verdict));
    verdicts.extend(r.cdiff.iter().map(|s| s.verdict));
    verdicts.extend(r.envelope.iter().map(|s| s.verdict));
    verdicts.extend(r.lower.iter().map(|s| s.verdict));
    verdicts.extend(r.residual.iter().flatten().map(|s| s.verdict));
    verdicts.extend(r.boundedness.iter().flatten().map(|s| s.verdict));
    r.passed = verdicts.iter().all(|v| v.passed());
    Ok(r)
}

/// Writes one CSV row per record with a fixed header.
pub fn write_records_csv(records: &[SweepRecord], out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(SweepRecord::FIELDS.iter().copied().chain(["flagged"]))?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Reads records written by [`write_records_csv`]; `#` lines are skipped.
pub fn read_records_csv(input: &mut dyn Read) -> Result<Vec<SweepRecord>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let records = r.deserialize().collect::<std::result::Result<Vec<SweepRecord>, _>>()?;
    Ok(records)
}
