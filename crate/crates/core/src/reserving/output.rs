use serde::{Deserialize, Serialize};
use std::io::Write;

use super::simulate::{ReserveDistribution, ReserveSummary};
use crate::error::Result;

/// Summary document written by the `reserve` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReserveReport {
    pub valuation_date: String,
    pub horizon_end: String,
    pub window_days: i32,
    pub horizon: String,
    pub seed: u64,
    pub summary: ReserveSummary,
}

impl ReserveReport {
    pub fn new(d: &ReserveDistribution, horizon: impl Into<String>, summary: ReserveSummary) -> ReserveReport {
        ReserveReport {
            valuation_date: d.window.a.to_string(),
            horizon_end: d.window.b.to_string(),
            window_days: d.window.days(),
            horizon: horizon.into(),
            seed: d.seed,
            summary,
        }
    }
}

/// One row per scenario: totals, parts, per-type totals and counts.
pub fn write_scenarios_csv<W: Write>(out: W, d: &ReserveDistribution) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["scenario".to_string(), "total".into(), "rbns".into(), "ibnr".into()];
    header.extend(d.claim_types.iter().map(|t| t.as_str().to_lowercase()));
    header.extend(["rbns_payments".into(), "ibnr_payments".into(), "ibnr_claims".into()]);
    w.write_record(&header)?;
    for (i, s) in d.scenarios.iter().enumerate() {
        let mut row = vec![i.to_string(), s.total().to_string(), s.rbns.to_string(), s.ibnr.to_string()];
        row.extend(s.by_type.iter().map(f64::to_string));
        row.extend([s.rbns_payments.to_string(), s.ibnr_payments.to_string(), s.ibnr_claims.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Expected payments per period of the window, for plotting.
pub fn write_cash_flows_csv<W: Write>(out: W, d: &ReserveDistribution, summary: &ReserveSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["period", "start", "end", "mean"])?;
    for (i, m) in summary.mean_cash_flows.iter().enumerate() {
        let (s, e) = d.period_bounds(i);
        w.write_record([(i + 1).to_string(), s.to_string(), e.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
