use serde::{Deserialize, Serialize};

use super::model::{fit_model, FitConfig, FitReport, GranularModel};
use super::simulate::{reserve_summary, simulate_reserves, ReserveDistribution, ReserveSummary};
use super::ValuationWindow;
use crate::claims::Portfolio;
use crate::error::{Error, Result};
use crate::numerics::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub level: f64,
    pub quantile: f64,
    /// The realised total is at or below the predicted quantile.
    pub covered: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestReport {
    pub window: ValuationWindow,
    /// Paid in `(a, b]` on claims that occurred by `a`.
    pub actual: f64,
    pub actual_rbns: f64,
    pub actual_ibnr: f64,
    pub summary: ReserveSummary,
    /// Share of scenarios at or below the realised total.
    pub percentile: f64,
    pub checks: Vec<LevelCheck>,
    /// The 5% and 95% predictive quantiles.
    pub band: (f64, f64),
    pub in_band: bool,
    pub fit: FitReport,
}

/// Fits on the data known at `a`, predicts `(a, b]` and compares with what was paid.
pub fn backtest(
    p: &Portfolio,
    cfg: &FitConfig,
    window: &ValuationWindow,
    n_scenarios: usize,
    seed: u64,
    levels: &[f64],
) -> Result<(BacktestReport, ReserveDistribution, GranularModel)> {
    if window.a >= p.data_cutoff() {
        return Err(Error::InvalidParameter(format!(
            "valuation date {} leaves no holdout before the data cutoff {}",
            window.a,
            p.data_cutoff()
        )));
    }
    if window.b > p.data_cutoff() {
        return Err(Error::InvalidParameter(format!(
            "window end {} is after the data cutoff {}",
            window.b,
            p.data_cutoff()
        )));
    }
    let known = p.as_of(window.a)?;
    let (model, fit) = fit_model(&known, cfg)?;
    let dist = simulate_reserves(&model, &known, window, n_scenarios, seed)?;
    let summary = reserve_summary(&dist, levels)?;

    let (mut actual_rbns, mut actual_ibnr) = (0.0, 0.0);
    for c in p.claims().iter().filter(|c| c.accident_date <= window.a) {
        let paid = c.paid_between(window.a, window.b);
        if c.reporting_date <= window.a {
            actual_rbns += paid;
        } else {
            actual_ibnr += paid;
        }
    }
    let actual = actual_rbns + actual_ibnr;
    let mut totals = dist.totals();
    totals.sort_by(f64::total_cmp);
    let percentile = totals.iter().filter(|&&x| x <= actual).count() as f64 / totals.len() as f64;
    let checks = summary
        .total
        .quantiles
        .iter()
        .map(|q| LevelCheck { level: q.level, quantile: q.value, covered: actual <= q.value })
        .collect();
    let band = (stats::quantile_sorted(&totals, 0.05), stats::quantile_sorted(&totals, 0.95));
    let report = BacktestReport {
        window: *window,
        actual,
        actual_rbns,
        actual_ibnr,
        summary,
        percentile,
        checks,
        band,
        in_band: band.0 <= actual && actual <= band.1,
        fit,
    };
    Ok((report, dist, model))
}
