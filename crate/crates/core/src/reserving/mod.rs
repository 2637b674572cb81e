//! Prediction of future payments: fitted model, RBNS and IBNR predictors, Monte
//! Carlo reserve distributions, the chain-ladder baseline and backtesting.

mod backtest;
mod chain_ladder;
mod model;
mod output;
mod predict;
mod simulate;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::time::{Day, DAYS_PER_YEAR};

pub use backtest::{backtest, BacktestReport, LevelCheck};
pub use chain_ladder::{chain_ladder_reserve, ChainLadder};
pub use model::{fit_model, FitConfig, FitReport, GranularModel, MatchKey, TypeFitReport, TypeModel, YearSummary};
pub use output::{write_cash_flows_csv, write_scenarios_csv, ReserveReport};
pub use predict::{
    ibnr_count_conditional, ibnr_count_pmf, ibnr_simulate, rbns_predict, reporting_prob_window, SimulatedClaim,
};
pub(crate) use predict::delay_uniforms;
pub use simulate::{
    reserve_summary, simulate_reserves, QuantileValue, ReserveDistribution, ReserveSummary, Scenario, Stat,
    DEFAULT_LEVELS,
};

/// Default run-off horizon of the ultimate view, in years.
pub const DEFAULT_RUNOFF_YEARS: u32 = 15;

/// The prediction window `(a, b]`: payments dated strictly after day `a` and on or
/// before day `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationWindow {
    pub a: Day,
    pub b: Day,
}

impl ValuationWindow {
    pub fn new(a: Day, b: Day) -> Result<ValuationWindow> {
        if b <= a {
            return Err(Error::InvalidParameter(format!("window end {b} must be after the valuation date {a}")));
        }
        Ok(ValuationWindow { a, b })
    }

    /// `(a, a + 365]`.
    pub fn one_year(a: Day) -> ValuationWindow {
        ValuationWindow { a, b: a.offset(365) }
    }

    /// `(a, a + years]` with years of 365.25 days, rounded to whole days.
    pub fn ultimate(a: Day, years: u32) -> ValuationWindow {
        ValuationWindow { a, b: a.offset((f64::from(years.max(1)) * DAYS_PER_YEAR).round() as i32) }
    }

    pub fn days(&self) -> i32 {
        self.a.days_until(self.b)
    }

    pub fn contains(&self, d: Day) -> bool {
        d > self.a && d <= self.b
    }
}

/// How the window end is chosen from the valuation date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    OneYear,
    Ultimate { years: u32 },
    Until(Day),
}

impl Horizon {
    pub fn window(&self, a: Day) -> Result<ValuationWindow> {
        match *self {
            Horizon::OneYear => Ok(ValuationWindow::one_year(a)),
            Horizon::Ultimate { years } => Ok(ValuationWindow::ultimate(a, years)),
            Horizon::Until(b) => ValuationWindow::new(a, b),
        }
    }
}

impl FromStr for Horizon {
    type Err = Error;

    /// `one-year`, `ultimate`, `ultimate:<years>` or an ISO date.
    fn from_str(s: &str) -> Result<Horizon> {
        let s = s.trim();
        match s {
            "one-year" => Ok(Horizon::OneYear),
            "ultimate" => Ok(Horizon::Ultimate { years: DEFAULT_RUNOFF_YEARS }),
            _ => {
                if let Some(y) = s.strip_prefix("ultimate:") {
                    let years = y
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad run-off length in horizon '{s}'")))?;
                    return Ok(Horizon::Ultimate { years });
                }
                Day::parse_iso(s)
                    .map(Horizon::Until)
                    .map_err(|_| Error::InvalidParameter(format!("horizon must be one-year, ultimate or a date, got '{s}'")))
            }
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::OneYear => write!(f, "one-year"),
            Horizon::Ultimate { years } => write!(f, "ultimate:{years}"),
            Horizon::Until(d) => write!(f, "{d}"),
        }
    }
}
