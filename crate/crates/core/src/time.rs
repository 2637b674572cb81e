//! Calendar handling.
//!
//! Dates are integer day counts from 2000-01-01. A recorded date `d` stands for the
//! half-open instant interval `[d, d + 1)`, so "paid on or before day `a`" means an
//! instant strictly below `a + 1`. Internal claim time is measured in years of
//! [`DAYS_PER_YEAR`] days.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Length of a year in days when converting day counts to continuous years.
pub const DAYS_PER_YEAR: f64 = 365.25;

/// Days from 0001-01-01 (CE) to 2000-01-01.
const EPOCH_CE_DAYS: i32 = 730_120;

/// A calendar date as a day count from the 2000-01-01 epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Day(pub i32);

impl Day {
    pub const EPOCH: Day = Day(0);

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Result<Day> {
        let date = NaiveDate::from_ymd_opt(year, month, day)
            .ok_or_else(|| Error::Data(format!("invalid calendar date {year}-{month:02}-{day:02}")))?;
        Ok(Day::from_naive(date))
    }

    pub fn from_naive(date: NaiveDate) -> Day {
        Day(date.num_days_from_ce() - EPOCH_CE_DAYS)
    }

    pub fn to_naive(self) -> NaiveDate {
        NaiveDate::from_num_days_from_ce_opt(self.0 + EPOCH_CE_DAYS).expect("day count within chrono range")
    }

    /// Parses an ISO-8601 calendar date (`YYYY-MM-DD`).
    pub fn parse_iso(s: &str) -> Result<Day> {
        let date = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map_err(|e| Error::Data(format!("bad date '{s}': {e}")))?;
        Ok(Day::from_naive(date))
    }

    pub fn year(self) -> i32 {
        self.to_naive().year()
    }

    /// First day of the given calendar year.
    pub fn year_start(year: i32) -> Day {
        Day::from_ymd(year, 1, 1).expect("January 1st exists")
    }

    /// Continuous years since the epoch.
    pub fn years_since_epoch(self) -> f64 {
        f64::from(self.0) / DAYS_PER_YEAR
    }

    pub fn offset(self, days: i32) -> Day {
        Day(self.0 + days)
    }

    pub fn days_until(self, later: Day) -> i32 {
        later.0 - self.0
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_naive().format("%Y-%m-%d"))
    }
}

pub fn days_to_years(days: f64) -> f64 {
    days / DAYS_PER_YEAR
}

pub fn years_to_days(years: f64) -> f64 {
    years * DAYS_PER_YEAR
}
