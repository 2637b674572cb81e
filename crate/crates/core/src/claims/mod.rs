//! Claim records, portfolios and the RBNS/IBNR partition at a valuation date.

mod csv_io;
mod triangle;

pub use csv_io::{ingest_csv, write_csv, IngestOptions, IngestReport, Ingested, RowError};
pub use triangle::{aggregate_triangle, RunOffTriangle};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::time::Day;

/// Line of claim recorded in the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClaimType {
    BodilyInjury,
    MaterialDamage,
}

impl ClaimType {
    pub const ALL: [ClaimType; 2] = [ClaimType::BodilyInjury, ClaimType::MaterialDamage];

    pub fn index(self) -> usize {
        match self {
            ClaimType::BodilyInjury => 0,
            ClaimType::MaterialDamage => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimType::BodilyInjury => "BodilyInjury",
            ClaimType::MaterialDamage => "MaterialDamage",
        }
    }

    /// Two-letter code, e.g. for claim ids.
    pub fn code(self) -> &'static str {
        match self {
            ClaimType::BodilyInjury => "BI",
            ClaimType::MaterialDamage => "MD",
        }
    }
}

impl fmt::Display for ClaimType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClaimType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let token: String = s.trim().chars().filter(|c| *c != '_' && *c != ' ' && *c != '-').collect();
        match token.to_ascii_lowercase().as_str() {
            "bodilyinjury" | "bi" => Ok(ClaimType::BodilyInjury),
            "materialdamage" | "md" => Ok(ClaimType::MaterialDamage),
            _ => Err(Error::Data(format!("unknown claim type '{s}'"))),
        }
    }
}

/// One payment credited on a claim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaymentEvent {
    pub date: Day,
    pub amount: f64,
}

/// The observed development of one claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub claim_id: String,
    pub claim_type: ClaimType,
    pub accident_date: Day,
    pub reporting_date: Day,
    /// Sorted by date.
    pub payments: Vec<PaymentEvent>,
}

impl ClaimRecord {
    /// Validates the record invariants and sorts payments by date.
    pub fn new(
        claim_id: impl Into<String>,
        claim_type: ClaimType,
        accident_date: Day,
        reporting_date: Day,
        mut payments: Vec<PaymentEvent>,
    ) -> Result<Self> {
        let claim_id = claim_id.into();
        if reporting_date < accident_date {
            return Err(Error::Data(format!(
                "claim {claim_id}: reporting date {reporting_date} before accident date {accident_date}"
            )));
        }
        for p in &payments {
            if p.date < reporting_date {
                return Err(Error::Data(format!(
                    "claim {claim_id}: payment on {} before reporting date {reporting_date}",
                    p.date
                )));
            }
            if p.amount == 0.0 || !p.amount.is_finite() {
                return Err(Error::Data(format!("claim {claim_id}: payment amount must be finite and non-zero")));
            }
        }
        payments.sort_by_key(|p| p.date);
        Ok(ClaimRecord { claim_id, claim_type, accident_date, reporting_date, payments })
    }

    /// Reporting delay in whole days.
    pub fn reporting_delay(&self) -> i32 {
        self.accident_date.days_until(self.reporting_date)
    }

    pub fn total_paid(&self) -> f64 {
        self.payments.iter().map(|p| p.amount).sum()
    }

    /// The claim as it would have been observed at the end of day `a`.
    pub fn censored_at(&self, a: Day) -> ClaimRecord {
        ClaimRecord {
            payments: self.payments.iter().copied().filter(|p| p.date <= a).collect(),
            ..self.clone()
        }
    }

    /// Payments strictly after day `a` and on or before day `b`.
    pub fn paid_between(&self, a: Day, b: Day) -> f64 {
        self.payments
            .iter()
            .filter(|p| p.date > a && p.date <= b)
            .map(|p| p.amount)
            .sum()
    }

    fn last_date(&self) -> Day {
        self.payments.last().map_or(self.reporting_date, |p| p.date.max(self.reporting_date))
    }
}

/// A set of claims ordered by accident date, observed up to `data_cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    claims: Vec<ClaimRecord>,
    data_cutoff: Day,
}

impl Portfolio {
    /// Builds a portfolio, sorting claims by accident date (ties by claim id).
    /// Fails if any claim date lies after `data_cutoff`.
    pub fn new(mut claims: Vec<ClaimRecord>, data_cutoff: Day) -> Result<Self> {
        if let Some(c) = claims.iter().find(|c| c.last_date() > data_cutoff) {
            return Err(Error::Data(format!(
                "claim {} has dates after the data cutoff {data_cutoff}",
                c.claim_id
            )));
        }
        claims.sort_by(|a, b| a.accident_date.cmp(&b.accident_date).then_with(|| a.claim_id.cmp(&b.claim_id)));
        Ok(Portfolio { claims, data_cutoff })
    }

    /// Portfolio whose cutoff is the latest date present (the epoch when empty).
    pub fn from_claims(claims: Vec<ClaimRecord>) -> Result<Self> {
        let cutoff = claims.iter().map(ClaimRecord::last_date).max().unwrap_or(Day::EPOCH);
        Portfolio::new(claims, cutoff)
    }

    pub fn claims(&self) -> &[ClaimRecord] {
        &self.claims
    }

    pub fn data_cutoff(&self) -> Day {
        self.data_cutoff
    }

    pub fn len(&self) -> usize {
        self.claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }

    pub fn of_type(&self, claim_type: ClaimType) -> Portfolio {
        Portfolio {
            claims: self.claims.iter().filter(|c| c.claim_type == claim_type).cloned().collect(),
            data_cutoff: self.data_cutoff,
        }
    }

    pub fn claim_types(&self) -> Vec<ClaimType> {
        ClaimType::ALL
            .into_iter()
            .filter(|t| self.claims.iter().any(|c| c.claim_type == *t))
            .collect()
    }

    /// The data as known at the end of day `a`: claims reported by `a`, payments
    /// censored at `a`, cutoff moved to `a`.
    pub fn as_of(&self, a: Day) -> Result<Portfolio> {
        let (rbns, _) = split_rbns_ibnr(self, a)?;
        Ok(Portfolio { claims: rbns, data_cutoff: a })
    }
}

/// Partitions the incurred claims at valuation date `a`.
///
/// The first output holds claims reported on or before `a`, with payments censored
/// at `a`. The second holds claims that occurred on or before `a` but were reported
/// later; these are unobservable at `a` and are only useful for backtesting.
pub fn split_rbns_ibnr(p: &Portfolio, a: Day) -> Result<(Vec<ClaimRecord>, Vec<ClaimRecord>)> {
    if a > p.data_cutoff {
        return Err(Error::InvalidParameter(format!(
            "valuation date {a} is after the data cutoff {}",
            p.data_cutoff
        )));
    }
    let mut rbns = Vec::new();
    let mut future = Vec::new();
    for c in &p.claims {
        if c.reporting_date <= a {
            rbns.push(c.censored_at(a));
        } else if c.accident_date <= a {
            future.push(c.clone());
        }
    }
    Ok((rbns, future))
}
