//! Granular (claim-by-claim) stochastic loss reserving.
//!
//! Each reported claim is modelled through its occurrence, reporting delay,
//! payment-count process and payment amounts, with a copula linking delay and
//! count. Fitted models are simulated forward to give distributions of RBNS and
//! IBNR reserves.

pub mod claims;
pub mod copula;
pub mod delay;
pub mod error;
pub mod freq;
pub mod numerics;
pub mod payment;
pub mod reserving;
pub mod severity;
pub mod synth;
pub mod time;

pub use claims::{ClaimRecord, ClaimType, PaymentEvent, Portfolio};
pub use error::{Error, Result};
pub use reserving::{FitConfig, GranularModel, Horizon, ValuationWindow};
pub use time::{Day, DAYS_PER_YEAR};
