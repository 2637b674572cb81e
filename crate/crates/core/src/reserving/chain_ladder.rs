use serde::{Deserialize, Serialize};

use crate::claims::RunOffTriangle;
use crate::error::{Error, Result};

/// Deterministic chain-ladder projection of a cumulative triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLadder {
    /// Development factor from column `j` to `j + 1`.
    pub factors: Vec<f64>,
    pub latest: Vec<f64>,
    pub ultimates: Vec<f64>,
    pub reserves: Vec<f64>,
    pub total: f64,
}

/// Volume-weighted development factors over the rows observed in both columns.
pub fn chain_ladder_reserve(tri: &RunOffTriangle) -> Result<ChainLadder> {
    if tri.n_origins() < 2 {
        return Err(Error::InsufficientData("chain ladder needs at least two origin periods".into()));
    }
    let n_dev = tri.n_dev();
    let mut factors = Vec::with_capacity(n_dev.saturating_sub(1));
    for j in 0..n_dev.saturating_sub(1) {
        let (mut num, mut den, mut rows) = (0.0, 0.0, 0);
        for row in &tri.cells {
            if let (Some(x), Some(y)) = (row[j], row[j + 1]) {
                num += y;
                den += x;
                rows += 1;
            }
        }
        if rows == 0 {
            log::warn!("no origin develops from column {j} to {}; factor set to 1", j + 1);
            factors.push(1.0);
        } else if den == 0.0 {
            return Err(Error::Degenerate(format!("development column {j} sums to zero")));
        } else {
            factors.push(num / den);
        }
    }
    let mut latest = Vec::new();
    let mut ultimates = Vec::new();
    for i in 0..tri.n_origins() {
        let (j, v) = tri.latest(i).unwrap_or((0, 0.0));
        latest.push(v);
        ultimates.push(factors[j.min(factors.len())..].iter().fold(v, |acc, f| acc * f));
    }
    let reserves: Vec<f64> = ultimates.iter().zip(&latest).map(|(u, l)| u - l).collect();
    let total = reserves.iter().sum();
    Ok(ChainLadder { factors, latest, ultimates, reserves, total })
}
