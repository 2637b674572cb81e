use serde::{Deserialize, Serialize};

use super::Portfolio;
use crate::error::{Error, Result};
use crate::time::Day;

/// Cumulative paid amounts by origin period and development period.
///
/// `cells[i][j]` is `None` when the cell lies beyond the data-cutoff diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOffTriangle {
    /// First calendar year of each origin period.
    pub origins: Vec<i32>,
    pub period_years: u32,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl RunOffTriangle {
    /// Builds a triangle from rows of cumulative values; rows may be ragged.
    pub fn from_rows(origins: Vec<i32>, rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if origins.len() != rows.len() {
            return Err(Error::InvalidParameter("one origin label per row required".into()));
        }
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        let cells = rows
            .into_iter()
            .map(|mut r| {
                r.resize(width, None);
                r
            })
            .collect();
        Ok(RunOffTriangle { origins, period_years: 1, cells })
    }

    pub fn n_origins(&self) -> usize {
        self.cells.len()
    }

    pub fn n_dev(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    /// Latest observed cumulative value and its development index for origin `i`.
    pub fn latest(&self, i: usize) -> Option<(usize, f64)> {
        self.cells[i].iter().enumerate().filter_map(|(j, c)| c.map(|v| (j, v))).last()
    }

    /// Incremental amounts per cell, same shape as `cells`.
    pub fn incremental(&self) -> Vec<Vec<Option<f64>>> {
        self.cells
            .iter()
            .map(|row| {
                let mut prev = 0.0;
                row.iter()
                    .map(|c| {
                        c.map(|v| {
                            let inc = v - prev;
                            prev = v;
                            inc
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

/// Aggregates the portfolio into a cumulative paid triangle with origin and
/// development periods of `period_years` calendar years.
///
/// A cell is observed when its calendar period has started by the data cutoff,
/// so the last diagonal may be partially developed.
pub fn aggregate_triangle(p: &Portfolio, period_years: u32) -> Result<RunOffTriangle> {
    if p.is_empty() {
        return Err(Error::InsufficientData("cannot build a triangle from an empty portfolio".into()));
    }
    if period_years == 0 {
        return Err(Error::InvalidParameter("period length must be at least one year".into()));
    }
    let k = period_years as i32;
    let first_year = p.claims().iter().map(|c| c.accident_date.year()).min().expect("non-empty");
    let period = |d: Day| (d.year() - first_year).div_euclid(k);
    let last = period(p.data_cutoff());
    let n = (last + 1) as usize;

    let mut incr = vec![vec![0.0; n]; n];
    for c in p.claims() {
        let i = period(c.accident_date);
        for pay in &c.payments {
            let j = period(pay.date) - i;
            incr[i as usize][j as usize] += pay.amount;
        }
    }
    let cells = incr
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut acc = 0.0;
            row.into_iter()
                .enumerate()
                .map(|(j, v)| {
                    if i + j <= last as usize {
                        acc += v;
                        Some(acc)
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    let origins = (0..n as i32).map(|i| first_year + i * k).collect();
    Ok(RunOffTriangle { origins, period_years, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::{ClaimRecord, ClaimType, PaymentEvent};

    fn claim(id: &str, acc: Day, pays: &[(Day, f64)]) -> ClaimRecord {
        let payments = pays.iter().map(|&(date, amount)| PaymentEvent { date, amount }).collect();
        ClaimRecord::new(id, ClaimType::MaterialDamage, acc, acc, payments).unwrap()
    }

    fn ymd(y: i32, m: u32, d: u32) -> Day {
        Day::from_ymd(y, m, d).unwrap()
    }

    #[test]
    fn single_payment_single_cell() {
        let p = Portfolio::from_claims(vec![claim("a", ymd(2000, 3, 1), &[(ymd(2000, 5, 1), 42.0)])]).unwrap();
        let t = aggregate_triangle(&p, 1).unwrap();
        assert_eq!(t.cells, vec![vec![Some(42.0)]]);
    }

    #[test]
    fn cumulation_and_censoring() {
        let p = Portfolio::new(
            vec![
                claim("a", ymd(2000, 3, 1), &[(ymd(2000, 5, 1), 100.0), (ymd(2001, 2, 1), 50.0)]),
                claim("b", ymd(2001, 6, 1), &[(ymd(2001, 7, 1), 10.0)]),
            ],
            ymd(2001, 12, 31),
        )
        .unwrap();
        let t = aggregate_triangle(&p, 1).unwrap();
        assert_eq!(t.origins, vec![2000, 2001]);
        assert_eq!(t.cells[0], vec![Some(100.0), Some(150.0)]);
        assert_eq!(t.cells[1], vec![Some(10.0), None]);
        assert_eq!(t.latest(0), Some((1, 150.0)));
        assert_eq!(t.incremental()[0], vec![Some(100.0), Some(50.0)]);
    }

    #[test]
    fn empty_portfolio_rejected() {
        let p = Portfolio::from_claims(vec![]).unwrap();
        assert!(aggregate_triangle(&p, 1).is_err());
    }
}
