use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::GranularModel;
use super::predict::{ibnr_simulate, RbnsState};
use super::ValuationWindow;
use crate::claims::{split_rbns_ibnr, ClaimType, PaymentEvent, Portfolio};
use crate::error::{Error, Result};
use crate::numerics::stats;
use crate::time::{Day, DAYS_PER_YEAR};

/// Quantile levels reported by default; 0.995 is the one-year solvency level.
pub const DEFAULT_LEVELS: [f64; 4] = [0.5, 0.75, 0.95, 0.995];

/// Outcome of one Monte Carlo scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub rbns: f64,
    pub ibnr: f64,
    /// Aligned with [`ReserveDistribution::claim_types`].
    pub by_type: Vec<f64>,
    /// Paid per cash-flow period of the window.
    pub cash_flows: Vec<f64>,
    pub rbns_payments: u64,
    pub ibnr_payments: u64,
    pub ibnr_claims: u64,
}

impl Scenario {
    pub fn total(&self) -> f64 {
        self.rbns + self.ibnr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReserveDistribution {
    pub window: ValuationWindow,
    pub seed: u64,
    pub claim_types: Vec<ClaimType>,
    /// Length of a cash-flow period (one twelfth of a year).
    pub period_days: f64,
    pub scenarios: Vec<Scenario>,
}

impl ReserveDistribution {
    pub fn n_periods(&self) -> usize {
        n_periods(&self.window, self.period_days)
    }

    /// First and last day of cash-flow period `i`.
    pub fn period_bounds(&self, i: usize) -> (Day, Day) {
        let p = self.period_days;
        let start = (i as f64 * p).ceil() as i32 + 1;
        let end = (((i + 1) as f64 * p).ceil() as i32).min(self.window.days());
        (self.window.a.offset(start), self.window.a.offset(end))
    }

    pub fn totals(&self) -> Vec<f64> {
        self.scenarios.iter().map(Scenario::total).collect()
    }
}

fn n_periods(w: &ValuationWindow, period_days: f64) -> usize {
    (f64::from(w.days()) / period_days).ceil().max(1.0) as usize
}

struct Accumulator<'a> {
    window: &'a ValuationWindow,
    period_days: f64,
    s: Scenario,
}

impl Accumulator<'_> {
    fn add(&mut self, ty: usize, p: &PaymentEvent, rbns: bool) {
        let offset = self.window.a.days_until(p.date);
        debug_assert!(offset >= 1 && offset <= self.window.days());
        let idx = ((f64::from(offset - 1) / self.period_days).floor() as usize).min(self.s.cash_flows.len() - 1);
        self.s.cash_flows[idx] += p.amount;
        self.s.by_type[ty] += p.amount;
        if rbns {
            self.s.rbns += p.amount;
            self.s.rbns_payments += 1;
        } else {
            self.s.ibnr += p.amount;
            self.s.ibnr_payments += 1;
        }
    }
}

/// Simulates `n_scenarios` independent developments of the portfolio over the window.
///
/// Each scenario continues every claim reported by `a` and adds simulated IBNR
/// claims. Scenario `i` uses its own random stream derived from `(seed, i)`, so the
/// result does not depend on how many threads run the loop.
pub fn simulate_reserves(
    model: &GranularModel,
    portfolio: &Portfolio,
    window: &ValuationWindow,
    n_scenarios: usize,
    seed: u64,
) -> Result<ReserveDistribution> {
    if n_scenarios == 0 {
        return Err(Error::InvalidParameter("at least one scenario is required".into()));
    }
    model.validate()?;
    let (reported, _) = split_rbns_ibnr(portfolio, window.a)?;
    let claim_types: Vec<ClaimType> = model.types.iter().map(|m| m.claim_type).collect();
    let mut open: Vec<(usize, RbnsState)> = Vec::new();
    for c in &reported {
        let k = claim_types.iter().position(|&t| t == c.claim_type).ok_or_else(|| {
            Error::InvalidParameter(format!("portfolio has {} claims but the model has no such component", c.claim_type))
        })?;
        if let Some(st) = RbnsState::new(&model.types[k], c, window) {
            if st.mass > 0.0 {
                open.push((k, st));
            }
        }
    }
    let period_days = DAYS_PER_YEAR / 12.0;
    let n_per = n_periods(window, period_days);

    let run = |i: usize| -> Result<Scenario> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut acc = Accumulator {
            window,
            period_days,
            s: Scenario {
                rbns: 0.0,
                ibnr: 0.0,
                by_type: vec![0.0; claim_types.len()],
                cash_flows: vec![0.0; n_per],
                rbns_payments: 0,
                ibnr_payments: 0,
                ibnr_claims: 0,
            },
        };
        for (k, st) in &open {
            for p in st.draw(&model.types[*k], window, &mut rng) {
                acc.add(*k, &p, true);
            }
        }
        for c in ibnr_simulate(model, window, &mut rng)? {
            let k = claim_types.iter().position(|&t| t == c.claim_type).expect("model type");
            acc.s.ibnr_claims += 1;
            for p in &c.payments {
                acc.add(k, p, false);
            }
        }
        Ok(acc.s)
    };
    let scenarios = (0..n_scenarios).into_par_iter().map(run).collect::<Result<Vec<_>>>()?;
    Ok(ReserveDistribution { window: *window, seed, claim_types, period_days, scenarios })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileValue {
    pub level: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub quantiles: Vec<QuantileValue>,
}

impl Stat {
    fn of(mut xs: Vec<f64>, levels: &[f64]) -> Stat {
        let mean = stats::mean(&xs);
        let sd = stats::std_dev(&xs);
        xs.sort_by(f64::total_cmp);
        let quantiles =
            levels.iter().map(|&level| QuantileValue { level, value: stats::quantile_sorted(&xs, level) }).collect();
        Stat { mean, sd, quantiles }
    }

    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.quantiles.iter().find(|q| (q.level - level).abs() < 1e-12).map(|q| q.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeStat {
    pub claim_type: ClaimType,
    #[serde(flatten)]
    pub stat: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReserveSummary {
    pub n_scenarios: usize,
    pub total: Stat,
    pub rbns: Stat,
    pub ibnr: Stat,
    pub by_type: Vec<TypeStat>,
    /// Mean paid per cash-flow period.
    pub mean_cash_flows: Vec<f64>,
}

/// Mean, standard deviation and empirical quantiles (linear interpolation between
/// order statistics) of the total reserve and its parts. The 0.995 level is always
/// included.
pub fn reserve_summary(d: &ReserveDistribution, levels: &[f64]) -> Result<ReserveSummary> {
    if d.scenarios.is_empty() {
        return Err(Error::InsufficientData("no scenarios to summarise".into()));
    }
    if let Some(l) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::InvalidParameter(format!("quantile level {l} outside [0, 1]")));
    }
    let mut lv: Vec<f64> = levels.to_vec();
    lv.push(0.995);
    lv.sort_by(f64::total_cmp);
    lv.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let col = |f: &dyn Fn(&Scenario) -> f64| d.scenarios.iter().map(f).collect::<Vec<f64>>();
    let n = d.scenarios.len() as f64;
    let mean_cash_flows = (0..d.n_periods())
        .map(|i| d.scenarios.iter().map(|s| s.cash_flows[i]).sum::<f64>() / n)
        .collect();
    Ok(ReserveSummary {
        n_scenarios: d.scenarios.len(),
        total: Stat::of(col(&Scenario::total), &lv),
        rbns: Stat::of(col(&|s| s.rbns), &lv),
        ibnr: Stat::of(col(&|s| s.ibnr), &lv),
        by_type: d
            .claim_types
            .iter()
            .enumerate()
            .map(|(k, &claim_type)| TypeStat { claim_type, stat: Stat::of(col(&|s| s.by_type[k]), &lv) })
            .collect(),
        mean_cash_flows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(totals: &[f64]) -> ReserveDistribution {
        let window = ValuationWindow::one_year(Day(0));
        ReserveDistribution {
            window,
            seed: 0,
            claim_types: vec![ClaimType::BodilyInjury],
            period_days: DAYS_PER_YEAR / 12.0,
            scenarios: totals
                .iter()
                .map(|&x| Scenario {
                    rbns: x,
                    ibnr: 0.0,
                    by_type: vec![x],
                    cash_flows: {
                        let mut v = vec![0.0; 12];
                        v[0] = x;
                        v
                    },
                    rbns_payments: 1,
                    ibnr_payments: 0,
                    ibnr_claims: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn constant_scenarios() {
        let s = reserve_summary(&dist(&[100.0; 20]), &DEFAULT_LEVELS).unwrap();
        assert_eq!(s.total.sd, 0.0);
        assert!(s.total.quantiles.iter().all(|q| q.value == 100.0));
        assert_eq!(s.total.quantiles.len(), 4);
    }

    #[test]
    fn median_interpolates() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = reserve_summary(&dist(&xs), &[0.5]).unwrap();
        assert_eq!(s.total.quantile(0.5), Some(50.5));
        assert!(s.total.quantile(0.995).is_some());
    }

    #[test]
    fn empty_rejected() {
        assert!(reserve_summary(&dist(&[]), &DEFAULT_LEVELS).is_err());
        assert!(reserve_summary(&dist(&[1.0]), &[1.5]).is_err());
    }

    #[test]
    fn periods_tile_the_window() {
        let d = dist(&[1.0]);
        assert_eq!(d.n_periods(), 12);
        let mut next = d.window.a.offset(1);
        for i in 0..d.n_periods() {
            let (s, e) = d.period_bounds(i);
            assert_eq!(s, next);
            assert!(e >= s);
            next = e.offset(1);
        }
        assert_eq!(next, d.window.b.offset(1));
    }
}
