//! Synthetic portfolios drawn from a fully specified model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::claims::{ClaimRecord, ClaimType, PaymentEvent, Portfolio};
use crate::copula::{conditional_count_quantile, CopulaFamily, CopulaSpec, HacSpec};
use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::freq::{CountDistribution, OccurrenceModel};
use crate::payment::{CountProcess, IntensityFunction};
use crate::reserving::{GranularModel, TypeModel};
use crate::severity::{SeverityFamily, SeverityModel};
use crate::time::{Day, DAYS_PER_YEAR};

/// Generator settings: the true model and the accident period `[start, end]`,
/// which is also the observation period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub start: Day,
    pub end: Day,
    pub model: GranularModel,
}

impl SynthConfig {
    /// Replaces each occurrence model by Poisson gaps so that about `n` accidents
    /// occur in `[start, end]`, keeping the current split between claim types.
    pub fn with_expected_claims(mut self, n: usize) -> Result<SynthConfig> {
        let days = f64::from(self.start.days_until(self.end)) + 1.0;
        let mid = Day(self.start.0 + self.start.days_until(self.end) / 2).year();
        let rates: Vec<f64> = self.model.types.iter().map(|m| m.occurrence.daily_rate(mid)).collect();
        let total: f64 = rates.iter().sum();
        if n == 0 || total <= 0.0 {
            return Err(Error::InvalidParameter("expected claim count must be positive".into()));
        }
        for (m, r) in self.model.types.iter_mut().zip(rates) {
            let expected = n as f64 * r / total;
            m.occurrence = OccurrenceModel::constant(CountDistribution::poisson(days / expected)?);
            m.exposure_start = self.start;
        }
        Ok(self)
    }
}

impl Default for SynthConfig {
    /// Two claim types over 2000-2016 with moderate dependence.
    fn default() -> Self {
        let start = Day::from_ymd(2000, 1, 1).expect("valid date");
        let end = Day::from_ymd(2016, 12, 31).expect("valid date");
        let bi_copula = CopulaSpec::time_varying(crate::copula::FamilyTag::Clayton, 1.5f64.ln(), 0.5f64.ln(), 0.8)
            .expect("valid path");
        let md_copula = CopulaSpec::fixed(CopulaFamily::Clayton { theta: 1.0 }).expect("valid copula");
        let bi = TypeModel {
            claim_type: ClaimType::BodilyInjury,
            exposure_start: start,
            occurrence: OccurrenceModel::constant(CountDistribution::negative_binomial(2.0, 0.6).expect("valid")),
            delay: DelayModel::weibull_tv(1.2, 45f64.ln(), -0.02).expect("valid"),
            payments: CountProcess::new(IntensityFunction::exponential(3.0, 1.2).expect("valid")),
            severity: SeverityModel::Iid { family: SeverityFamily::LogNormal { mu: 8.0, sigma: 1.5 } },
            copula: bi_copula,
        };
        let md = TypeModel {
            claim_type: ClaimType::MaterialDamage,
            exposure_start: start,
            occurrence: OccurrenceModel::constant(CountDistribution::poisson(0.5).expect("valid")),
            delay: DelayModel::weibull_tv(1.5, 15f64.ln(), 0.0).expect("valid"),
            payments: CountProcess::new(IntensityFunction::exponential(4.0, 3.0).expect("valid")),
            severity: SeverityModel::Iid { family: SeverityFamily::Gamma { shape: 1.5, rate: 1.5 / 1500.0 } },
            copula: md_copula,
        };
        let hac = HacSpec::new(CopulaFamily::Clayton { theta: 0.3 }, [bi.copula, md.copula]).expect("nested");
        SynthConfig { start, end, model: GranularModel { types: vec![bi, md], inter_type: Some(hac) } }
    }
}

/// Draws every accident in `[start, end]`, keeps those reported by `end`, and
/// records their payments up to `end`.
///
/// Accidents of the two claim types on the same day are paired in order; paired
/// claims share the id prefix (`P0000042-BI`, `P0000042-MD`) and, when the model
/// couples the types, their delays are drawn jointly from the outer copula. The
/// count observed at `end` is drawn from the copula-conditional law given the delay.
pub fn generate_portfolio(cfg: &SynthConfig, seed: u64) -> Result<Portfolio> {
    if cfg.end <= cfg.start {
        return Err(Error::InvalidParameter(format!("synthetic period {}..{} is empty", cfg.start, cfg.end)));
    }
    cfg.model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arrivals: Vec<Vec<Day>> = cfg
        .model
        .types
        .iter()
        .map(|m| m.occurrence.simulate_arrivals(cfg.start, cfg.end, &mut rng))
        .collect::<Result<_>>()?;
    let uniforms = crate::reserving::delay_uniforms(&cfg.model, &arrivals, &mut rng);
    let ids = claim_numbers(&arrivals);

    let mut claims = Vec::new();
    for (k, m) in cfg.model.types.iter().enumerate() {
        for ((&t, &u), &id) in arrivals[k].iter().zip(&uniforms[k]).zip(&ids[k]) {
            let w = m.delay.quantile(f64::from(t.0), u).min(1e7);
            let r = t.offset(w.floor() as i32);
            if r > cfg.end {
                continue;
            }
            let tau = (f64::from(r.days_until(cfg.end)) + 1.0) / DAYS_PER_YEAR;
            let mean = m.payments.intensity.cumulative(tau);
            let v: f64 = rng.random();
            let n = conditional_count_quantile(&m.copula.at(tau), u, mean, v);
            let times = m.payments.place_times(0.0, tau, n, &mut rng);
            let amounts = m.severity.simulate_amounts(n as usize, &mut rng);
            let payments = times
                .into_iter()
                .zip(amounts)
                .map(|(s, amount)| PaymentEvent {
                    date: r.offset((s * DAYS_PER_YEAR).floor() as i32).clamp(r, cfg.end),
                    amount,
                })
                .collect();
            let claim_id = format!("P{id:07}-{}", m.claim_type.code());
            claims.push(ClaimRecord::new(claim_id, m.claim_type, t, r, payments)?);
        }
    }
    Portfolio::new(claims, cfg.end)
}

/// Claim numbers per type; the k-th accidents of both types on one day share a number.
fn claim_numbers(arrivals: &[Vec<Day>]) -> Vec<Vec<u64>> {
    let mut out: Vec<Vec<u64>> = arrivals.iter().map(|a| Vec::with_capacity(a.len())).collect();
    let mut next = 1u64;
    if arrivals.len() != 2 {
        for (k, a) in arrivals.iter().enumerate() {
            for _ in a {
                out[k].push(next);
                next += 1;
            }
        }
        return out;
    }
    let (x, y) = (&arrivals[0], &arrivals[1]);
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        let day = match (x.get(i), y.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) | (None, Some(&a)) => a,
            (None, None) => unreachable!(),
        };
        let ni = x[i..].iter().take_while(|&&d| d == day).count();
        let nj = y[j..].iter().take_while(|&&d| d == day).count();
        for q in 0..ni.max(nj) {
            if q < ni {
                out[0].push(next);
            }
            if q < nj {
                out[1].push(next);
            }
            next += 1;
        }
        i += ni;
        j += nj;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        let mut cfg = SynthConfig::default();
        cfg.end = Day::from_ymd(2002, 12, 31).unwrap();
        cfg
    }

    #[test]
    fn reproducible_and_valid() {
        let cfg = small().with_expected_claims(1000).unwrap();
        let a = generate_portfolio(&cfg, 7).unwrap();
        let b = generate_portfolio(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.len() > 850 && a.len() < 1100, "{}", a.len());
        for c in a.claims() {
            assert!(c.reporting_date >= c.accident_date && c.reporting_date <= cfg.end);
            assert!(c.payments.iter().all(|p| p.date >= c.reporting_date && p.date <= cfg.end && p.amount > 0.0));
        }
    }

    #[test]
    fn paired_ids_share_prefix() {
        let p = generate_portfolio(&small(), 3).unwrap();
        let bi: std::collections::HashSet<&str> = p
            .claims()
            .iter()
            .filter(|c| c.claim_type == ClaimType::BodilyInjury)
            .map(|c| c.claim_id.split('-').next().unwrap())
            .collect();
        let shared = p
            .claims()
            .iter()
            .filter(|c| c.claim_type == ClaimType::MaterialDamage)
            .filter(|c| bi.contains(c.claim_id.split('-').next().unwrap()))
            .count();
        assert!(shared > 0);
    }

    #[test]
    fn yearly_mean_delay_falls_with_negative_trend() {
        let mut cfg = SynthConfig::default();
        cfg.model.types.truncate(1);
        cfg.model.inter_type = None;
        cfg.model.types[0].delay = DelayModel::weibull_tv(1.5, 60f64.ln(), -0.1).unwrap();
        let p = generate_portfolio(&cfg, 11).unwrap();
        let mean_for = |y: i32| {
            let d: Vec<f64> = p
                .claims()
                .iter()
                .filter(|c| c.accident_date.year() == y)
                .map(|c| f64::from(c.reporting_delay()))
                .collect();
            d.iter().sum::<f64>() / d.len() as f64
        };
        let means: Vec<f64> = (2000..2016).map(mean_for).collect();
        assert!(means.windows(4).all(|w| w[0] > w[3]), "{means:?}");
    }
}
